use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use vimp_core::datagen::{generate_pair, DataSpec};
use vimp_core::forest::{ForestConfig, RandomForest};
use vimp_core::importance::{report_set, Predictor, ReportOptions};
use vimp_core::linmodel::{FitOptions, Ols};
use vimp_core::simlab::{
    parity_points, run_grid_with, write_aggregate_csv, write_parity_csv, write_raw_csv, ModelKind,
};
use vimp_core::theory::{self, TheoryPoint};

use crate::args::{FiguresArgs, GenerateArgs, ModelArg, ReportArgs, SimulateArgs, VerifyArgs};
use crate::config;
use crate::data::{read_dataset, split_half, write_dataset};
use crate::error::{CliError, CliResult};
use crate::figures;

/// SVG files larger than this are reported as an error.
pub const MAX_SVG_BYTES: usize = 2 * 1024 * 1024;

pub fn verify(args: &VerifyArgs) -> CliResult<()> {
    let deltas = args.deltas.as_ref().map_or_else(theory::default_deltas, |l| l.0.clone());
    let ps = args.ps.as_ref().map_or_else(|| theory::DEFAULT_PS.to_vec(), |l| l.0.clone());
    let ns = args.ns.as_ref().map_or_else(|| theory::DEFAULT_NS.to_vec(), |l| l.0.clone());
    let mut points = Vec::with_capacity(deltas.len() * ps.len() * ns.len() + args.sweep);
    for &delta in &deltas {
        for &p in &ps {
            for &n in &ns {
                points.push(TheoryPoint::new(delta, p, n, 1.0, 0.1)?);
            }
        }
    }
    let grid_points = points.len();
    points.extend(theory::random_points(args.sweep, args.seed));

    let report = match args.perturb_c {
        Some(shift) => theory::consistency_check_perturbed(&points, shift)?,
        None => theory::consistency_check(&points)?,
    };
    println!("points: {grid_points} grid + {} random (seed {})", args.sweep, args.seed);
    println!("{:<30} {:>22} {:>10}  status", "check", "max rel. discrepancy", "tolerance");
    let rows = [
        ("loco exact vs simplified", report.loco_identity, theory::LOCO_IDENTITY_TOL),
        ("inverse diagonal vs inversion", report.xtx_inverse, theory::XTX_INVERSE_TOL),
        ("t vs loco bridge", report.t_bridge, theory::T_BRIDGE_TOL),
    ];
    for (name, worst, tol) in rows {
        let status = if worst <= tol { "ok" } else { "FAIL" };
        println!("{name:<30} {worst:>22.3e} {tol:>10.0e}  {status}");
    }
    if report.within_tolerance() {
        Ok(())
    } else {
        Err(CliError::Violation("closed-form identities exceed tolerance".into()))
    }
}

fn create_writer(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> CliResult<()> {
    let mut w = create_writer(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn default_out_dir() -> PathBuf {
    Path::new("out").join(chrono::Local::now().format("%Y%m%d-%H%M%S").to_string())
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            config::parse_config(&text, path)?
        }
        None => Default::default(),
    };
    let cfg_path = args.config.clone().unwrap_or_default();
    let settings = config::resolve(args, &file, &cfg_path)?;
    let grid = settings.grid;
    let out = settings.out.unwrap_or_else(default_out_dir);
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    write_with(&out.join("config.txt"), |w| w.write_all(config::render(&grid).as_bytes()))?;

    let total = grid.cells().len();
    let done = AtomicUsize::new(0);
    let start = Instant::now();
    eprintln!("simulate: {total} cells x {} reps, model {}, output {}", grid.reps, grid.model, out.display());
    let outcome = run_grid_with(&grid, |cell, res| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        if !args.quiet {
            let status = match res {
                Ok(records) => format!("{} records", records.len()),
                Err(e) => format!("failed: {e}"),
            };
            eprintln!("[{k}/{total}] delta={} p={} n={}: {status}", cell.delta, cell.p, cell.n);
        }
    })?;

    write_with(&out.join("raw.csv"), |w| write_raw_csv(&outcome.records, w))?;
    write_with(&out.join("aggregate.csv"), |w| write_aggregate_csv(&outcome.results, w))?;
    if grid.model == ModelKind::Linear {
        let points = parity_points(&outcome.records);
        write_with(&out.join("parity.csv"), |w| write_parity_csv(&points, w))?;
    }
    for f in &outcome.failures {
        eprintln!("cell delta={} p={} n={} failed: {}", f.cell.delta, f.cell.p, f.cell.n, f.error);
    }
    eprintln!(
        "simulate: {} records, {} cells failed, {:.1}s",
        outcome.records.len(),
        outcome.failures.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn figures(args: &FiguresArgs) -> CliResult<()> {
    let inputs = figures::load(&args.inputs)?;
    if inputs.aggregate.is_empty() && inputs.parity.is_empty() {
        return Err(CliError::Usage("inputs contain no rows to plot".into()));
    }
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    for (name, svg) in figures::render_all(&inputs, args.error_bars) {
        let path = args.out.join(&name);
        if svg.len() > MAX_SVG_BYTES {
            return Err(CliError::input(&path, format!("figure would be {} bytes, over the 2 MB limit", svg.len())));
        }
        fs::write(&path, svg).map_err(|e| CliError::io(&path, e))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn print_report<P: Predictor>(
    predictor: &P,
    train: &vimp_core::datagen::Dataset,
    valid: &vimp_core::datagen::Dataset,
    args: &ReportArgs,
) -> CliResult<()> {
    let opts = ReportOptions { pap_reps: args.pap_reps, ..ReportOptions::default() };
    let set = report_set(predictor, train, valid, args.seed, opts)?;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    let io = |e| CliError::io(Path::new("<stdout>"), e);
    writeln!(w, "variable,pap,loco,t,c_hat,pap_clamped,loco_clamped").map_err(io)?;
    for r in &set.rows {
        writeln!(
            w,
            "x{},{},{},{},{},{},{}",
            r.variable + 1,
            r.pap,
            r.loco,
            opt(r.t),
            opt(r.c_hat),
            r.clamped_pap,
            r.clamped_loco
        )
        .map_err(io)?;
    }
    eprintln!("training rows {}, validation rows {}, validation MSE {}", train.n(), valid.n(), set.baseline_mse);
    Ok(())
}

pub fn report(args: &ReportArgs) -> CliResult<()> {
    let data = read_dataset(&args.input)?;
    let (train, valid) = match &args.valid {
        Some(path) => {
            let valid = read_dataset(path)?;
            if valid.p() != data.p() {
                return Err(CliError::input(path, format!("has {} predictors, training data has {}", valid.p(), data.p())));
            }
            (data, valid)
        }
        None => split_half(&data)?,
    };
    match args.model {
        ModelArg::Linear => {
            let ols = Ols { options: FitOptions { intercept: !args.no_intercept } };
            print_report(&ols, &train, &valid, args)
        }
        ModelArg::Forest => {
            let rf = RandomForest { config: ForestConfig { n_trees: args.trees, ..ForestConfig::default() } };
            print_report(&rf, &train, &valid, args)
        }
    }
}

pub fn generate(args: &GenerateArgs) -> CliResult<()> {
    let spec = DataSpec::uniform(args.n, args.p, args.delta, args.beta, args.noise_var, args.seed);
    let (train, valid) = generate_pair(&spec)?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    write_dataset(&train, &args.out.join("train.csv"))?;
    write_dataset(&valid, &args.out.join("valid.csv"))?;
    Ok(())
}
