//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion (with indented detail lines), and exits nonzero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vimp_core::forest::ForestConfig;
use vimp_core::simlab::{
    facet_slopes, parity_points, run_grid, through_origin_slope, write_aggregate_csv, write_parity_csv,
    write_raw_csv, GridOutcome, GridSpec, Metric, ModelKind, SimResult,
};
use vimp_core::theory::{self, TheoryPoint};

const BASE_SEED: u64 = 20_240_611;

struct Outcome {
    name: &'static str,
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new(name: &'static str) -> Self {
        Outcome { name, pass: true, details: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if !ok {
            self.pass = false;
        }
        self.details.push(format!("{} {}", if ok { "ok  " } else { "FAIL" }, detail));
    }

    fn note(&mut self, detail: String) {
        self.details.push(format!("info {detail}"));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn random_sweep(n_points: usize) -> Vec<TheoryPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(BASE_SEED);
    (0..n_points)
        .map(|_| {
            let delta = rng.gen_range(0.0..0.999);
            let p = rng.gen_range(2..=20);
            let n = rng.gen_range(p + 1..=5000);
            TheoryPoint::new(delta, p, n, 1.0, 0.1).unwrap()
        })
        .collect()
}

// Independent restatement of the reduced LOCO expression.
fn loco_reduced_oracle(delta: f64, p: f64, beta: f64) -> f64 {
    let num = (1.0 + (p - 1.0) * delta).powi(2);
    let den = (1.0 + (p - 2.0) * delta).powi(2) + (p - 1.0) * delta * delta;
    beta * (1.0 - delta) * (num / den).sqrt()
}

fn criterion_identity() -> Outcome {
    let mut out = Outcome::new("1 LOCO exact/simplified identity");
    let start = Instant::now();
    let mut points = theory::default_grid();
    points.extend(random_sweep(1000));
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for pt in &points {
        let c = theory::c_theoretical(pt).unwrap();
        let exact = theory::loco_exact(pt, c);
        let simple = theory::loco_simplified(pt);
        worst = worst.max(rel(exact, simple));
        worst_oracle = worst_oracle.max(rel(simple, loco_reduced_oracle(pt.delta, pt.p as f64, pt.beta_i)));
    }
    let elapsed = start.elapsed();
    out.check(worst <= 1e-12, format!("{} points, max relative discrepancy {worst:.3e} (tol 1e-12)", points.len()));
    out.check(worst_oracle <= 1e-12, format!("simplified vs independent oracle {worst_oracle:.3e}"));
    out.check(elapsed < Duration::from_secs(1), format!("runtime {elapsed:?} (< 1 s)"));
    out
}

fn criterion_inverse() -> Outcome {
    let mut out = Outcome::new("2 inverse-diagonal closed form vs brute force");
    let start = Instant::now();
    let mut worst_gj = 0.0f64;
    let mut worst_lu = 0.0f64;
    let mut worst_factored = 0.0f64;
    for pt in theory::default_grid() {
        worst_factored = worst_factored.max(rel(theory::xtx_inv_diag_theoretical(&pt), theory::xtx_inv_diag_factored(&pt).unwrap()));
        let closed = theory::xtx_inv_diag_theoretical(&pt);
        worst_gj = worst_gj.max(rel(closed, theory::xtx_inv_diag_brute(&pt).unwrap()));
        // Second oracle: nalgebra LU on (n-1) A A^T built here.
        let p = pt.p;
        let a = DMatrix::from_fn(p, p, |r, c| if r == c { 1.0 } else { pt.delta });
        let m = (&a * a.transpose()) * (pt.n as f64 - 1.0);
        let inv = m.lu().try_inverse().unwrap();
        for i in 0..p {
            worst_lu = worst_lu.max(rel(closed, inv[(i, i)]));
        }
    }
    let elapsed = start.elapsed();
    out.check(worst_gj <= 1e-10, format!("Gauss-Jordan oracle max relative {worst_gj:.3e} (tol 1e-10)"));
    out.check(worst_lu <= 1e-10, format!("LU oracle max relative {worst_lu:.3e} (tol 1e-10)"));
    out.check(worst_factored <= 1e-10, format!("factored oracle max relative {worst_factored:.3e} (tol 1e-10)"));
    out.check(elapsed < Duration::from_secs(1), format!("runtime {elapsed:?} (< 1 s)"));
    out
}

fn criterion_t_bridge() -> Outcome {
    let mut out = Outcome::new("3 LOCO to t bridge");
    let start = Instant::now();
    let mut worst = 0.0f64;
    for pt in theory::default_grid() {
        let bridged = theory::loco_simplified(&pt) * ((pt.n as f64 - 1.0) / pt.noise_var).sqrt();
        worst = worst.max(rel(theory::t_theoretical(&pt), bridged));
    }
    let elapsed = start.elapsed();
    out.check(worst <= 1e-12, format!("max relative discrepancy {worst:.3e} (tol 1e-12)"));
    out.check(elapsed < Duration::from_secs(1), format!("runtime {elapsed:?} (< 1 s)"));
    out
}

fn results_for(outcome: &GridOutcome, metric: Metric) -> Vec<&SimResult> {
    outcome.results.iter().filter(|r| r.metric == metric).collect()
}

fn pooled_rel(rows: &[&SimResult]) -> f64 {
    let diffs: Vec<f64> = rows.iter().filter_map(|r| r.rel_diff_corrected).map(f64::abs).collect();
    diffs.iter().sum::<f64>() / diffs.len() as f64
}

fn z_corrected(r: &SimResult) -> f64 {
    (r.emp_mean - r.theory_corrected) / r.se()
}

fn z_replicate(r: &SimResult) -> f64 {
    (r.emp_mean - r.theory_corrected) / (r.rep_sd / (r.reps as f64).sqrt())
}

fn per_cell_3se(out: &mut Outcome, rows: &[&SimResult], label: &str) {
    let mut beyond = 0;
    for r in rows {
        let z = z_corrected(r);
        if z.abs() > 3.0 {
            beyond += 1;
            out.check(
                false,
                format!(
                    "{label} delta={} p={} n={}: mean {:.5} vs corrected {:.5}, z={z:.2}",
                    r.delta, r.p, r.n, r.emp_mean, r.theory_corrected
                ),
            );
        }
    }
    if beyond == 0 {
        out.check(true, format!("{label}: all {} cells within 3 SE of corrected theory", rows.len()));
    }
    let worst_rep = rows.iter().map(|r| z_replicate(r).abs()).fold(0.0, f64::max);
    out.note(format!("{label}: largest |z| using replicate-mean SE instead: {worst_rep:.2}"));
}

fn criterion_pap(grid: &GridOutcome) -> Outcome {
    let mut out = Outcome::new("4 linear PaP parity at n=2000");
    let rows: Vec<_> = results_for(grid, Metric::Pap).into_iter().filter(|r| r.n == 2000).collect();
    per_cell_3se(&mut out, &rows, "PaP");
    let pooled = pooled_rel(&rows);
    out.check(pooled < 0.03, format!("pooled |relative difference| {pooled:.4} (< 0.03)"));
    out
}

fn criterion_loco(grid: &GridOutcome) -> Outcome {
    let mut out = Outcome::new("5 linear LOCO parity");
    let loco = results_for(grid, Metric::Loco);
    let large: Vec<_> = loco.iter().copied().filter(|r| r.n == 2000).collect();
    let pooled = pooled_rel(&large);
    out.check(pooled < 0.05, format!("pooled |relative difference| at n=2000 {pooled:.4} (< 0.05)"));
    let small: Vec<_> = loco.iter().copied().filter(|r| r.n == 20 && r.p == 12).collect();
    for r in &small {
        out.check(
            r.emp_mean > r.theory_raw,
            format!("n=20 p=12 delta={}: mean {:.4} > raw theory {:.4}", r.delta, r.emp_mean, r.theory_raw),
        );
    }
    for r in &small {
        let z = z_corrected(r);
        out.check(
            z.abs() <= 3.0,
            format!(
                "n=20 p=12 delta={}: mean {:.4} vs corrected {:.4}, z={z:.2}",
                r.delta, r.emp_mean, r.theory_corrected
            ),
        );
    }
    let tail: Vec<_> = grid.records.iter().filter(|r| r.n == 20 && r.p == 12 && r.delta == 0.99).collect();
    let clamped = tail.iter().filter(|r| r.loco_clamped).count();
    out.note(format!("n=20 p=12 delta=0.99: {clamped} of {} LOCO values clamped at zero", tail.len()));
    let k = small.len() as f64;
    let emp = small.iter().map(|r| r.emp_mean).sum::<f64>() / k;
    let th = small.iter().map(|r| r.theory_corrected).sum::<f64>() / k;
    let se = small.iter().map(|r| r.se().powi(2)).sum::<f64>().sqrt() / k;
    out.note(format!("n=20 p=12 averaged over delta: mean {emp:.4} vs corrected {th:.4}, z={:.2}", (emp - th) / se));
    out
}

fn binomial_two_sided(k: usize, n: usize) -> f64 {
    let ln_choose = |n: usize, k: usize| -> f64 {
        (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
    };
    let pmf = |i: usize| (ln_choose(n, i) - n as f64 * std::f64::consts::LN_2).exp();
    let lo = k.min(n - k);
    let tail: f64 = (0..=lo).map(pmf).sum();
    (2.0 * tail).min(1.0)
}

fn criterion_c(grid: &GridOutcome) -> Outcome {
    let mut out = Outcome::new("6 absorption coefficient estimate");
    let c = results_for(grid, Metric::CHat);
    let large: Vec<_> = c.iter().copied().filter(|r| r.n >= 200).collect();
    per_cell_3se(&mut out, &large, "c_hat");
    let signed: Vec<_> = c.iter().filter(|r| r.emp_mean != r.theory_raw).collect();
    let above = signed.iter().filter(|r| r.emp_mean > r.theory_raw).count();
    let pval = binomial_two_sided(above, signed.len());
    out.check(
        pval >= 0.01,
        format!("sign test: {above} of {} cells above theory, two-sided p={pval:.3} (>= 0.01)", signed.len()),
    );
    for r in c.iter().filter(|r| r.n == 2000) {
        if r.delta == 0.0 {
            out.check(r.emp_mean.abs() <= 0.02, format!("delta=0 p={}: mean {:.5} within 0.02 of 0", r.p, r.emp_mean));
        } else if r.delta == 0.99 {
            let bound = 1.0 / (r.p as f64 - 1.0);
            out.check(
                (r.emp_mean - bound).abs() <= 0.02,
                format!("delta=0.99 p={}: mean {:.5} within 0.02 of {bound:.5}", r.p, r.emp_mean),
            );
        }
    }
    out
}

fn criterion_parity(grid: &GridOutcome) -> Outcome {
    let mut out = Outcome::new("7 parity slope of transformed t vs corrected LOCO");
    let points = parity_points(&grid.records);
    for ((p, n), slope) in facet_slopes(&points) {
        if n >= 200 {
            out.check((slope - 1.0).abs() <= 0.02, format!("p={p} n={n}: slope {slope:.4}"));
        } else {
            out.note(format!("p={p} n={n}: slope {slope:.4}"));
        }
    }
    let large: Vec<_> = points.iter().filter(|q| q.n >= 200).cloned().collect();
    let pooled = through_origin_slope(&large);
    out.check((pooled - 1.0).abs() <= 0.02, format!("pooled n>=200: slope {pooled:.4}"));
    out
}

fn criterion_mse(grid: &GridOutcome) -> Outcome {
    let mut out = Outcome::new("8 MSE-level checks at n=2000");
    let mut cells: BTreeMap<(u64, usize), (f64, f64, usize)> = BTreeMap::new();
    for r in grid.records.iter().filter(|r| r.n == 2000) {
        let e = cells.entry((r.delta.to_bits(), r.p)).or_insert((0.0, 0.0, 0));
        e.0 += r.valid_mse;
        e.1 += r.valid_mse + r.pap_loss_diff;
        e.2 += 1;
    }
    let noise = 0.1;
    let mut fails = 0;
    let mut worst_v = 0.0f64;
    let mut worst_p = 0.0f64;
    for ((bits, p), (v, perm, k)) in &cells {
        let delta = f64::from_bits(*bits);
        let (v, perm) = (v / *k as f64, perm / *k as f64);
        let perm_th = noise + 2.0 * (1.0 + (*p as f64 - 1.0) * delta * delta);
        let (rv, rp) = ((v - noise).abs() / noise, (perm - perm_th).abs() / perm_th);
        if *bits == 0.99f64.to_bits() {
            // Expectation once the sampling variance of the fitted coefficient is included.
            let pt = TheoryPoint::new(delta, *p, 2000, 1.0, noise).unwrap();
            let var_beta = noise * theory::xtx_inv_diag_theoretical(&pt);
            let adjusted = noise * (1.0 + (*p as f64 - 2.0) / 1999.0) + 2.0 * theory::var_x(&pt) * (1.0 + var_beta);
            out.note(format!("delta={delta} p={p}: Var(beta_hat) {var_beta:.3}, adjusted permuted MSE {adjusted:.4}"));
        }
        worst_v = worst_v.max(rv);
        worst_p = worst_p.max(rp);
        if rv > 0.10 || rp > 0.10 {
            fails += 1;
            out.check(
                false,
                format!("delta={delta} p={p}: validation MSE {v:.4} (rel {rv:.3}), permuted MSE {perm:.4} vs {perm_th:.4} (rel {rp:.3})"),
            );
        }
    }
    if fails == 0 {
        out.check(true, format!("all {} cells: worst validation rel {worst_v:.4}, worst permuted rel {worst_p:.4} (<= 0.10)", cells.len()));
    }
    out
}

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let m = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / m, ry.iter().sum::<f64>() / m);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn forest_grid() -> GridSpec {
    GridSpec {
        ps: vec![6],
        ns: vec![2000],
        reps: 5,
        model: ModelKind::Forest,
        base_seed: BASE_SEED,
        forest: ForestConfig { n_trees: 100, ..ForestConfig::default() },
        ..GridSpec::default()
    }
}

fn criterion_forest() -> Outcome {
    let mut out = Outcome::new("9 random forest generalization at n=2000");
    let grid = forest_grid();
    let start = Instant::now();
    let outcome = run_grid(&grid).unwrap();
    out.note(format!(
        "p=6, {} reps, {} trees, runtime {:?}",
        grid.reps,
        grid.forest.n_trees,
        start.elapsed()
    ));
    out.check(outcome.failures.is_empty(), format!("{} failed cells", outcome.failures.len()));
    let pap = results_for(&outcome, Metric::Pap);
    let loco = results_for(&outcome, Metric::Loco);
    let deltas: Vec<f64> = pap.iter().map(|r| r.delta).collect();
    let rho_pap = spearman(&deltas, &pap.iter().map(|r| r.emp_mean).collect::<Vec<_>>());
    let rho_loco = spearman(
        &loco.iter().map(|r| r.delta).collect::<Vec<_>>(),
        &loco.iter().map(|r| r.emp_mean).collect::<Vec<_>>(),
    );
    out.check(rho_pap > 0.9, format!("PaP Spearman rho {rho_pap:.3} (> 0.9, increasing)"));
    out.check(rho_loco < -0.9, format!("LOCO Spearman rho {rho_loco:.3} (< -0.9, decreasing)"));
    let nonzero: Vec<_> = pap.iter().copied().filter(|r| r.delta != 0.0).collect();
    let pooled = nonzero.iter().map(|r| ((r.emp_mean - r.theory_raw) / r.theory_raw).abs()).sum::<f64>()
        / nonzero.len() as f64;
    out.check(pooled < 0.30, format!("PaP pooled |relative difference| excluding delta=0: {pooled:.4} (< 0.30)"));
    if let Some(r) = pap.iter().find(|r| r.delta == 0.0) {
        out.check(
            r.emp_mean < r.theory_raw,
            format!("delta=0 PaP mean {:.4} below linear theory {:.4}", r.emp_mean, r.theory_raw),
        );
    }
    for r in &pap {
        out.note(format!("delta={} PaP {:.4} (theory {:.4})", r.delta, r.emp_mean, r.theory_raw));
    }
    out
}

fn csv_bytes(outcome: &GridOutcome) -> Vec<u8> {
    let mut buf = Vec::new();
    write_raw_csv(&outcome.records, &mut buf).unwrap();
    write_aggregate_csv(&outcome.results, &mut buf).unwrap();
    write_parity_csv(&parity_points(&outcome.records), &mut buf).unwrap();
    buf
}

fn criterion_determinism(linear: &GridOutcome, linear_grid: &GridSpec) -> Outcome {
    let mut out = Outcome::new("10 determinism");
    let rerun = run_grid(linear_grid).unwrap();
    out.check(csv_bytes(linear) == csv_bytes(&rerun), "linear grid CSV output identical on rerun".into());

    let small = GridSpec {
        deltas: vec![0.0, 0.5, 0.9],
        ps: vec![3],
        ns: vec![200],
        reps: 2,
        model: ModelKind::Forest,
        base_seed: BASE_SEED,
        forest: ForestConfig { n_trees: 20, ..ForestConfig::default() },
        ..GridSpec::default()
    };
    let a = csv_bytes(&run_grid(&small).unwrap());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| csv_bytes(&run_grid(&small).unwrap()));
    out.check(a == b, "forest grid CSV output identical across thread counts".into());
    out
}

fn main() -> ExitCode {
    let mut outcomes = vec![criterion_identity(), criterion_inverse(), criterion_t_bridge()];

    let linear_grid = GridSpec { base_seed: BASE_SEED, ..GridSpec::default() };
    let start = Instant::now();
    let linear = run_grid(&linear_grid).unwrap();
    eprintln!("linear grid: {} cells in {:?}", linear_grid.cells().len(), start.elapsed());
    assert!(linear.failures.is_empty(), "linear grid had failed cells: {:?}", linear.failures);

    outcomes.push(criterion_pap(&linear));
    outcomes.push(criterion_loco(&linear));
    outcomes.push(criterion_c(&linear));
    outcomes.push(criterion_parity(&linear));
    outcomes.push(criterion_mse(&linear));
    outcomes.push(criterion_forest());
    outcomes.push(criterion_determinism(&linear, &linear_grid));

    for o in &outcomes {
        println!("{} criterion {}", if o.pass { "PASS" } else { "FAIL" }, o.name);
        for d in &o.details {
            println!("    {d}");
        }
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
