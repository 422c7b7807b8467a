//! Resolution of `simulate` settings from flags, an optional key=value file
//! and built-in defaults, in that order of precedence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use vimp_core::forest::ForestConfig;
use vimp_core::simlab::{GridSpec, ModelKind};

use crate::args::{List, SimulateArgs};
use crate::error::{CliError, CliResult};

pub const KEYS: [&str; 15] = [
    "model", "deltas", "ps", "ns", "reps", "beta", "noise_var", "seed", "out", "correction", "pap_reps", "trees",
    "mtry", "min_node", "max_depth",
];

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys
/// are errors.
pub fn parse_config(text: &str, path: &Path) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{} line {lineno}: expected key=value", path.display())))?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("{} line {lineno}: unknown key '{key}'", path.display())));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("{} line {lineno}: duplicate key '{key}'", path.display())));
        }
    }
    Ok(map)
}

struct Source<'a> {
    file: &'a BTreeMap<String, String>,
    path: &'a Path,
}

impl Source<'_> {
    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.file
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| CliError::Usage(format!("{}: bad value '{v}' for '{key}'", self.path.display())))
            })
            .transpose()
    }
}

#[derive(Debug, Clone)]
pub struct SimulateSettings {
    pub grid: GridSpec,
    pub out: Option<PathBuf>,
}

pub fn resolve(args: &SimulateArgs, file: &BTreeMap<String, String>, path: &Path) -> CliResult<SimulateSettings> {
    let src = Source { file, path };
    let model = match args.model {
        Some(m) => m.into(),
        None => match file.get("model") {
            Some(v) => v.parse::<ModelKind>().map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
            None => ModelKind::Linear,
        },
    };
    let defaults = GridSpec::default();
    let list_f = |flag: &Option<List<f64>>, key| -> CliResult<Option<Vec<f64>>> {
        Ok(match flag {
            Some(l) => Some(l.0.clone()),
            None => src.get::<ListValue<f64>>(key)?.map(|l| l.0),
        })
    };
    let list_u = |flag: &Option<List<usize>>, key| -> CliResult<Option<Vec<usize>>> {
        Ok(match flag {
            Some(l) => Some(l.0.clone()),
            None => src.get::<ListValue<usize>>(key)?.map(|l| l.0),
        })
    };
    let correction = if args.no_correction { false } else { src.get::<bool>("correction")?.unwrap_or(true) };
    let base_forest = ForestConfig::default();
    let forest = ForestConfig {
        n_trees: pick(args.trees, src.get("trees")?, base_forest.n_trees),
        mtry: args.mtry.or(src.get("mtry")?),
        min_node: pick(args.min_node, src.get("min_node")?, base_forest.min_node),
        max_depth: args.max_depth.or(src.get("max_depth")?),
        ..base_forest
    };
    let grid = GridSpec {
        deltas: list_f(&args.deltas, "deltas")?.unwrap_or(defaults.deltas),
        ps: list_u(&args.ps, "ps")?.unwrap_or(defaults.ps),
        ns: list_u(&args.ns, "ns")?.unwrap_or(defaults.ns),
        reps: pick(args.reps, src.get("reps")?, defaults.reps),
        beta_value: pick(args.beta, src.get("beta")?, defaults.beta_value),
        noise_var: pick(args.noise_var, src.get("noise_var")?, defaults.noise_var),
        model,
        apply_correction: correction,
        base_seed: pick(args.seed, src.get("seed")?, defaults.base_seed),
        forest,
        pap_reps: pick(args.pap_reps, src.get("pap_reps")?, defaults.pap_reps),
    };
    grid.validate()?;
    let out = args.out.clone().or(src.get::<PathBuf>("out")?);
    Ok(SimulateSettings { grid, out })
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// A list value in a config file, with the same syntax as on the command line.
struct ListValue<T>(Vec<T>);

impl<T: FromStr> FromStr for ListValue<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.parse::<List<T>>().map(|l| ListValue(l.0))
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// The resolved settings in config-file syntax, so a run can be replayed with
/// `--config`.
pub fn render(grid: &GridSpec) -> String {
    let mut s = String::new();
    let f = &grid.forest;
    let _ = writeln!(s, "model = {}", grid.model);
    let _ = writeln!(s, "deltas = {}", join(&grid.deltas));
    let _ = writeln!(s, "ps = {}", join(&grid.ps));
    let _ = writeln!(s, "ns = {}", join(&grid.ns));
    let _ = writeln!(s, "reps = {}", grid.reps);
    let _ = writeln!(s, "beta = {}", grid.beta_value);
    let _ = writeln!(s, "noise_var = {}", grid.noise_var);
    let _ = writeln!(s, "seed = {}", grid.base_seed);
    let _ = writeln!(s, "correction = {}", grid.apply_correction);
    let _ = writeln!(s, "pap_reps = {}", grid.pap_reps);
    if grid.model == ModelKind::Forest {
        let _ = writeln!(s, "trees = {}", f.n_trees);
        if let Some(m) = f.mtry {
            let _ = writeln!(s, "mtry = {m}");
        }
        let _ = writeln!(s, "min_node = {}", f.min_node);
        if let Some(d) = f.max_depth {
            let _ = writeln!(s, "max_depth = {d}");
        }
    }
    s
}
