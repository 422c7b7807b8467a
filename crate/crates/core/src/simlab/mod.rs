//! Monte Carlo harness over a `(delta, p, n)` grid.
//!
//! Each replicate of a cell draws a fresh training/validation pair, fits the
//! chosen model, and records empirical PaP and LOCO for every variable (plus
//! the t-statistic and absorption coefficient for the linear model). The
//! replicate seed is a hash of `(base_seed, delta, p, n, replicate)`, so a
//! cell's results do not depend on which other cells are in the grid or on
//! the order in which cells run.

mod aggregate;
mod io;
mod parity;

use rayon::prelude::*;

pub use aggregate::{aggregate, mean_sd, Metric, SimResult, TheoryParams};
pub use io::{write_aggregate_csv, write_parity_csv, write_raw_csv, AGGREGATE_HEADER, PARITY_HEADER, RAW_HEADER};
pub use parity::{facet_slopes, parity_experiment, parity_points, through_origin_slope, ParityPoint, ParityResult};

use crate::datagen::{generate_pair, DataSpec};
use crate::error::{Result, VimpError};
use crate::forest::{ForestConfig, RandomForest};
use crate::importance::{report_set, Predictor, ReportOptions};
use crate::linmodel::Ols;
use crate::rng::{derive, Token};
use crate::theory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Linear,
    Forest,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Forest => "forest",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = VimpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "forest" => Ok(ModelKind::Forest),
            other => Err(VimpError::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub deltas: Vec<f64>,
    pub ps: Vec<usize>,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub beta_value: f64,
    pub noise_var: f64,
    pub model: ModelKind,
    pub apply_correction: bool,
    pub base_seed: u64,
    /// Forest settings; its `seed` field is ignored (seeds are per replicate).
    pub forest: ForestConfig,
    /// Permutations averaged per PaP evaluation.
    pub pap_reps: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            deltas: theory::default_deltas(),
            ps: theory::DEFAULT_PS.to_vec(),
            ns: theory::DEFAULT_NS.to_vec(),
            reps: 100,
            beta_value: 1.0,
            noise_var: 0.1,
            model: ModelKind::Linear,
            apply_correction: true,
            base_seed: 0,
            forest: ForestConfig::default(),
            pap_reps: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub delta: f64,
    pub p: usize,
    pub n: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() || self.ps.is_empty() || self.ns.is_empty() {
            return Err(VimpError::EmptyInput("grid axes must be nonempty"));
        }
        if self.reps == 0 || self.pap_reps == 0 {
            return Err(VimpError::InvalidParameter("reps must be positive".into()));
        }
        if let Some(d) = self.deltas.iter().find(|d| !(0.0..1.0).contains(*d)) {
            return Err(VimpError::InvalidParameter(format!("delta {d} outside [0, 1)")));
        }
        if let Some(p) = self.ps.iter().find(|&&p| p < 2) {
            return Err(VimpError::InvalidParameter(format!("p = {p} < 2")));
        }
        if self.ns.contains(&0) {
            return Err(VimpError::InvalidParameter("n must be positive".into()));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) || !self.beta_value.is_finite() {
            return Err(VimpError::InvalidParameter("noise_var must be positive and beta finite".into()));
        }
        if self.model == ModelKind::Linear && self.apply_correction {
            let max_p = *self.ps.iter().max().expect("nonempty");
            if let Some(n) = self.ns.iter().find(|&&n| n <= max_p) {
                return Err(VimpError::InvalidParameter(format!(
                    "corrected linear grid needs every n > max(p) = {max_p}, got n = {n}"
                )));
            }
        }
        Ok(())
    }

    /// Cells in `(delta, p, n)` order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.deltas.len() * self.ps.len() * self.ns.len());
        for &delta in &self.deltas {
            for &p in &self.ps {
                for &n in &self.ns {
                    out.push(Cell { delta, p, n });
                }
            }
        }
        out
    }

    pub fn theory_params(&self) -> TheoryParams {
        TheoryParams {
            beta: self.beta_value,
            noise_var: self.noise_var,
            apply_correction: self.apply_correction,
        }
    }
}

/// One variable in one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub model: ModelKind,
    pub delta: f64,
    pub p: usize,
    pub n: usize,
    pub replicate: usize,
    pub variable: usize,
    pub pap_emp: f64,
    pub loco_emp: f64,
    pub c_hat: Option<f64>,
    pub t_emp: Option<f64>,
    pub pap_clamped: bool,
    pub loco_clamped: bool,
    pub seed: u64,
    /// Validation MSE of the reference model (shared by the replicate's records).
    pub valid_mse: f64,
    /// Permuted-minus-original validation MSE before clamping.
    pub pap_loss_diff: f64,
    pub loco_loss_diff: f64,
    /// Residual variance of the reference fit (linear only).
    pub resid_var: Option<f64>,
}

pub fn replicate_seed(base_seed: u64, cell: Cell, replicate: usize) -> u64 {
    derive(
        base_seed,
        &[Token::Real(cell.delta), cell.p.into(), cell.n.into(), replicate.into()],
    )
}

fn run_replicate<P: Predictor>(
    predictor: &P,
    grid: &GridSpec,
    cell: Cell,
    replicate: usize,
) -> Result<Vec<Record>> {
    let seed = replicate_seed(grid.base_seed, cell, replicate);
    let spec = DataSpec::uniform(cell.n, cell.p, cell.delta, grid.beta_value, grid.noise_var, seed);
    let (train, valid) = generate_pair(&spec)?;
    let opts = ReportOptions { pap_reps: grid.pap_reps, ..Default::default() };
    let set = report_set(predictor, &train, &valid, seed, opts)?;
    Ok(set
        .rows
        .into_iter()
        .map(|r| Record {
            model: grid.model,
            delta: cell.delta,
            p: cell.p,
            n: cell.n,
            replicate,
            variable: r.variable,
            pap_emp: r.pap,
            loco_emp: r.loco,
            c_hat: r.c_hat,
            t_emp: r.t,
            pap_clamped: r.clamped_pap,
            loco_clamped: r.clamped_loco,
            seed,
            valid_mse: set.baseline_mse,
            pap_loss_diff: r.pap_loss_diff,
            loco_loss_diff: r.loco_loss_diff,
            resid_var: set.resid_var,
        })
        .collect())
}

/// All replicates of one cell, ordered by `(replicate, variable)`.
pub fn run_cell(grid: &GridSpec, cell: Cell) -> Result<Vec<Record>> {
    fn go<P: Predictor>(predictor: &P, grid: &GridSpec, cell: Cell) -> Result<Vec<Record>> {
        let per_rep = (0..grid.reps)
            .into_par_iter()
            .map(|r| run_replicate(predictor, grid, cell, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(per_rep.into_iter().flatten().collect())
    }
    match grid.model {
        ModelKind::Linear => go(&Ols::default(), grid, cell),
        ModelKind::Forest => go(&RandomForest { config: grid.forest.clone() }, grid, cell),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub cell: Cell,
    pub error: VimpError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub results: Vec<SimResult>,
    pub records: Vec<Record>,
    pub failures: Vec<CellFailure>,
}

pub fn run_grid(grid: &GridSpec) -> Result<GridOutcome> {
    run_grid_with(grid, |_, _| {})
}

/// Runs every cell; `on_cell` is called as each cell finishes (in any order).
/// A failing cell is reported in `failures` without stopping the others.
pub fn run_grid_with<F>(grid: &GridSpec, on_cell: F) -> Result<GridOutcome>
where
    F: Fn(Cell, &Result<Vec<Record>>) + Sync,
{
    grid.validate()?;
    let outcomes: Vec<(Cell, Result<Vec<Record>>)> = grid
        .cells()
        .into_par_iter()
        .map(|cell| {
            let res = run_cell(grid, cell);
            on_cell(cell, &res);
            (cell, res)
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (cell, res) in outcomes {
        match res {
            Ok(r) => records.extend(r),
            Err(error) => failures.push(CellFailure { cell, error }),
        }
    }
    let results = if records.is_empty() {
        Vec::new()
    } else {
        aggregate(&records, grid.theory_params())?
    };
    Ok(GridOutcome { results, records, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> GridSpec {
        GridSpec {
            deltas: vec![0.0, 0.5],
            ps: vec![3],
            ns: vec![200],
            reps: 5,
            base_seed: 17,
            ..Default::default()
        }
    }

    #[test]
    fn default_grid_shape() {
        let g = GridSpec::default();
        assert!(g.validate().is_ok());
        assert_eq!(g.cells().len(), 200);
        assert_eq!(g.reps, 100);
    }

    #[test]
    fn validation_rejects_bad_grids() {
        let mut g = small_grid();
        g.ns = vec![3];
        assert!(g.validate().is_err());
        g.apply_correction = false;
        assert!(g.validate().is_ok());
        let g = GridSpec { deltas: vec![], ..small_grid() };
        assert!(matches!(g.validate(), Err(VimpError::EmptyInput(_))));
        let g = GridSpec { deltas: vec![1.0], ..small_grid() };
        assert!(g.validate().is_err());
        let g = GridSpec { reps: 0, ..small_grid() };
        assert!(g.validate().is_err());
    }

    #[test]
    fn single_replicate_archive_has_p_rows() {
        let g = GridSpec { deltas: vec![0.3], ps: vec![4], reps: 1, ..small_grid() };
        let out = run_grid(&g).unwrap();
        assert_eq!(out.records.len(), 4);
        assert!(out.failures.is_empty());
        assert_eq!(out.results.iter().map(|r| r.metric).collect::<Vec<_>>(), Metric::ALL.to_vec());
    }

    #[test]
    fn cells_are_independent_of_grid_membership() {
        let full = run_grid(&small_grid()).unwrap();
        let only = run_grid(&GridSpec { deltas: vec![0.5], ..small_grid() }).unwrap();
        let sub: Vec<_> = full.records.iter().filter(|r| r.delta == 0.5).cloned().collect();
        assert_eq!(sub, only.records);
    }

    #[test]
    fn failing_cells_do_not_abort_others() {
        let g = GridSpec { ns: vec![2, 50], apply_correction: false, ..small_grid() };
        let out = run_grid(&g).unwrap();
        assert_eq!(out.failures.len(), 2);
        assert!(out.failures.iter().all(|f| f.cell.n == 2));
        assert_eq!(out.records.len(), 2 * 5 * 3);
    }

    #[test]
    fn schedule_independent() {
        let a = run_grid(&small_grid()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let b = pool.install(|| run_grid(&small_grid()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn forest_cells_run() {
        let g = GridSpec {
            model: ModelKind::Forest,
            deltas: vec![0.3],
            reps: 2,
            forest: ForestConfig { n_trees: 10, ..Default::default() },
            ..small_grid()
        };
        let out = run_grid(&g).unwrap();
        assert_eq!(out.records.len(), 6);
        assert!(out.records.iter().all(|r| r.c_hat.is_none() && r.t_emp.is_none()));
        assert_eq!(out.results.len(), 2);
        let loco = out.results.iter().find(|r| r.metric == Metric::Loco).unwrap();
        assert!(loco.rel_diff_raw.is_none() && loco.abs_diff_raw.is_finite());
    }
}
