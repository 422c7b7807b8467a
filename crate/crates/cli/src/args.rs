use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vimp_core::simlab::ModelKind;

#[derive(Debug, Parser)]
#[command(name = "vimp", version, about = "Permute-and-predict and LOCO importance under collinearity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the closed-form identities on the default grid plus a random sweep.
    Verify(VerifyArgs),
    /// Run the Monte Carlo grid and write raw, aggregate and parity CSVs.
    Simulate(SimulateArgs),
    /// Render SVG figures from simulate output.
    Figures(FiguresArgs),
    /// Compute importances for a dataset CSV with columns x1..xp,y.
    Report(ReportArgs),
    /// Write a simulated train/validation pair as dataset CSVs.
    Generate(GenerateArgs),
}

/// Comma-separated, non-empty list of values.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let items: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
        if items.is_empty() {
            return Err("list is empty".into());
        }
        items
            .into_iter()
            .map(|t| t.parse::<T>().map_err(|_| format!("cannot parse '{t}'")))
            .collect::<Result<Vec<T>, String>>()
            .map(List)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Linear,
    Forest,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Linear => ModelKind::Linear,
            ModelArg::Forest => ModelKind::Forest,
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Collinearity levels (default 0,0.11,...,0.99).
    #[arg(long)]
    pub deltas: Option<List<f64>>,
    /// Predictor counts (default 3,6,9,12).
    #[arg(long)]
    pub ps: Option<List<usize>>,
    /// Sample sizes (default 20,63,200,632,2000).
    #[arg(long)]
    pub ns: Option<List<usize>>,
    /// Number of extra random (delta, p, n) points.
    #[arg(long, default_value_t = 1000)]
    pub sweep: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shift applied to the absorption coefficient before the identity check.
    #[arg(long, hide = true)]
    pub perturb_c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long)]
    pub deltas: Option<List<f64>>,
    #[arg(long)]
    pub ps: Option<List<usize>>,
    #[arg(long)]
    pub ns: Option<List<usize>>,
    /// Monte Carlo replicates per cell.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Common coefficient value.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub noise_var: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default ./out/<timestamp>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compare against uncorrected theory in the aggregate differences.
    #[arg(long)]
    pub no_correction: bool,
    /// Validation permutations averaged per PaP value.
    #[arg(long)]
    pub pap_reps: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long)]
    pub min_node: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Suppress per-cell progress lines.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ErrorBars {
    /// Two standard errors of the cell mean.
    Se,
    /// Two standard deviations of the pooled values.
    Sd,
}

#[derive(Debug, Args)]
pub struct FiguresArgs {
    /// Simulate output directories or individual aggregate/parity CSV files.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ErrorBars::Se)]
    pub error_bars: ErrorBars,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Training data; without --valid its rows are split in half.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelArg::Linear)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit the linear model through the origin.
    #[arg(long)]
    pub no_intercept: bool,
    #[arg(long, default_value_t = 1)]
    pub pap_reps: usize,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise_var: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving train.csv and valid.csv.
    #[arg(long)]
    pub out: PathBuf,
}
