use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "bartgp", version, about = "BART prior correlation kernel and Gaussian-process regression")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Write the main output to this file instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the correlation between two points (or from split counts).
    Kernel(KernelArgs),
    /// Sections of the reference kernel along the diagonal of the unit cube, as CSV.
    Plotcov(PlotcovArgs),
    /// Correlation or covariance matrix of the rows of a CSV file.
    Matrix(MatrixArgs),
    /// Compare the kernel with the sample covariance of prior draws of sum-of-trees functions.
    CheckPrior(CheckPriorArgs),
    /// Bound widths and error bounds over quasi-random location pairs, as CSV.
    Accuracy(AccuracyArgs),
    /// Fit the GP hyperparameters on the training split of a CSV file.
    Fit(FitArgs),
    /// Posterior predictions from a fitted model.
    Predict(PredictArgs),
    /// Write a synthetic Friedman-style regression dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Exact,
    Reference,
    Truncated,
    Pseudo,
    Depth1,
    Depth2,
    Laplace,
    ShiftedLaplace,
    Power,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Force a split at the root (P₀ = 1).
    #[arg(long)]
    pub p0_one: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KernelArgs {
    #[command(flatten)]
    pub schedule: ScheduleArgs,

    /// Per-axis counts `below,between,above`; repeat the flag or separate axes with `;`.
    #[arg(long)]
    pub counts: Vec<String>,

    /// First point, comma separated; cutpoints are the uniform grid set by `--splits`.
    #[arg(long)]
    pub x: Option<String>,

    /// Second point, comma separated.
    #[arg(long)]
    pub x2: Option<String>,

    /// Evaluate at two coincident points.
    #[arg(long)]
    pub same_point: bool,

    /// Evenly spaced cutpoints per axis inside (0, 1) for point input.
    #[arg(long, default_value_t = 10)]
    pub splits: usize,

    /// Split-variable weights, comma separated; uniform when omitted.
    #[arg(long)]
    pub weights: Option<String>,

    #[arg(long, value_enum, value_delimiter = ',', default_value = "reference")]
    pub variant: Vec<Variant>,

    /// Truncation depth for `truncated`.
    #[arg(long, default_value_t = 2)]
    pub depth: usize,

    /// Value-at-truncation interpolation for `truncated`, `pseudo`, `depth1`, `depth2`.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,

    /// First reset depth for `pseudo` and `--bounds`.
    #[arg(long = "D0", default_value_t = 2)]
    pub d0: usize,

    /// Number of resets for `pseudo` and `--bounds`.
    #[arg(long, default_value_t = 5)]
    pub r: usize,

    /// Explicit reset depths for `pseudo`, comma separated (overrides --D0/--r).
    #[arg(long)]
    pub resets: Option<String>,

    /// Also report the lower/upper bound pair at (--D0, --r).
    #[arg(long)]
    pub bounds: bool,

    /// Cap on recursive calls for `exact`; exceeding it exits with code 3.
    #[arg(long, default_value_t = 10_000_000)]
    pub budget: u64,

    /// Scale of the Laplace kernels.
    #[arg(long, default_value_t = 3.2)]
    pub eta: f64,

    /// Exponent of the power kernel.
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,

    /// Print a JSON report even for a single value.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlotcovArgs {
    #[command(flatten)]
    pub schedule: ScheduleArgs,

    /// Evenly spaced cutpoints per axis inside (0, 1).
    #[arg(long, default_value_t = 100)]
    pub splits: usize,

    /// Dimensions; one section per value.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub p: Vec<usize>,

    /// Points along each section, including both ends.
    #[arg(long, default_value_t = 101)]
    pub points: usize,

    /// Scale of the shifted Laplace column (its `alpha` is the kernel's).
    #[arg(long, default_value_t = 3.2)]
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// Midpoints between consecutive distinct values of each column.
    Midpoints,
    /// `--splits` evenly spaced cutpoints inside each column's range.
    Uniform,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub schedule: ScheduleArgs,

    /// CSV with a header; every column is a coordinate.
    #[arg(long)]
    pub input: PathBuf,

    /// Optional second CSV for a cross matrix (grid still built from `--input`).
    #[arg(long)]
    pub input2: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "midpoints")]
    pub grid: GridKind,

    #[arg(long, default_value_t = 10)]
    pub splits: usize,

    /// Multiply by this prior variance.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckPriorArgs {
    #[command(flatten)]
    pub schedule: ScheduleArgs,

    /// Random points in the unit cube (ignored with `--input`).
    #[arg(long, default_value_t = 20)]
    pub n_points: usize,

    #[arg(long, default_value_t = 2)]
    pub p: usize,

    /// CSV of points to use instead of random ones.
    #[arg(long)]
    pub input: Option<PathBuf>,

    #[arg(long, default_value_t = 10)]
    pub splits: usize,

    /// Trees per prior draw.
    #[arg(long, default_value_t = 200)]
    pub trees: usize,

    /// Prior draws.
    #[arg(long, default_value_t = 50_000)]
    pub samples: usize,

    /// Family-wise level of the covariance test.
    #[arg(long, default_value_t = 0.01)]
    pub level: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AccuracyArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.95")]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub betas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,10")]
    pub ps: Vec<usize>,
    #[arg(long = "D0s", value_delimiter = ',', default_value = "2")]
    pub d0s: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,5")]
    pub rs: Vec<usize>,
    #[arg(long, default_value_t = 250)]
    pub pairs: usize,
    #[arg(long, default_value_t = 10)]
    pub splits: usize,
    /// Recursive-call cap per bound; pairs over it are skipped and counted.
    #[arg(long, default_value_t = 200_000_000)]
    pub budget: u64,
    /// Do not exit 1 when the error-bound gates fail.
    #[arg(long)]
    pub no_gate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    None,
    Log,
    Sqrt,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,

    /// Outcome column.
    #[arg(long, default_value = "y")]
    pub target: String,

    /// Outcome transform applied before standardization.
    #[arg(long, value_enum, default_value = "none")]
    pub transform: Transform,

    /// Keep the outcome on its own scale instead of standardizing it.
    #[arg(long)]
    pub no_standardize: bool,

    /// Train rows per test row.
    #[arg(long, default_value_t = 5.0)]
    pub train_ratio: f64,

    /// Degrees of freedom of the noise prior.
    #[arg(long, default_value_t = 3.0)]
    pub nu: f64,

    /// Prior probability that σ is below the least-squares estimate.
    #[arg(long, default_value_t = 0.9)]
    pub q: f64,

    /// Keep α and β at their starting values.
    #[arg(long)]
    pub no_tune_kernel: bool,

    /// Keep k at its starting value.
    #[arg(long)]
    pub no_tune_k: bool,

    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub k: f64,

    /// Force a split at the root (P₀ = 1).
    #[arg(long)]
    pub p0_one: bool,

    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,

    /// Where to write the fitted model (JSON).
    #[arg(long)]
    pub model_out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rows {
    /// The held-out rows of the split recorded at fit time.
    Test,
    /// Every row of `--data`.
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    /// Model written by `fit`.
    #[arg(long)]
    pub model: PathBuf,

    /// CSV to predict on; defaults to the file the model was fitted on.
    #[arg(long)]
    pub data: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "test")]
    pub rows: Rows,

    /// Posterior draws of σ².
    #[arg(long, default_value_t = 1000)]
    pub sigma_draws: usize,

    /// Function draws per σ² draw.
    #[arg(long, default_value_t = 20)]
    pub f_draws: usize,

    /// Per-row predictions CSV.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 240)]
    pub n: usize,

    /// Numeric predictors; only the first five enter the mean.
    #[arg(long, default_value_t = 6)]
    pub p: usize,

    /// Standard deviation of the Gaussian noise.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,

    /// Add a three-level categorical predictor with an additive effect.
    #[arg(long)]
    pub categorical: bool,
}
