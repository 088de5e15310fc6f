use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "condmode",
    version,
    about = "Kernel regression by conditional mode search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Fit a joint kernel model to a dataset.
    Fit(FitArgs),
    /// Predict outputs for input queries.
    Predict(PredictArgs),
    /// Locate the mode of a mixture file.
    Mode(ModeArgs),
    /// Run a mode vs. conditional-mean comparison.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Sine,
    Ambiguous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mode,
    Nw,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub kind: Experiment,
    #[arg(long)]
    pub n: usize,
    /// Noise level (sine only, default 0.2).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// One value for every axis, or dx+dy values.
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "loo_grid",
        required_unless_present = "loo_grid"
    )]
    pub bandwidth: Option<Vec<f64>>,
    /// Isotropic candidates for leave-one-out selection.
    #[arg(long, value_delimiter = ',')]
    pub loo_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Mode)]
    pub method: Method,
    /// Query input as comma-separated components; repeat for more queries.
    #[arg(
        long = "x",
        allow_hyphen_values = true,
        conflicts_with = "queries",
        required_unless_present = "queries"
    )]
    pub x: Vec<String>,
    /// CSV of queries with header x1..x<dx>.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_refine: bool,
    /// Relative weight below which conditional kernels are dropped.
    #[arg(long, default_value_t = 1e-12)]
    pub prune: f64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModeArgs {
    #[arg(long)]
    pub mixture: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent searches, each with a seed derived from `--seed`.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    pub kind: Experiment,
    #[arg(long)]
    pub n: Option<usize>,
    /// Joint bandwidth `s_x,s_y`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub bandwidth: Option<Vec<f64>>,
    #[arg(long)]
    pub q: Option<usize>,
    /// Noise level (sine only).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub search_seed: Option<u64>,
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long)]
    pub no_refine: bool,
    /// Also write the generated training data.
    #[arg(long)]
    pub write_data: bool,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}
