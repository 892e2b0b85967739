use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "altmin", version, about = "Alternating proximal minimization: solve, verify, estimate, classify")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the alternating scheme on a catalog problem.
    Solve(SolveArgs),
    /// Check an exponent claim on a grid.
    Verify(VerifyArgs),
    /// Estimate the exponent and multiplier by sampling.
    Estimate(EstimateArgs),
    /// Classify the convergence regime of a trace CSV.
    Classify(ClassifyArgs),
    /// Describe the catalog.
    Catalog(CatalogArgs),
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub problem: String,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    /// Comma-separated coordinates, x block first.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub start: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Stop once the step norm falls to this value.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Trace CSV destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// 1, 2, 4, 5, thm2 or thm3.
    #[arg(long)]
    pub example: String,
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Box half-width around the critical point.
    #[arg(long = "box")]
    pub box_radius: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long = "m-const")]
    pub m_const: Option<f64>,
    /// Coupling weight for thm3.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[arg(long)]
    pub problem: String,
    #[arg(long)]
    pub box_radius: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// `L_ref`; defaults to the value at the reference point.
    #[arg(long, allow_negative_numbers = true)]
    pub reference_value: Option<f64>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Limit value; estimated from the tail when absent.
    #[arg(long, allow_negative_numbers = true)]
    pub reference: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Limit point for iterate distances, comma-separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub limit: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct CatalogArgs {
    #[arg(long)]
    pub list: bool,
}
