use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod kernel_arg;

/// Exponential moments of Markov chain local times.
#[derive(Parser, Debug)]
#[command(name = "loctime", version, about)]
struct Cli {
    /// Cap on worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct KernelOpts {
    /// Kernel: `family:key=value,...`, `ctmc:file=PATH`, `tabulated:file=PATH`,
    /// `difference-walk:d=D,radius=R`, inline JSON or a JSON file path.
    #[arg(long)]
    pub kernel: String,
    /// Boundary of the truncated difference walk.
    #[arg(long, default_value = "reflecting", value_parser = ["reflecting", "absorbing"])]
    pub boundary: String,
}

#[derive(Args, Debug, Clone)]
pub struct OutOpts {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the renewal equation to a target relative error.
    Solve(SolveArgs),
    /// Classify the regime of gamma and report its asymptotic law.
    Asymptotics(AsymptoticsArgs),
    /// Growth rate r(gamma) along a grid of gammas.
    RateCurve(RateCurveArgs),
    /// Compare the solver against Monte Carlo simulation.
    Verify(VerifyArgs),
    /// Growth rate of the simple random walk from the torus integral.
    TorusRate(TorusArgs),
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub horizon: f64,
    /// Initial step (defaults to horizon/100).
    #[arg(long)]
    pub step: Option<f64>,
    /// Target relative error for step refinement.
    #[arg(long, default_value_t = 1e-6)]
    pub target: f64,
    #[command(flatten)]
    pub out: OutOpts,
}

#[derive(Args, Debug)]
pub struct AsymptoticsArgs {
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[arg(long)]
    pub gamma: f64,
    /// Also solve up to this horizon and report Z(t) against the prediction.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Step for the comparison solve (defaults to horizon/1000).
    #[arg(long)]
    pub step: Option<f64>,
    #[command(flatten)]
    pub out: OutOpts,
}

#[derive(Args, Debug)]
pub struct RateCurveArgs {
    #[command(flatten)]
    pub kernel: KernelOpts,
    /// Comma-separated, strictly increasing gammas.
    #[arg(long, value_delimiter = ',', required = true)]
    pub gammas: Vec<f64>,
    #[command(flatten)]
    pub out: OutOpts,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[arg(long)]
    pub gamma: f64,
    /// Comma-separated, increasing horizons on the solver grid.
    #[arg(long, value_delimiter = ',', required = true)]
    pub horizons: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Gamma handed to the solver (defaults to --gamma); differs only for
    /// negative controls.
    #[arg(long)]
    pub solver_gamma: Option<f64>,
    #[command(flatten)]
    pub out: OutOpts,
}

#[derive(Args, Debug)]
pub struct TorusArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=3))]
    pub dim: u64,
    /// Comma-separated gammas.
    #[arg(long, value_delimiter = ',', required = true)]
    pub gamma: Vec<f64>,
    /// Per-neighbour jump rate (defaults to 1/dim).
    #[arg(long)]
    pub jump_rate: Option<f64>,
    #[command(flatten)]
    pub out: OutOpts,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Asymptotics(a) => commands::asymptotics(a),
        Command::RateCurve(a) => commands::rate_curve(a),
        Command::Verify(a) => commands::verify(a),
        Command::TorusRate(a) => commands::torus_rate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
