use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparpde_cli::commands::{self, Outcome};

/// Sparse polynomial expansions of parametric elliptic diffusion problems:
/// coefficient engines, dof allocation and convergence-rate experiments.
#[derive(Parser)]
#[command(name = "sparpde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the seed recorded in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent sweep points.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Exit 3 when the configured rate tolerances fail.
    #[arg(long, default_value_t = false)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Taylor expansion with summability diagnostics.
    Taylor(CommonArgs),
    /// Jacobi/Legendre/Chebyshev expansion of an affine model.
    Jacobi(CommonArgs),
    /// Hermite expansion of a lognormal model.
    Hermite(CommonArgs),
    /// Best-n selection and dof allocation plan.
    Allocate(CommonArgs),
    /// Fully discrete error-versus-dofs sweep.
    Sweep(CommonArgs),
    /// Joint space-parameter best-N selection sweep.
    Joint(CommonArgs),
    /// Pure rate arithmetic (no config needed).
    Rates {
        /// "sup" or "l2".
        #[arg(long)]
        setting: Option<String>,
        /// Parametric rate; alternative to --p-v.
        #[arg(long)]
        s: Option<f64>,
        /// Spatial rate.
        #[arg(long)]
        t: Option<f64>,
        /// Summability exponent of the X-norms.
        #[arg(long)]
        p_x: Option<f64>,
        /// Summability exponent of the V-norms.
        #[arg(long)]
        p_v: Option<f64>,
        /// Wavelet amplitude-decay exponent.
        #[arg(long)]
        wavelet_alpha: Option<f64>,
        /// Spatial dimension for the wavelet rates.
        #[arg(long, default_value_t = 1)]
        m: u32,
        /// "linear" or "nonlinear" spatial approximation.
        #[arg(long, default_value = "linear")]
        mode: String,
    },
}

fn run_with_config(
    args: &CommonArgs,
    f: impl Fn(&commands::RunContext) -> Result<Outcome, sparpde_cli::CliError>,
) -> ExitCode {
    let ctx = match commands::load_context(
        &args.config,
        args.out.clone(),
        args.seed,
        args.threads,
        args.check,
    ) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match f(&ctx) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed(details)) => {
            eprintln!("check failed: {details}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Taylor(args) => run_with_config(args, commands::run_taylor),
        Command::Jacobi(args) => run_with_config(args, |ctx| commands::run_ortho(ctx, false)),
        Command::Hermite(args) => run_with_config(args, |ctx| commands::run_ortho(ctx, true)),
        Command::Allocate(args) => run_with_config(args, commands::run_allocate),
        Command::Sweep(args) => run_with_config(args, commands::run_sweep),
        Command::Joint(args) => run_with_config(args, commands::run_joint),
        Command::Rates {
            setting,
            s,
            t,
            p_x,
            p_v,
            wavelet_alpha,
            m,
            mode,
        } => match commands::run_rates(
            setting.as_deref(),
            *s,
            *t,
            *p_x,
            *p_v,
            *wavelet_alpha,
            *m,
            mode,
        ) {
            Ok(json) => {
                println!("{json}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
