use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vessiot_kit::commands::{
    self, run_check, run_classify, run_integrate, run_invman, run_portrait,
};

/// Geometric analysis of implicit ordinary differential equations:
/// singularity classification, generalized solutions, invariant-manifold
/// models, and streamline portraits.
#[derive(Parser)]
#[command(name = "vessiot-kit", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run-configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pseudo-random seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-path config override, e.g. `portrait.placement.d_sep=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Report the shape of an equation file and whether it is quasi-linear.
    Check(Common),
    /// Classify every node of a grid in the jet chart (CSV output).
    Classify(Common),
    /// Trace one generalized solution (JSONL/CSV, optional SVG).
    Integrate(Common),
    /// Taylor model of an invariant manifold at a stationary point.
    Invman(Common),
    /// Evenly-spaced streamline portrait (2d, 2.5d, or 3d).
    Portrait(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&commands::Ctx) -> _) = match &cli.command {
        Command::Check(c) => (c, run_check),
        Command::Classify(c) => (c, run_classify),
        Command::Integrate(c) => (c, run_integrate),
        Command::Invman(c) => (c, run_invman),
        Command::Portrait(c) => (c, run_portrait),
    };
    let result = commands::load_ctx(
        &common.config,
        common.out.as_deref(),
        common.seed,
        &common.sets,
    )
    .and_then(|ctx| run(&ctx));
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
