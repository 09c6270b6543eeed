use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semnet::pipeline::{self, Overrides, PipelineError, Run};

/// Multilayer semantic networks: construction, reducibility and bias measurement.
#[derive(Parser)]
#[command(name = "semnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true, default_value = "semnet.json")]
    config: PathBuf,
    /// Output directory, replacing `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the quadrature probes, replacing `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest aligned layer size that gets a dense eigensolve.
    #[arg(long, global = true)]
    exact_eigen_max: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Parse the inputs and write the three graph layers per agent.
    Build,
    /// Network statistics of the built layers.
    Stats,
    /// Structural reducibility per agent.
    Reduce,
    /// Raw activation matrices for every layer.
    Spread,
    /// Effect sizes, heatmaps and effect plots.
    Bias,
    /// Redraw figures from existing outputs.
    Render,
}

fn execute(cli: &Cli) -> Result<pipeline::CommandOutput, PipelineError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| PipelineError::Validation(format!("--threads: {e}")))?;
    }
    let overrides = Overrides { output_dir: cli.out.clone(), seed: cli.seed, exact_eigen_max: cli.exact_eigen_max };
    let run = Run::load(&cli.config, &overrides)?;
    match cli.command {
        Command::Build => pipeline::cmd_build(&run),
        Command::Stats => pipeline::cmd_stats(&run),
        Command::Reduce => pipeline::cmd_reduce(&run),
        Command::Spread => pipeline::cmd_spread(&run),
        Command::Bias => pipeline::cmd_bias(&run),
        Command::Render => pipeline::cmd_render(&run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(out) => {
            print!("{}", out.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("semnet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
