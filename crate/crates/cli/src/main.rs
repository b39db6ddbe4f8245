use std::path::PathBuf;
use std::process::ExitCode;

use bdglab_cli::config::{Axis, ExperimentConfig};
use bdglab_cli::{exit_status, run, sweep, RunError, RunOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bdglab", version, about = "Bulk, boundary and transport numerics for BdG lattice models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Worker threads for task and seed parallelism.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Offset added to every disorder seed.
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a configuration.
    Run(Common),
    /// Repeat a run over the values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// mu, amplitude, w, delta, beta, t_over_gap or width.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, axis) = match cli.command {
        Command::Run(c) => (c, None),
        Command::Sweep { common, axis, values } => (common, Some((axis, values))),
    };
    let result = ExperimentConfig::load(&common.config).map_err(RunError::from).and_then(|cfg| {
        let opts = RunOptions {
            workers: common.workers,
            out: common.out.clone(),
            seed_base: common.seed_base,
        };
        match axis {
            None => run(&cfg, &opts),
            Some((name, values)) => {
                let axis: Axis = name.parse()?;
                sweep(&cfg, axis, &values, &opts)
            }
        }
    });
    match result {
        Ok(records) => {
            for r in &records {
                let verdict = match (&r.error, r.pass) {
                    (Some(e), _) => format!("ERROR {e}"),
                    (None, Some(true)) => "PASS".into(),
                    (None, Some(false)) => "FAIL".into(),
                    (None, None) => "DONE".into(),
                };
                let seed = r.seed.map(|s| format!(" seed {s}")).unwrap_or_default();
                println!("{}{seed}: {verdict} ({:.2} s)", r.task, r.wall_time_s);
            }
            ExitCode::from(exit_status(&records) as u8)
        }
        Err(e @ RunError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
