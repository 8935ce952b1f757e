use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flr_sim::{compare, config, runner, Method, Overrides, SimError};

#[derive(Parser)]
#[command(name = "flr", version, about = "Federated label-noise simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        /// Configuration file.
        config: PathBuf,
        /// Master seed, replacing the file's.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, replacing the file's.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Method preset, replacing the file's.
        #[arg(long, value_parser = clap::value_parser!(MethodArg))]
        preset: Option<MethodArg>,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Check a configuration and print it fully resolved.
    Validate {
        /// Configuration file.
        config: PathBuf,
    },
    /// Summarize finished runs side by side.
    Compare {
        /// Run directories.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Print CSV instead of a table.
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Clone)]
struct MethodArg(Method);

impl std::str::FromStr for MethodArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(MethodArg)
    }
}

fn read(path: &PathBuf) -> flr_sim::Result<String> {
    fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.clone(),
        source,
    })
}

fn execute(cli: Cli) -> flr_sim::Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            preset,
            resume,
        } => {
            let overrides = Overrides {
                seed,
                preset: preset.map(|p| p.0),
                output_dir: out,
            };
            let cfg = config::parse_with_overrides(&read(&config)?, &overrides)?;
            for w in &cfg.warnings {
                eprintln!("warning: {w}");
            }
            let manifest = runner::run(
                &cfg,
                &runner::RunOptions {
                    resume,
                    stop_after: None,
                },
            )?;
            println!(
                "{}: {} rounds, best test accuracy {:.4}, {:.1}s",
                manifest.output_dir.display(),
                manifest.rounds_completed,
                manifest.best_test_accuracy,
                manifest.duration_secs
            );
        }
        Command::Validate { config } => {
            let cfg = config::parse_and_validate(&read(&config)?)?;
            for w in &cfg.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", cfg.to_toml());
        }
        Command::Compare { dirs, csv } => {
            let rows = compare::compare(&dirs)?;
            if csv {
                print!("{}", compare::render_csv(&rows));
            } else {
                print!("{}", compare::render_text(&rows));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
