use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use v2sim::scenario::{load_scenario, run_scenario, RunOptions};
use v2sim::Error;

#[derive(Parser)]
#[command(
    name = "v2sim",
    version,
    about = "Scenario runner for the V2 / Schottky-junction simulation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its CSV files and manifest.json.
    Run {
        config: PathBuf,
        /// Output directory (default: $V2SIM_OUT_DIR/<name>, else ./out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Parse and validate a scenario without running it.
    Validate { config: PathBuf },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error[{}]: {e}", e.category().label());
    ExitCode::from(e.category().exit_code() as u8)
}

fn main() -> ExitCode {
    // clap exits with status 2 on unknown subcommands or bad flags.
    let cli = Cli::parse();
    match cli.command {
        Cmd::Validate { config } => match load_scenario(&config) {
            Ok((s, _)) => {
                println!("{}: ok ({})", s.name, s.command);
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Cmd::Run {
            config,
            out,
            seed,
            jobs,
        } => {
            let opts = RunOptions {
                out_dir: out,
                seed,
                jobs,
            };
            match run_scenario(&config, &opts) {
                Ok(report) => {
                    for f in &report.manifest.files {
                        println!("{} ({} rows)", f.path, f.rows);
                    }
                    for (k, cat, msg) in &report.failures {
                        eprintln!("error[{}]: sweep point {k}: {msg}", cat.label());
                    }
                    println!(
                        "wrote {} files to {} in {:.2} s",
                        report.manifest.files.len(),
                        report.out_dir.display(),
                        report.manifest.wall_clock_s
                    );
                    ExitCode::from(report.exit_code() as u8)
                }
                Err(e) => fail(&e),
            }
        }
    }
}
