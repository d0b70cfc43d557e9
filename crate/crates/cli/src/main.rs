//! `qme` command-line runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qme::scenario::{bundled_scenarios, parse_with_overrides, resolve_out_dir, run};

#[derive(Parser)]
#[command(name = "qme", version, about = "Run master-equation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario file and write states.csv, diagnostics.csv and summary.json.
    Run {
        /// Scenario JSON file, or the name of a bundled scenario.
        scenario: PathBuf,
        /// Dot-path override such as `dt=1e-4` or `rates.0.w=2`; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (default: $QME_OUT_DIR/<name>, else out/<name>).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// List bundled scenarios.
    List,
    /// Print a bundled scenario.
    Show { name: String },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            overrides,
            out_dir,
            quiet,
        } => {
            let outcome = parse_with_overrides(&scenario, &overrides).and_then(|s| {
                let dir = resolve_out_dir(out_dir.as_deref(), &s.name);
                run(&s, &dir)
            });
            match outcome {
                Ok(outcome) => {
                    let s = &outcome.summary;
                    if !quiet {
                        println!(
                            "{}: {} snapshots to t = {}, min eigenvalue {:.6e} (final {:.6e}), {} violation(s), written to {}",
                            s.name,
                            s.snapshots,
                            s.t_final,
                            s.min_eig_overall,
                            s.min_eig_final,
                            s.violations.len(),
                            outcome.out_dir.display()
                        );
                    }
                    if s.unexpected_violations {
                        eprintln!("error: density-matrix bounds violated; see summary.json");
                    }
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::List => {
            for (name, _) in bundled_scenarios() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Show { name } => match qme::scenario::bundled(&name) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: no bundled scenario named {name:?}");
                ExitCode::from(1)
            }
        },
    }
}
