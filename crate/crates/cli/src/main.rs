use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use syncnet_cli::runner::{run_file, run_scenario, RunOptions, RunOutcome, EXIT_INPUT};
use syncnet_cli::{builtin, runner};

/// Synchronization experiments for networks of identical linear systems
/// over time-varying directed communication graphs.
#[derive(Parser)]
#[command(name = "syncnet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios (built-in names or TOML files).
    Run {
        /// Built-in scenario names or paths to scenario files.
        #[arg(required = true)]
        inputs: Vec<String>,
        /// Output directory for trace and summary files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the integration step / sample period.
        #[arg(long)]
        step: Option<f64>,
        /// Override the initial-condition seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run scenarios in up to this many parallel workers.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List the built-in scenarios.
    List,
    /// Print a built-in scenario as a reusable TOML document.
    Describe {
        /// Built-in scenario name.
        name: String,
    },
}

fn run_one(input: &str, options: &RunOptions) -> RunOutcome {
    match builtin::builtin(input) {
        Some(scenario) => run_scenario(&scenario, options),
        None => run_file(Path::new(input), options),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { inputs, out, step, seed, jobs } => {
            let options = RunOptions {
                out_dir: out,
                step_override: step,
                seed_override: seed,
                write_outputs: true,
            };
            let jobs = jobs.max(1).min(inputs.len().max(1));
            let outcomes: Vec<RunOutcome> = if jobs <= 1 {
                inputs.iter().map(|input| run_one(input, &options)).collect()
            } else {
                // Static round-robin split keeps the output order stable.
                std::thread::scope(|scope| {
                    let handles: Vec<_> = (0..jobs)
                        .map(|w| {
                            let inputs = &inputs;
                            let options = &options;
                            scope.spawn(move || {
                                inputs
                                    .iter()
                                    .enumerate()
                                    .filter(|(i, _)| i % jobs == w)
                                    .map(|(i, input)| (i, run_one(input, options)))
                                    .collect::<Vec<_>>()
                            })
                        })
                        .collect();
                    let mut indexed: Vec<(usize, RunOutcome)> = handles
                        .into_iter()
                        .flat_map(|h| h.join().expect("worker panicked"))
                        .collect();
                    indexed.sort_by_key(|(i, _)| *i);
                    indexed.into_iter().map(|(_, o)| o).collect()
                })
            };
            let mut worst = 0;
            for outcome in &outcomes {
                println!("{}", outcome.headline);
                worst = worst.max(outcome.exit_code);
            }
            worst
        }
        Command::List => {
            print!("{}", builtin::catalog());
            runner::EXIT_OK
        }
        Command::Describe { name } => match builtin::describe(&name) {
            Some(text) => {
                print!("{text}");
                runner::EXIT_OK
            }
            None => {
                eprintln!(
                    "unknown scenario '{name}'; built-ins: {}",
                    builtin::BUILTIN_NAMES.join(", ")
                );
                EXIT_INPUT
            }
        },
    };
    std::process::exit(code);
}
