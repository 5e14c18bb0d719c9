use std::path::PathBuf;
use std::process::ExitCode;

use barycenter::Execution;
use barycenter_cli::config::Format;
use barycenter_cli::error::CliError;
use barycenter_cli::registry::Registry;
use barycenter_cli::run::{cmd_run, RunOptions};
use barycenter_cli::shift::shift_box;
use barycenter_cli::validate::{run_all, run_suite, table_header, Check};
use clap::{Parser, Subcommand};

/// Derivative-free minimization with exponentially weighted barycenters.
#[derive(Parser)]
#[command(name = "barycenter", version)]
struct Cli {
    /// Overrides the seed of the config or of every validation check.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (run) or report file (validate).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Evaluate on the current thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// Run validation suites and print predicted vs empirical values.
    Validate {
        /// Suite name, or "all".
        #[arg(default_value = "all")]
        suite: String,
        /// Registry of seeds and tolerances (defaults to the built-in one).
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Print the translation that makes a search box nonnegative.
    ShiftBox {
        #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
        min: Vec<f64>,
        #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
        max: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Run { config } => {
            let opts = RunOptions {
                seed: cli.seed,
                out: cli.out,
                format: cli.format,
                exec,
            };
            let summary = cmd_run(&config, &opts)?;
            for r in &summary.repetitions {
                println!(
                    "rep {:>3} seed {:>6} queries {:>6} best {:.6e} readout {:?}{}",
                    r.repetition,
                    r.seed,
                    r.total_queries,
                    r.best_value,
                    r.final_readout,
                    if r.degenerate { " DEGENERATE" } else { "" }
                );
            }
            if let Some(rate) = summary.success_rate {
                println!("success rate {rate:.3}");
            }
            println!("wrote {} files", summary.files.len());
            Ok(())
        }
        Command::Validate { suite, registry } => {
            let mut reg = match registry {
                Some(path) => Registry::load(&path)?,
                None => Registry::builtin(),
            };
            if let Some(seed) = cli.seed {
                reg = reg.with_seed(seed);
            }
            let checks = if suite == "all" {
                run_all(&reg, exec)?
            } else {
                run_suite(&suite, &reg, exec)?
            };
            report(&checks, cli.format.unwrap_or_default(), cli.out.as_deref())?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                Err(CliError::ValidationFailed(failed))
            } else {
                Ok(())
            }
        }
        Command::ShiftBox { min, max } => {
            let s = shift_box(&min, &max)?;
            println!("offset      {:?}", s.offset);
            println!("shifted min {:?}", s.shifted_min);
            println!("shifted max {:?}", s.shifted_max);
            Ok(())
        }
    }
}

fn report(checks: &[Check], format: Format, out: Option<&std::path::Path>) -> Result<(), CliError> {
    let text = match format {
        Format::Csv => {
            let mut t = table_header();
            for c in checks {
                t.push('\n');
                t.push_str(&c.to_string());
            }
            t.push('\n');
            t
        }
        Format::Json => {
            serde_json::to_string_pretty(checks).map_err(|e| CliError::Config(e.to_string()))? + "\n"
        }
    };
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, &text)?;
    }
    Ok(())
}
