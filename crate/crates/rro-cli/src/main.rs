//! Command-line entry point.
//!
//! ```text
//! rro run <config> [--seed N] [--out DIR] [--paper-scale]
//!                  [--experiment NAME] [--epsilon X] [--p-weight X]
//! rro report <run_dir>
//! ```
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 the run finished
//! without meeting its convergence rule (artifacts are still written).

use rro_cli::config::{self, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
usage:
  rro run <config> [--seed N] [--out DIR] [--paper-scale]
                   [--experiment NAME] [--epsilon X] [--p-weight X]
  rro report <run_dir>
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(args: &[String]) -> Result<ExitCode, String> {
    match args.first().map(String::as_str) {
        Some("run") => run_command(&args[1..]),
        Some("report") => report_command(&args[1..]),
        _ => Err(format!("missing or unknown command\n{USAGE}")),
    }
}

fn run_command(args: &[String]) -> Result<ExitCode, String> {
    let mut config_path: Option<PathBuf> = None;
    let mut overrides = Overrides::default();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut value_for = |flag: &str| -> Result<String, String> {
            it.next()
                .cloned()
                .ok_or_else(|| format!("{flag} needs a value\n{USAGE}"))
        };
        match arg.as_str() {
            "--seed" => {
                overrides.seed = Some(
                    value_for("--seed")?
                        .parse()
                        .map_err(|_| "bad --seed".to_string())?,
                )
            }
            "--out" => overrides.out = Some(PathBuf::from(value_for("--out")?)),
            "--paper-scale" => overrides.paper_scale = true,
            "--experiment" => overrides.experiment = Some(value_for("--experiment")?),
            "--epsilon" => {
                overrides.epsilon = Some(
                    config::parse_epsilon(&value_for("--epsilon")?)
                        .map_err(|e| e.to_string())?,
                )
            }
            "--p-weight" => {
                overrides.p_weight = Some(
                    value_for("--p-weight")?
                        .parse()
                        .map_err(|_| "bad --p-weight".to_string())?,
                )
            }
            flag if flag.starts_with("--") => {
                return Err(format!("unknown flag {flag}\n{USAGE}"));
            }
            positional => {
                if config_path.replace(PathBuf::from(positional)).is_some() {
                    return Err(format!("more than one config path given\n{USAGE}"));
                }
            }
        }
    }
    let config_path = config_path.ok_or_else(|| format!("missing config path\n{USAGE}"))?;
    let cfg = config::load(&config_path, &overrides).map_err(|e| e.to_string())?;

    match rro_cli::experiments::run(&cfg) {
        Ok(outcome) => {
            println!(
                "{} run complete (converged: {}); artifacts in {}",
                cfg.kind.name(),
                outcome.converged,
                cfg.output_dir.display()
            );
            if outcome.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            Ok(ExitCode::FAILURE)
        }
    }
}

fn report_command(args: &[String]) -> Result<ExitCode, String> {
    let [dir] = args else {
        return Err(format!("report takes exactly one run directory\n{USAGE}"));
    };
    let text = rro_cli::report::report(&PathBuf::from(dir)).map_err(|e| e.to_string())?;
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}
