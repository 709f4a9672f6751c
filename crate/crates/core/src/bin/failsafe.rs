use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use failsafe_qmig::crypto::RecoverableSignature;
use failsafe_qmig::qmig::{QMigRegistry, TransferIntentSource};
use failsafe_qmig::scenario::{self, run_scenario, Run, RunOptions, Scenario, Service};

#[derive(Parser)]
#[command(name = "failsafe", version, about = "FailSafe and qMig simulation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or bundled scenario and print its report.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Service to switch off; repeatable.
        #[arg(long, value_parser = parse_service)]
        disable: Vec<Service>,
        /// Write the event log here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a transfer intent signature against a registry.
    VerifyIntent {
        /// `fromChainId:fromAddress:destChainId:destAddress`
        #[arg(long)]
        source: TransferIntentSource,
        /// 65-byte r||s||v signature in hex.
        #[arg(long)]
        sig: RecoverableSignature,
        #[arg(long)]
        inflection: u64,
        /// Registry dump file as written by `registry-dump`.
        #[arg(long, conflicts_with = "scenario")]
        registry: Option<PathBuf>,
        /// Take the registry from the final state of a scenario run.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a scenario and print its qMig registry records.
    RegistryDump {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the bundled scenarios.
    ListScenarios,
}

fn parse_service(s: &str) -> Result<Service, String> {
    s.parse()
}

fn load(scenario: &str) -> Result<Scenario, String> {
    let text = match std::fs::read_to_string(scenario) {
        Ok(text) => text,
        Err(_) => scenario::bundled(scenario)
            .ok_or_else(|| format!("{scenario}: no such file or bundled scenario"))?
            .to_string(),
    };
    Scenario::from_toml(&text).map_err(|e| format!("{scenario}: {e}"))
}

fn execute(scenario: &str, seed: Option<u64>, disable: Vec<Service>) -> Result<Run, String> {
    let scenario = load(scenario)?;
    let opts = RunOptions {
        seed,
        disable: disable.into_iter().collect(),
    };
    run_scenario(&scenario, &opts).map_err(|e| e.to_string())
}

/// Writes to stdout; a reader that went away early is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            disable,
            out,
        } => {
            let run = execute(&scenario, seed, disable)?;
            if let Some(path) = out {
                std::fs::write(&path, run.event_log()).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            emit(&run.report.to_string());
            Ok(if run.report.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::VerifyIntent {
            source,
            sig,
            inflection,
            registry,
            scenario,
            seed,
        } => {
            let registry = match (registry, scenario) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                    QMigRegistry::from_dump(&text).map_err(|e| e.to_string())?
                }
                (None, Some(name)) => execute(&name, seed, Vec::new())?.chain.qmig().clone(),
                (None, None) => return Err("one of --registry or --scenario is required".into()),
            };
            match registry.verify_transfer_intent(&source, &sig, inflection) {
                Ok(()) => {
                    emit("true\n");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    emit(&format!("{}: {e}\n", e.code()));
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::RegistryDump { scenario, seed } => {
            let run = execute(&scenario, seed, Vec::new())?;
            emit(&run.chain.qmig().dump());
            Ok(ExitCode::SUCCESS)
        }
        Command::ListScenarios => {
            let mut listing = String::new();
            for (name, text) in scenario::BUNDLED {
                let summary = Scenario::from_toml(text)
                    .map(|s| s.description.lines().next().unwrap_or_default().to_string())
                    .unwrap_or_default();
                listing.push_str(&format!("{name:<32} {summary}\n"));
            }
            emit(&listing);
            Ok(ExitCode::SUCCESS)
        }
    }
}
