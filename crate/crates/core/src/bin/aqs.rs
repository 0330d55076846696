use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use aqs_core::cli::{load_config, run_scenario, summary_json, ScenarioConfig, EXIT_ERROR};

/// Run AQS scenarios and write their transcripts.
#[derive(Parser, Debug)]
#[command(name = "aqs", version)]
struct Args {
    /// Key=value config file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// entangled or plain
    #[arg(long)]
    scheme: Option<String>,
    /// Message length N in qubits.
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// none, swap or transfer
    #[arg(long)]
    attack: Option<String>,
    /// Comma-separated countermeasures: bind_receiver_id, announce_metadata,
    /// preregister_receiver (or 1,2,3, all, none).
    #[arg(long)]
    harden: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Transcript path; the summary goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// accept, attack_succeeds, attack_prevented or attack_attributed
    #[arg(long)]
    expect: Option<String>,
}

fn config(args: &Args) -> aqs_core::Result<ScenarioConfig> {
    let mut pairs = match &args.config {
        Some(path) => load_config(path)?,
        None => Vec::new(),
    };
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    flag("scheme", args.scheme.clone());
    flag("n_qubits", args.qubits.map(|n| n.to_string()));
    flag("seed", args.seed.map(|s| s.to_string()));
    flag("attack", args.attack.clone());
    flag("countermeasures", args.harden.clone());
    flag("trials", args.trials.map(|t| t.to_string()));
    flag("out", args.out.as_ref().map(|p| p.display().to_string()));
    flag("expect", args.expect.clone());
    ScenarioConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = config(&args).and_then(|cfg| run_scenario(&cfg));
    match result {
        Ok(summary) => {
            println!("{}", summary_json(&summary));
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("aqs: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
