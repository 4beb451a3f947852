use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use swarmsim::config::{apply_settings, load_settings, Settings};
use swarmsim::harness::{self, ExperimentConfig};

/// Sweep the outgoing-connection limit for the tracker and preemption
/// strategies and write per-run metrics, aggregates and edge lists.
#[derive(Parser, Debug)]
#[command(name = "swarmsim", version)]
struct Args {
    /// key=value file with the same keys as the long flags.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// tracker | preemption | both
    #[arg(long)]
    strategy: Option<String>,
    /// Comma list or inclusive start:stop:step.
    #[arg(long)]
    omax: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    max_peer_set: Option<String>,
    /// Peer-set size below which a peer re-announces.
    #[arg(long)]
    min_neighbors: Option<String>,
    #[arg(long)]
    response_size: Option<String>,
    /// Minutes.
    #[arg(long)]
    min_request_interval: Option<String>,
    /// Comma list of minutes.
    #[arg(long)]
    snapshot_times: Option<String>,
    /// Minutes.
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    jobs: Option<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Fraction of the peer set that may hold preempted-in connections.
    #[arg(long)]
    preemption_cap: Option<String>,
    /// Chained preemptions allowed through drop recovery, or "none".
    #[arg(long)]
    cascade_depth: Option<String>,
    #[arg(long)]
    ungraceful_leaves: bool,
}

impl Args {
    fn settings(&self) -> Settings {
        let flags = [
            ("strategy", &self.strategy),
            ("omax", &self.omax),
            ("runs", &self.runs),
            ("max-peer-set", &self.max_peer_set),
            ("min-neighbors", &self.min_neighbors),
            ("response-size", &self.response_size),
            ("min-request-interval", &self.min_request_interval),
            ("snapshot-times", &self.snapshot_times),
            ("horizon", &self.horizon),
            ("seed", &self.seed),
            ("jobs", &self.jobs),
            ("out", &self.out),
            ("preemption-cap", &self.preemption_cap),
            ("cascade-depth", &self.cascade_depth),
        ];
        let mut s: Settings = flags
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        if self.ungraceful_leaves {
            s.insert("ungraceful-leaves".into(), "true".into());
        }
        s
    }
}

fn run(args: Args) -> swarmsim::Result<()> {
    let mut settings = match &args.config {
        Some(path) => load_settings(path)?,
        None => Settings::new(),
    };
    settings.extend(args.settings());
    let mut config = apply_settings(ExperimentConfig::default(), &settings)?;
    if config.output_dir.is_none() {
        config.output_dir = Some(PathBuf::from("out"));
    }
    let result = harness::sweep(&config)?;
    print!("{}", harness::summary_csv(&result.summary));
    if let Some(dir) = &config.output_dir {
        eprintln!("wrote {} runs to {}", result.records.len(), dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
