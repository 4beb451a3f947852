//! Experiment orchestration: O_max sweeps over both strategies, seed
//! derivation, aggregation across runs and CSV / edge-list output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{format_edge_list, MetricsSnapshot};
use crate::sim::{RunSeed, SimTime};
use crate::simulation::{RunConfig, Simulation};
use crate::strategy::StrategyKind;

pub const METRICS_HEADER: &str =
    "strategy,omax,run,seed,t,n_alive,n_edges,bottleneck_index,avg_peer_set,diameter,connected";
pub const SUMMARY_HEADER: &str = "strategy,omax,t,metric,mean,min,max";
pub const METRIC_NAMES: [&str; 3] = ["bottleneck_index", "avg_peer_set", "diameter"];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub strategies: Vec<StrategyKind>,
    pub omax_values: Vec<usize>,
    pub runs: u32,
    /// Template for every run; `strategy` and `max_outgoing` are overridden.
    pub run: RunConfig,
    pub base_seed: u64,
    pub jobs: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            strategies: StrategyKind::ALL.to_vec(),
            omax_values: (1..=16).map(|k| 5 * k).collect(),
            runs: 10,
            run: RunConfig::default(),
            base_seed: 1,
            jobs: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.strategies.is_empty() || self.omax_values.is_empty() {
            return Err(Error::Config("empty strategy or O_max list".into()));
        }
        let max_ps = self.run.max_peer_set;
        if let Some(bad) = self.omax_values.iter().find(|&&k| k == 0 || k > max_ps) {
            return Err(Error::Config(format!("O_max {bad} outside [1, {max_ps}]")));
        }
        self.run.validate_with_omax(self.omax_values[0])
    }

    pub fn run_config(&self, strategy: StrategyKind, omax: usize) -> RunConfig {
        RunConfig {
            strategy,
            max_outgoing: omax,
            ..self.run.clone()
        }
    }
}

impl RunConfig {
    fn validate_with_omax(&self, omax: usize) -> Result<()> {
        RunConfig {
            max_outgoing: omax,
            ..self.clone()
        }
        .validate()
    }
}

/// Seed of one sweep cell, injective over `(strategy, omax, run_index)` for
/// a fixed base seed.
pub fn derive_seed(base_seed: u64, strategy: StrategyKind, omax: usize, run_index: u32) -> RunSeed {
    let tag = match strategy {
        StrategyKind::TrackerDefault => 0u64,
        StrategyKind::Preemption => 1u64,
    };
    let cell = (tag << 63) | ((omax as u64 & 0x7fff_ffff) << 32) | run_index as u64;
    RunSeed(mix64(cell ^ mix64(base_seed)))
}

/// SplitMix64 finalizer, a bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Metrics of one run at each snapshot time.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub strategy: StrategyKind,
    pub omax: usize,
    pub run: u32,
    pub seed: RunSeed,
    pub metrics: Vec<MetricsSnapshot>,
    /// Edge lists per snapshot, kept only when requested.
    pub edges: Vec<Vec<(u32, u32)>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub strategy: StrategyKind,
    pub omax: usize,
    pub t: SimTime,
    pub metric: &'static str,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SweepResult {
    pub records: Vec<RunRecord>,
    pub summary: Vec<AggregateRow>,
}

impl SweepResult {
    pub fn aggregate(&self, strategy: StrategyKind, omax: usize, metric: &str) -> Option<&AggregateRow> {
        self.summary
            .iter()
            .find(|r| r.strategy == strategy && r.omax == omax && r.metric == metric)
    }
}

/// Runs one cell of the sweep.
pub fn run_single(
    config: &ExperimentConfig,
    strategy: StrategyKind,
    omax: usize,
    run_index: u32,
    keep_edges: bool,
) -> Result<RunRecord> {
    let seed = derive_seed(config.base_seed, strategy, omax, run_index);
    let out = Simulation::new(config.run_config(strategy, omax), seed)?.run()?;
    let (edges, metrics) = out
        .snapshots
        .into_iter()
        .map(|(snap, m)| (if keep_edges { snap.edges } else { Vec::new() }, m))
        .unzip();
    Ok(RunRecord {
        strategy,
        omax,
        run: run_index,
        seed,
        metrics,
        edges: if keep_edges { edges } else { Vec::new() },
    })
}

/// Runs every (strategy, O_max, run) cell and aggregates. When an output
/// directory is set, edge lists are written as runs finish and the CSV
/// files once all of them have; a failure stops the sweep but keeps what
/// was already written.
pub fn sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let cells: Vec<(StrategyKind, usize, u32)> = config
        .strategies
        .iter()
        .flat_map(|&s| {
            config
                .omax_values
                .iter()
                .flat_map(move |&k| (0..config.runs).map(move |r| (s, k, r)))
        })
        .collect();

    let work = || -> Result<Vec<RunRecord>> {
        cells
            .par_iter()
            .map(|&(s, k, r)| {
                let keep = config.output_dir.is_some();
                let mut record = run_single(config, s, k, r, keep)?;
                if let Some(dir) = &config.output_dir {
                    write_edge_lists(dir, &record, &config.run.snapshot_times)?;
                    record.edges.clear();
                }
                Ok(record)
            })
            .collect()
    };
    let records = if config.jobs == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work)?
    };

    let summary = aggregate(&records, &config.run.snapshot_times);
    let result = SweepResult { records, summary };
    if let Some(dir) = &config.output_dir {
        write_outputs(&result, dir)?;
    }
    Ok(result)
}

/// Mean, minimum and maximum of each metric across runs, per
/// (strategy, O_max, snapshot time), in first-seen order.
pub fn aggregate(records: &[RunRecord], snapshot_times: &[SimTime]) -> Vec<AggregateRow> {
    let mut keys: Vec<(StrategyKind, usize)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.strategy, r.omax)) {
            keys.push((r.strategy, r.omax));
        }
    }
    let mut rows = Vec::new();
    for (strategy, omax) in keys {
        let group: Vec<&RunRecord> = records
            .iter()
            .filter(|r| r.strategy == strategy && r.omax == omax)
            .collect();
        for (ti, &t) in snapshot_times.iter().enumerate() {
            for metric in METRIC_NAMES {
                let values: Vec<f64> = group
                    .iter()
                    .filter_map(|r| r.metrics.get(ti))
                    .map(|m| metric_value(m, metric))
                    .collect();
                if values.is_empty() {
                    continue;
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                rows.push(AggregateRow {
                    strategy,
                    omax,
                    t,
                    metric,
                    mean: mean.clamp(min, max),
                    min,
                    max,
                });
            }
        }
    }
    rows
}

pub fn metric_value(m: &MetricsSnapshot, metric: &str) -> f64 {
    match metric {
        "bottleneck_index" => m.bottleneck_index,
        "avg_peer_set" => m.avg_peer_set,
        "diameter" => m.diameter as f64,
        other => panic!("unknown metric {other}"),
    }
}

pub fn metrics_csv(records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in records {
        for m in &r.metrics {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.6},{:.6},{},{}",
                r.strategy,
                r.omax,
                r.run,
                r.seed.0,
                m.taken_at,
                m.n_alive,
                m.n_edges,
                m.bottleneck_index,
                m.avg_peer_set,
                m.diameter,
                m.connected
            );
        }
    }
    out
}

pub fn summary_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            r.strategy, r.omax, r.t, r.metric, r.mean, r.min, r.max
        );
    }
    out
}

pub fn edge_list_file_name(strategy: StrategyKind, omax: usize, run: u32, t: SimTime) -> String {
    format!("matrix_{strategy}_omax{omax}_run{run}_t{t}.edges")
}

/// Writes `metrics.csv` and `summary.csv` into `dir`.
pub fn write_outputs(result: &SweepResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join("metrics.csv"), metrics_csv(&result.records).as_bytes())?;
    write_atomic(&dir.join("summary.csv"), summary_csv(&result.summary).as_bytes())
}

fn write_edge_lists(dir: &Path, record: &RunRecord, times: &[SimTime]) -> Result<()> {
    for (edges, &t) in record.edges.iter().zip(times) {
        let name = edge_list_file_name(record.strategy, record.omax, record.run, t);
        write_atomic(&dir.join(name), format_edge_list(edges).as_bytes())?;
    }
    Ok(())
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
