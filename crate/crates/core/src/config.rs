//! `key=value` experiment settings shared by the config file and the CLI.
//!
//! Keys use the long flag names without the leading dashes, e.g.
//! `max-peer-set=80` or `omax=5:80:5`. Blank lines and `#` comments are
//! ignored. Later assignments override earlier ones, which is how command
//! line flags take precedence over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::sim::SimTime;
use crate::strategy::StrategyKind;

pub const KEYS: &[&str] = &[
    "strategy",
    "omax",
    "runs",
    "max-peer-set",
    "min-neighbors",
    "response-size",
    "min-request-interval",
    "snapshot-times",
    "horizon",
    "seed",
    "jobs",
    "out",
    "preemption-cap",
    "cascade-depth",
    "ungraceful-leaves",
];

pub type Settings = BTreeMap<String, String>;

/// Parses a `key=value` document. Underscores in keys are accepted as dashes.
pub fn parse_settings(text: &str) -> Result<Settings> {
    let mut out = Settings::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key {key:?}", lineno + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

pub fn load_settings(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_settings(&text)
}

/// Applies `settings` on top of `base`.
pub fn apply_settings(mut cfg: ExperimentConfig, settings: &Settings) -> Result<ExperimentConfig> {
    for (key, value) in settings {
        let v = value.as_str();
        match key.as_str() {
            "strategy" => cfg.strategies = parse_strategies(v)?,
            "omax" => cfg.omax_values = parse_int_list(v)?,
            "runs" => cfg.runs = parse_num(key, v)?,
            "max-peer-set" => {
                cfg.run.max_peer_set = parse_num(key, v)?;
            }
            "min-neighbors" => cfg.run.min_neighbors = parse_num(key, v)?,
            "response-size" => cfg.run.tracker.response_size = parse_num(key, v)?,
            "min-request-interval" => cfg.run.tracker.min_request_interval = parse_minutes(v)?,
            "snapshot-times" => {
                cfg.run.snapshot_times = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|s| parse_minutes(s.trim())).collect::<Result<_>>()?
                }
            }
            "horizon" => cfg.run.horizon = parse_minutes(v)?,
            "seed" => cfg.base_seed = parse_num(key, v)?,
            "jobs" => cfg.jobs = parse_num(key, v)?,
            "out" => cfg.output_dir = Some(PathBuf::from(v)),
            "preemption-cap" => {
                cfg.run.preemption.cap_fraction = match v {
                    "none" | "" => None,
                    _ => Some(parse_num(key, v)?),
                }
            }
            "cascade-depth" => {
                cfg.run.preemption.max_cascade_depth = match v {
                    "none" | "unlimited" => None,
                    _ => Some(parse_num(key, v)?),
                }
            }
            "ungraceful-leaves" => cfg.run.ungraceful_leaves = parse_bool(v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
    }
    Ok(cfg)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("expected a boolean, got {v:?}"))),
    }
}

pub fn parse_minutes(v: &str) -> Result<SimTime> {
    let m: f64 = parse_num("minutes", v)?;
    SimTime::from_minutes_f64(m)
}

pub fn parse_strategies(v: &str) -> Result<Vec<StrategyKind>> {
    match v {
        "both" => Ok(StrategyKind::ALL.to_vec()),
        one => Ok(vec![one.parse()?]),
    }
}

/// `5,10,20` or an inclusive range `start:stop:step`.
pub fn parse_int_list(v: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step): (usize, usize, usize) =
                (parse_num("omax", start)?, parse_num("omax", stop)?, parse_num("omax", step)?);
            if step == 0 || start > stop {
                return Err(Error::Config(format!("bad range {v:?}")));
            }
            Ok((start..=stop).step_by(step).collect())
        }
        [_] => v.split(',').map(|s| parse_num("omax", s.trim())).collect(),
        _ => Err(Error::Config(format!("bad list {v:?}"))),
    }
}
