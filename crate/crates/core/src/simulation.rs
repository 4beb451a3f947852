//! One simulation run: wires the workload, tracker, overlay and connection
//! policy to the event engine.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::metrics::{MetricsSnapshot, OverlaySnapshot};
use crate::overlay::{DiscoverySource, Overlay, PeerId};
use crate::sim::{Engine, Event, EventKind, RunSeed, SimTime};
use crate::strategy::{ConnectionPolicy, Effects, PreemptionConfig, StrategyKind};
use crate::tracker::{AnnounceResponse, TrackerConfig, TrackerRegistry};
use crate::workload::WorkloadConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub strategy: StrategyKind,
    pub max_outgoing: usize,
    pub max_peer_set: usize,
    pub min_neighbors: usize,
    pub tracker: TrackerConfig,
    pub workload: WorkloadConfig,
    pub preemption: PreemptionConfig,
    pub snapshot_times: Vec<SimTime>,
    pub horizon: SimTime,
    /// Departing peers skip the tracker; only heartbeat expiry removes them.
    pub ungraceful_leaves: bool,
    pub first_group_size: usize,
    /// Check structural invariants after every event.
    pub audit: bool,
    pub record_log: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            strategy: StrategyKind::TrackerDefault,
            max_outgoing: 40,
            max_peer_set: 80,
            min_neighbors: 20,
            tracker: TrackerConfig::default(),
            workload: WorkloadConfig::default(),
            preemption: PreemptionConfig::default(),
            snapshot_times: vec![SimTime::from_minutes(10)],
            horizon: SimTime::from_minutes(70),
            ungraceful_leaves: false,
            first_group_size: 80,
            audit: false,
            record_log: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outgoing == 0 || self.max_outgoing > self.max_peer_set {
            return Err(Error::Config(format!(
                "max outgoing {} must be in [1, {}]",
                self.max_outgoing, self.max_peer_set
            )));
        }
        if let Some(t) = self.snapshot_times.iter().find(|&&t| t > self.horizon) {
            return Err(Error::Config(format!("snapshot at {t} min is past the horizon")));
        }
        self.workload.validate()?;
        self.preemption.validate()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub events: u64,
    pub joins: u64,
    pub leaves: u64,
    pub attempts: u64,
    pub preemptions: u64,
    pub reannounces: u64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub seed: RunSeed,
    pub snapshots: Vec<(OverlaySnapshot, MetricsSnapshot)>,
    pub stats: RunStats,
    /// Invariant violations found when auditing; empty otherwise.
    pub violations: Vec<String>,
    pub log: Vec<Event>,
}

pub struct Simulation {
    config: RunConfig,
    seed: RunSeed,
    engine: Engine,
    overlay: Overlay,
    tracker: TrackerRegistry,
    policy: ConnectionPolicy,
    reannounce_pending: BTreeSet<PeerId>,
    snapshots: Vec<(OverlaySnapshot, MetricsSnapshot)>,
    stats: RunStats,
    violations: Vec<String>,
    log: Vec<Event>,
}

impl Simulation {
    pub fn new(config: RunConfig, seed: RunSeed) -> Result<Self> {
        config.validate()?;
        let mut engine = Engine::new(seed);
        // Snapshots first: at equal times they precede joins and leaves.
        for (label, &t) in config.snapshot_times.iter().enumerate() {
            engine.schedule(t, EventKind::Snapshot(label as u32))?;
        }
        for arrival in config.workload.build_schedule(&mut engine)? {
            engine.schedule(arrival.join, EventKind::PeerJoin(arrival.peer))?;
            if let Some(leave) = arrival.leave {
                engine.schedule(leave, EventKind::PeerLeave(arrival.peer))?;
            }
        }
        let policy = ConnectionPolicy::new(config.strategy, config.preemption.clone(), config.min_neighbors);
        Ok(Simulation {
            tracker: TrackerRegistry::new(config.tracker.clone()),
            config,
            seed,
            engine,
            overlay: Overlay::new(),
            policy,
            reannounce_pending: BTreeSet::new(),
            snapshots: Vec::new(),
            stats: RunStats::default(),
            violations: Vec::new(),
            log: Vec::new(),
        })
    }

    pub fn overlay(&self) -> &Overlay {
        &self.overlay
    }

    pub fn tracker(&self) -> &TrackerRegistry {
        &self.tracker
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    /// Processes events up to `t_end` (inclusive).
    pub fn run_until(&mut self, t_end: SimTime) -> Result<()> {
        while let Some(ev) = self.engine.next_event(t_end) {
            self.stats.events += 1;
            if self.config.record_log {
                self.log.push(ev.clone());
            }
            self.handle(ev.kind)?;
            if self.config.audit {
                self.audit_overlay();
            }
        }
        self.engine.advance_to(t_end)
    }

    /// Runs to the configured horizon and returns the collected output.
    pub fn run(mut self) -> Result<RunOutput> {
        let horizon = self.config.horizon;
        self.run_until(horizon)?;
        Ok(RunOutput {
            seed: self.seed,
            snapshots: self.snapshots,
            stats: self.stats,
            violations: self.violations,
            log: self.log,
        })
    }

    fn handle(&mut self, kind: EventKind) -> Result<()> {
        let now = self.engine.now();
        let mut fx = Effects::default();
        match kind {
            EventKind::PeerJoin(peer) => self.on_join(peer, now, &mut fx)?,
            EventKind::PeerLeave(peer) => self.on_leave(peer, now, &mut fx)?,
            EventKind::TrackerReannounce(peer) => self.on_reannounce(peer, now, &mut fx)?,
            EventKind::Heartbeat(peer) => {
                if self.overlay.is_alive(peer) {
                    self.tracker.heartbeat(peer, now);
                    let next = now + self.config.tracker.heartbeat_period;
                    self.engine.schedule(next, EventKind::Heartbeat(peer))?;
                }
            }
            EventKind::Snapshot(_) => {
                let snap = OverlaySnapshot::capture(
                    &self.overlay,
                    now,
                    self.config.max_peer_set,
                    self.config.first_group_size,
                );
                let metrics = MetricsSnapshot::compute(&snap);
                self.snapshots.push((snap, metrics));
            }
        }
        self.apply_effects(fx, now)
    }

    fn on_join(&mut self, peer: PeerId, now: SimTime, fx: &mut Effects) -> Result<()> {
        let id = self
            .overlay
            .add_peer(now, self.config.max_peer_set, self.config.max_outgoing);
        if id != peer {
            return Err(Error::UnknownPeer(peer));
        }
        self.stats.joins += 1;
        let initial = self.tracker.announce_join(peer, now, &mut self.engine)?;
        self.overlay.peer_mut(peer)?.last_tracker_request = Some(now);
        self.policy
            .on_join(&mut self.overlay, &mut self.engine, peer, &initial, now, fx)?;
        let beat = now + self.config.tracker.heartbeat_period;
        self.engine.schedule(beat, EventKind::Heartbeat(peer))?;
        Ok(())
    }

    fn on_leave(&mut self, peer: PeerId, now: SimTime, fx: &mut Effects) -> Result<()> {
        if !self.overlay.is_alive(peer) {
            return Ok(());
        }
        self.stats.leaves += 1;
        if !self.config.ungraceful_leaves {
            self.tracker.announce_leave(peer);
        }
        self.reannounce_pending.remove(&peer);
        for neighbor in self.overlay.remove_peer(peer, now)? {
            self.policy
                .on_connection_dropped(&mut self.overlay, &mut self.engine, neighbor, peer, now, fx)?;
        }
        Ok(())
    }

    fn on_reannounce(&mut self, peer: PeerId, now: SimTime, fx: &mut Effects) -> Result<()> {
        self.reannounce_pending.remove(&peer);
        if !self.overlay.is_alive(peer) || !self.tracker.contains(peer) {
            return Ok(());
        }
        if self.overlay.peer(peer)?.peer_set_size() >= self.config.min_neighbors {
            return Ok(());
        }
        match self.tracker.announce_more(peer, now, &mut self.engine)? {
            AnnounceResponse::Peers(more) => {
                self.stats.reannounces += 1;
                self.overlay.peer_mut(peer)?.last_tracker_request = Some(now);
                self.policy
                    .on_more_peers(&mut self.overlay, &mut self.engine, peer, &more, now, fx)?;
            }
            AnnounceResponse::Denied { retry_at } => {
                self.reannounce_pending.insert(peer);
                self.engine.schedule(retry_at, EventKind::TrackerReannounce(peer))?;
            }
        }
        Ok(())
    }

    fn apply_effects(&mut self, fx: Effects, now: SimTime) -> Result<()> {
        self.stats.attempts += fx.attempts;
        self.stats.preemptions += fx.preemptions.len() as u64;
        if self.config.audit {
            self.audit_preemptions(&fx);
        }
        for peer in fx.reannounce {
            if !self.overlay.is_alive(peer) || self.reannounce_pending.contains(&peer) {
                continue;
            }
            let Some(last) = self.tracker.last_request(peer) else {
                continue;
            };
            let at = (last + self.config.tracker.min_request_interval).max(now);
            self.reannounce_pending.insert(peer);
            self.engine.schedule(at, EventKind::TrackerReannounce(peer))?;
        }
        Ok(())
    }

    fn audit_overlay(&mut self) {
        let at = self.engine.now();
        for v in self.overlay.check_invariants() {
            self.violations.push(format!("t={at}: {v}"));
        }
    }

    fn audit_preemptions(&mut self, fx: &Effects) {
        let at = self.engine.now();
        let cap = self.config.preemption.cap_for(self.config.max_peer_set);
        for p in &fx.preemptions {
            if self.config.strategy != StrategyKind::Preemption {
                self.violations.push(format!("t={at}: preemption under {}", self.config.strategy));
            }
            if p.source != Some(DiscoverySource::Tracker) {
                self.violations.push(format!(
                    "t={at}: {} preempted {} with source {:?}",
                    p.initiator, p.target, p.source
                ));
            }
            if p.target_peer_set_after != p.target_max_peer_set {
                self.violations.push(format!(
                    "t={at}: {} left at {} after preemption",
                    p.target, p.target_peer_set_after
                ));
            }
            if p.target_preempted_in_after > cap {
                self.violations.push(format!("t={at}: {} exceeds preemption cap", p.target));
            }
        }
    }
}
