//! Connection-establishment policies.
//!
//! Both policies share the same outgoing behavior: a peer connects to the
//! addresses it learned until it runs out of outgoing slots or peer-set room.
//! They differ only when the target is already full. The default policy
//! rejects; the preemption policy accepts a tracker-discovered initiator
//! after closing one of the target's connections, preferring incoming ones.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::overlay::{ConnectionId, ConnectionRecord, DiscoverySource, Overlay, PeerId};
use crate::sim::{Engine, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    TrackerDefault,
    Preemption,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 2] = [StrategyKind::TrackerDefault, StrategyKind::Preemption];

    /// Short tag used in file names and CSV rows.
    pub fn tag(self) -> &'static str {
        match self {
            StrategyKind::TrackerDefault => "tracker",
            StrategyKind::Preemption => "preemption",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tracker" => Ok(StrategyKind::TrackerDefault),
            "preemption" => Ok(StrategyKind::Preemption),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreemptionConfig {
    /// Fraction of the peer set that may be held by preempted-in connections.
    pub cap_fraction: Option<f64>,
    /// How many preemptions may chain through drop recovery within one
    /// event. `None` leaves chains unbounded, which may not terminate.
    pub max_cascade_depth: Option<usize>,
}

impl Default for PreemptionConfig {
    fn default() -> Self {
        PreemptionConfig {
            cap_fraction: None,
            max_cascade_depth: Some(DEFAULT_CASCADE_DEPTH),
        }
    }
}

pub const DEFAULT_CASCADE_DEPTH: usize = 4;

impl PreemptionConfig {
    pub fn validate(&self) -> Result<()> {
        match self.cap_fraction {
            Some(f) if !(f > 0.0 && f <= 1.0) => {
                Err(Error::Config(format!("preemption cap must be in (0, 1], got {f}")))
            }
            _ => Ok(()),
        }
    }

    /// Largest number of preempted-in connections a peer may hold.
    pub fn cap_for(&self, max_peer_set: usize) -> usize {
        match self.cap_fraction {
            Some(f) => (f * max_peer_set as f64).ceil() as usize,
            None => usize::MAX,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    TargetGone,
    TargetFull,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttemptOutcome {
    Accepted(ConnectionRecord),
    Rejected(RejectReason),
    AcceptedWithPreemption {
        opened: ConnectionRecord,
        dropped: ConnectionRecord,
    },
}

/// A preemption as observed right after it happened.
#[derive(Clone, Debug, PartialEq)]
pub struct PreemptionRecord {
    pub initiator: PeerId,
    pub target: PeerId,
    /// The initiator's discovery tag for the target when it attempted.
    pub source: Option<DiscoverySource>,
    pub target_peer_set_after: usize,
    pub target_max_peer_set: usize,
    pub target_preempted_in_after: usize,
}

/// Side effects of a strategy call that the event loop must act on.
#[derive(Debug, Default)]
pub struct Effects {
    /// Peers whose peer set dropped below the re-announce threshold.
    pub reannounce: Vec<PeerId>,
    pub preemptions: Vec<PreemptionRecord>,
    pub attempts: u64,
}

struct PendingDrop {
    peer: PeerId,
    former: PeerId,
    depth: usize,
}

#[derive(Clone, Debug)]
pub struct ConnectionPolicy {
    pub kind: StrategyKind,
    pub preemption: PreemptionConfig,
    /// Re-announce threshold on the peer-set size.
    pub min_neighbors: usize,
}

impl ConnectionPolicy {
    pub fn new(kind: StrategyKind, preemption: PreemptionConfig, min_neighbors: usize) -> Self {
        ConnectionPolicy {
            kind,
            preemption,
            min_neighbors,
        }
    }

    /// Connects a newly joined peer to its tracker-supplied initial set.
    pub fn on_join(
        &self,
        overlay: &mut Overlay,
        engine: &mut Engine,
        peer: PeerId,
        initial_set: &[PeerId],
        now: SimTime,
        fx: &mut Effects,
    ) -> Result<()> {
        self.connect_to_new_addresses(overlay, engine, peer, initial_set, now, fx)
    }

    /// Merges a re-announce response and connects while below both limits.
    pub fn on_more_peers(
        &self,
        overlay: &mut Overlay,
        engine: &mut Engine,
        peer: PeerId,
        new_addresses: &[PeerId],
        now: SimTime,
        fx: &mut Effects,
    ) -> Result<()> {
        self.connect_to_new_addresses(overlay, engine, peer, new_addresses, now, fx)
    }

    fn connect_to_new_addresses(
        &self,
        overlay: &mut Overlay,
        engine: &mut Engine,
        peer: PeerId,
        addresses: &[PeerId],
        now: SimTime,
        fx: &mut Effects,
    ) -> Result<()> {
        for &addr in addresses {
            overlay.learn_address(peer, addr, DiscoverySource::Tracker)?;
        }
        let mut order = addresses.to_vec();
        engine.shuffle(&mut order);
        let mut pending = VecDeque::new();
        for target in order {
            let me = overlay.peer(peer)?;
            if !me.can_initiate() {
                break;
            }
            if target == peer || me.is_neighbor(target) {
                continue;
            }
            self.attempt(overlay, engine, peer, target, now, 0, &mut pending, fx)?;
            self.drain_drops(overlay, engine, &mut pending, now, fx)?;
        }
        self.check_threshold(overlay, peer, fx)
    }

    /// One connection attempt from `initiator` to `target`.
    pub fn attempt_outgoing(
        &self,
        overlay: &mut Overlay,
        engine: &mut Engine,
        initiator: PeerId,
        target: PeerId,
        now: SimTime,
        fx: &mut Effects,
    ) -> Result<AttemptOutcome> {
        let mut pending = VecDeque::new();
        let outcome = self.attempt(overlay, engine, initiator, target, now, 0, &mut pending, fx)?;
        self.drain_drops(overlay, engine, &mut pending, now, fx)?;
        Ok(outcome)
    }

    #[allow(clippy::too_many_arguments)]
    fn attempt(
        &self,
        overlay: &mut Overlay,
        engine: &mut Engine,
        initiator: PeerId,
        target: PeerId,
        now: SimTime,
        depth: usize,
        pending: &mut VecDeque<PendingDrop>,
        fx: &mut Effects,
    ) -> Result<AttemptOutcome> {
        let me = overlay.peer(initiator)?;
        if !me.is_alive() {
            return Err(Error::PeerDeparted(initiator));
        }
        if target == initiator {
            return Err(Error::SelfConnection(initiator));
        }
        if me.is_neighbor(target) {
            return Err(Error::DuplicateConnection(initiator, target));
        }
        if me.outgoing_count() >= me.max_outgoing {
            return Err(Error::OutgoingLimit(initiator));
        }
        if me.is_full() {
            return Err(Error::PeerSetFull(initiator));
        }
        fx.attempts += 1;
        let source = me.known_source(target);
        let tag = source.unwrap_or(DiscoverySource::Other);

        if !overlay.is_alive(target) {
            overlay.forget_address(initiator, target)?;
            return Ok(AttemptOutcome::Rejected(RejectReason::TargetGone));
        }
        let dest = overlay.peer(target)?;
        if !dest.is_full() {
            let id = overlay.open_connection(initiator, target, tag, now)?;
            return Ok(AttemptOutcome::Accepted(overlay.connection(id)?.clone()));
        }

        let may_preempt = self.kind == StrategyKind::Preemption
            && tag == DiscoverySource::Tracker
            && dest.preempted_in_count() < self.preemption.cap_for(dest.max_peer_set)
            && self.preemption.max_cascade_depth.is_none_or(|max| depth <= max);
        if !may_preempt {
            return Ok(AttemptOutcome::Rejected(RejectReason::TargetFull));
        }

        let victim = self.select_drop_victim(overlay, engine, target)?;
        let dropped = overlay.close_connection(victim)?;
        let id = overlay.open_inner(initiator, target, tag, now, true)?;
        let opened = overlay.connection(id)?.clone();
        let dest = overlay.peer(target)?;
        fx.preemptions.push(PreemptionRecord {
            initiator,
            target,
            source,
            target_peer_set_after: dest.peer_set_size(),
            target_max_peer_set: dest.max_peer_set,
            target_preempted_in_after: dest.preempted_in_count(),
        });
        let remote = dropped.other(target);
        pending.push_back(PendingDrop {
            peer: remote,
            former: target,
            depth: depth + 1,
        });
        pending.push_back(PendingDrop {
            peer: target,
            former: remote,
            depth: depth + 1,
        });
        Ok(AttemptOutcome::AcceptedWithPreemption { opened, dropped })
    }

    /// Picks the connection a full `target` closes to admit a newcomer:
    /// uniformly among its incoming connections, or among all of them when
    /// it has no incoming one.
    pub fn select_drop_victim(&self, overlay: &Overlay, engine: &mut Engine, target: PeerId) -> Result<ConnectionId> {
        let conns = overlay.connections_of(target)?;
        if conns.is_empty() {
            return Err(Error::EmptyPeerSet(target));
        }
        let incoming: Vec<ConnectionId> = conns
            .iter()
            .filter(|c| c.is_incoming_for(target))
            .map(|c| c.id)
            .collect();
        if incoming.is_empty() {
            Ok(conns[engine.uniform_index(conns.len())?].id)
        } else {
            Ok(incoming[engine.uniform_index(incoming.len())?])
        }
    }

    /// Reaction of `peer` after its connection to `former` was closed,
    /// either by preemption or because `former` left.
    pub fn on_connection_dropped(
        &self,
        overlay: &mut Overlay,
        engine: &mut Engine,
        peer: PeerId,
        former: PeerId,
        now: SimTime,
        fx: &mut Effects,
    ) -> Result<()> {
        let mut pending = VecDeque::from([PendingDrop { peer, former, depth: 0 }]);
        self.drain_drops(overlay, engine, &mut pending, now, fx)
    }

    fn drain_drops(
        &self,
        overlay: &mut Overlay,
        engine: &mut Engine,
        pending: &mut VecDeque<PendingDrop>,
        now: SimTime,
        fx: &mut Effects,
    ) -> Result<()> {
        while let Some(PendingDrop { peer, former, depth }) = pending.pop_front() {
            let me = overlay.peer(peer)?;
            if !me.is_alive() {
                continue;
            }
            if me.can_initiate() {
                let candidates: Vec<PeerId> = me
                    .known_addresses()
                    .map(|(p, _)| p)
                    .filter(|&p| p != former && !me.is_neighbor(p))
                    .collect();
                if !candidates.is_empty() {
                    let target = candidates[engine.uniform_index(candidates.len())?];
                    self.attempt(overlay, engine, peer, target, now, depth, pending, fx)?;
                }
            }
            self.check_threshold(overlay, peer, fx)?;
        }
        Ok(())
    }

    fn check_threshold(&self, overlay: &Overlay, peer: PeerId, fx: &mut Effects) -> Result<()> {
        let me = overlay.peer(peer)?;
        if me.is_alive() && me.peer_set_size() < self.min_neighbors {
            fx.reannounce.push(peer);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::RunSeed;
    use DiscoverySource::*;

    const T0: SimTime = SimTime::ZERO;

    fn policy(kind: StrategyKind) -> ConnectionPolicy {
        ConnectionPolicy::new(kind, PreemptionConfig::default(), 20)
    }

    fn overlay_with(n: usize, max_ps: usize, max_out: usize) -> Overlay {
        let mut o = Overlay::new();
        for _ in 0..n {
            o.add_peer(T0, max_ps, max_out);
        }
        o
    }

    fn ids(range: std::ops::Range<u32>) -> Vec<PeerId> {
        range.map(PeerId).collect()
    }

    /// Peer 0 full at `max_ps`: the first `incoming` of its connections
    /// are initiated by others, the rest by peer 0 itself.
    fn full_target(max_ps: usize, incoming: usize, extra: usize) -> Overlay {
        let mut o = overlay_with(1 + max_ps + extra, max_ps, max_ps);
        for i in 1..=max_ps as u32 {
            if (i as usize) <= incoming {
                o.open_connection(PeerId(i), PeerId(0), Tracker, T0).unwrap();
            } else {
                o.open_connection(PeerId(0), PeerId(i), Tracker, T0).unwrap();
            }
        }
        o
    }

    #[test]
    fn join_stops_at_outgoing_limit() {
        let mut o = overlay_with(81, 80, 40);
        let mut e = Engine::new(RunSeed(1));
        let mut fx = Effects::default();
        let newcomer = PeerId(80);
        policy(StrategyKind::TrackerDefault)
            .on_join(&mut o, &mut e, newcomer, &ids(0..80), T0, &mut fx)
            .unwrap();
        assert_eq!(o.peer(newcomer).unwrap().outgoing_count(), 40);
        assert!(fx.reannounce.is_empty());
        assert!(o.check_invariants().is_empty());
    }

    #[test]
    fn join_with_small_swarm_connects_to_all() {
        let mut o = overlay_with(25, 80, 40);
        let mut e = Engine::new(RunSeed(1));
        let mut fx = Effects::default();
        policy(StrategyKind::TrackerDefault)
            .on_join(&mut o, &mut e, PeerId(24), &ids(0..24), T0, &mut fx)
            .unwrap();
        let me = o.peer(PeerId(24)).unwrap();
        assert_eq!(me.outgoing_count(), 24);
        for p in 0..24 {
            assert_eq!(me.known_source(PeerId(p)), Some(Tracker));
        }
    }

    #[test]
    fn seed_join_makes_no_attempts() {
        let mut o = overlay_with(1, 80, 40);
        let mut e = Engine::new(RunSeed(1));
        let mut fx = Effects::default();
        policy(StrategyKind::Preemption)
            .on_join(&mut o, &mut e, PeerId(0), &[], T0, &mut fx)
            .unwrap();
        assert_eq!(fx.attempts, 0);
        assert_eq!(fx.reannounce, vec![PeerId(0)]);
    }

    #[test]
    fn default_strategy_rejects_full_target() {
        let mut o = full_target(80, 80, 1);
        let mut e = Engine::new(RunSeed(1));
        let mut fx = Effects::default();
        let a = PeerId(81);
        o.learn_address(a, PeerId(0), Tracker).unwrap();
        let out = policy(StrategyKind::TrackerDefault)
            .attempt_outgoing(&mut o, &mut e, a, PeerId(0), T0, &mut fx)
            .unwrap();
        assert_eq!(out, AttemptOutcome::Rejected(RejectReason::TargetFull));
    }

    #[test]
    fn preemption_accepts_tracker_discovered_initiator() {
        let mut o = full_target(80, 80, 1);
        let mut e = Engine::new(RunSeed(1));
        let mut fx = Effects::default();
        let a = PeerId(81);
        o.learn_address(a, PeerId(0), Tracker).unwrap();
        let out = policy(StrategyKind::Preemption)
            .attempt_outgoing(&mut o, &mut e, a, PeerId(0), T0, &mut fx)
            .unwrap();
        let AttemptOutcome::AcceptedWithPreemption { opened, dropped } = out else {
            panic!("expected preemption, got {out:?}");
        };
        assert_eq!((opened.initiator, opened.acceptor), (a, PeerId(0)));
        assert!(opened.preempted);
        assert_eq!(dropped.acceptor, PeerId(0));
        assert_eq!(o.peer(PeerId(0)).unwrap().peer_set_size(), 80);
        assert_eq!(o.peer(a).unwrap().outgoing_count(), 1);
        assert_eq!(fx.preemptions.len(), 1);
        assert!(o.check_invariants().is_empty());
    }

    #[test]
    fn preemption_refuses_other_sources() {
        let mut o = full_target(80, 80, 1);
        let mut e = Engine::new(RunSeed(1));
        let mut fx = Effects::default();
        let a = PeerId(81);
        o.learn_address(a, PeerId(0), Other).unwrap();
        let out = policy(StrategyKind::Preemption)
            .attempt_outgoing(&mut o, &mut e, a, PeerId(0), T0, &mut fx)
            .unwrap();
        assert_eq!(out, AttemptOutcome::Rejected(RejectReason::TargetFull));
    }

    #[test]
    fn attempt_to_departed_peer_purges_address() {
        let mut o = overlay_with(2, 80, 40);
        let mut e = Engine::new(RunSeed(1));
        let mut fx = Effects::default();
        o.learn_address(PeerId(0), PeerId(1), Tracker).unwrap();
        o.remove_peer(PeerId(1), T0).unwrap();
        let out = policy(StrategyKind::Preemption)
            .attempt_outgoing(&mut o, &mut e, PeerId(0), PeerId(1), T0, &mut fx)
            .unwrap();
        assert_eq!(out, AttemptOutcome::Rejected(RejectReason::TargetGone));
        assert_eq!(o.peer(PeerId(0)).unwrap().known_source(PeerId(1)), None);
    }

    #[test]
    fn attempt_preconditions_are_logic_errors() {
        let mut o = overlay_with(3, 80, 1);
        let mut e = Engine::new(RunSeed(1));
        let mut fx = Effects::default();
        let p = policy(StrategyKind::TrackerDefault);
        p.attempt_outgoing(&mut o, &mut e, PeerId(0), PeerId(1), T0, &mut fx).unwrap();
        assert!(p.attempt_outgoing(&mut o, &mut e, PeerId(0), PeerId(1), T0, &mut fx).is_err());
        assert!(matches!(
            p.attempt_outgoing(&mut o, &mut e, PeerId(0), PeerId(2), T0, &mut fx),
            Err(Error::OutgoingLimit(_))
        ));
    }

    #[test]
    fn preemption_cap_limits_preempted_in_connections() {
        // max_ps 10, cap 10% -> at most one preempted-in connection.
        let mut o = full_target(10, 10, 2);
        let mut e = Engine::new(RunSeed(1));
        let mut fx = Effects::default();
        let p = ConnectionPolicy::new(
            StrategyKind::Preemption,
            PreemptionConfig {
                cap_fraction: Some(0.1),
                ..PreemptionConfig::default()
            },
            0,
        );
        for a in [PeerId(11), PeerId(12)] {
            o.learn_address(a, PeerId(0), Tracker).unwrap();
        }
        let first = p.attempt_outgoing(&mut o, &mut e, PeerId(11), PeerId(0), T0, &mut fx).unwrap();
        assert!(matches!(first, AttemptOutcome::AcceptedWithPreemption { .. }));
        let second = p.attempt_outgoing(&mut o, &mut e, PeerId(12), PeerId(0), T0, &mut fx).unwrap();
        assert_eq!(second, AttemptOutcome::Rejected(RejectReason::TargetFull));
        assert_eq!(o.peer(PeerId(0)).unwrap().preempted_in_count(), 1);
    }

    #[test]
    fn cap_rounds_up() {
        let cfg = PreemptionConfig {
            cap_fraction: Some(0.1),
            ..PreemptionConfig::default()
        };
        assert_eq!(cfg.cap_for(80), 8);
        assert_eq!(cfg.cap_for(75), 8);
        assert!(PreemptionConfig { cap_fraction: Some(0.0), ..cfg.clone() }.validate().is_err());
        assert!(PreemptionConfig { cap_fraction: Some(1.5), ..cfg }.validate().is_err());
    }

    #[test]
    fn victim_is_uniform_over_incoming() {
        // Peer 0 holds incoming c1 (from 1), c2 (from 2) and outgoing c3 (to 3).
        let o = full_target(3, 2, 0);
        let p = policy(StrategyKind::Preemption);
        let mut counts = [0u32; 4];
        let mut e = Engine::new(RunSeed(77));
        for _ in 0..2000 {
            let id = p.select_drop_victim(&o, &mut e, PeerId(0)).unwrap();
            let c = o.connection(id).unwrap();
            assert!(c.is_incoming_for(PeerId(0)));
            counts[c.other(PeerId(0)).index()] += 1;
        }
        for n in [1, 2] {
            let share = counts[n] as f64 / 2000.0;
            assert!((share - 0.5).abs() <= 0.05, "share of c{n} = {share}");
        }
        assert_eq!(counts[3], 0);
        // The overlay was only read.
        assert_eq!(o.edge_count(), 3);
        assert!(o.check_invariants().is_empty());
    }

    #[test]
    fn victim_falls_back_to_any_connection() {
        let o = full_target(2, 0, 0);
        let p = policy(StrategyKind::Preemption);
        let mut e = Engine::new(RunSeed(5));
        let mut seen = [false; 3];
        for _ in 0..200 {
            let id = p.select_drop_victim(&o, &mut e, PeerId(0)).unwrap();
            seen[o.connection(id).unwrap().other(PeerId(0)).index()] = true;
        }
        assert_eq!(seen, [false, true, true]);
    }

    #[test]
    fn single_incoming_is_always_the_victim() {
        let o = full_target(3, 1, 0);
        let p = policy(StrategyKind::Preemption);
        let mut e = Engine::new(RunSeed(5));
        for _ in 0..50 {
            let id = p.select_drop_victim(&o, &mut e, PeerId(0)).unwrap();
            assert_eq!(o.connection(id).unwrap().initiator, PeerId(1));
        }
    }

    #[test]
    fn empty_peer_set_has_no_victim() {
        let o = overlay_with(1, 80, 40);
        let mut e = Engine::new(RunSeed(5));
        assert!(matches!(
            policy(StrategyKind::Preemption).select_drop_victim(&o, &mut e, PeerId(0)),
            Err(Error::EmptyPeerSet(_))
        ));
    }

    #[test]
    fn dropped_peer_with_spare_slot_retries_once() {
        let mut o = overlay_with(4, 80, 40);
        let mut e = Engine::new(RunSeed(3));
        let mut fx = Effects::default();
        for p in [1, 2, 3] {
            o.learn_address(PeerId(0), PeerId(p), Tracker).unwrap();
        }
        policy(StrategyKind::TrackerDefault)
            .on_connection_dropped(&mut o, &mut e, PeerId(0), PeerId(1), T0, &mut fx)
            .unwrap();
        assert_eq!(fx.attempts, 1);
        let me = o.peer(PeerId(0)).unwrap();
        assert_eq!(me.outgoing_count(), 1);
        assert!(!me.is_neighbor(PeerId(1)));
    }

    #[test]
    fn cascade_depth_bounds_chained_preemptions() {
        // A ring where every peer is full and knows every other peer, so each
        // recovery attempt lands on a full target.
        let n = 12u32;
        for depth in 0..4 {
            let mut o = overlay_with(n as usize + 1, 4, 4);
            for i in 0..n {
                for d in 1..=2 {
                    o.open_connection(PeerId(i), PeerId((i + d) % n), Tracker, T0).unwrap();
                }
            }
            for i in 0..=n {
                for j in 0..n {
                    o.learn_address(PeerId(i), PeerId(j), Tracker).unwrap();
                }
            }
            let cfg = PreemptionConfig {
                max_cascade_depth: Some(depth),
                ..PreemptionConfig::default()
            };
            let p = ConnectionPolicy::new(StrategyKind::Preemption, cfg, 0);
            let mut e = Engine::new(RunSeed(9));
            let mut fx = Effects::default();
            p.attempt_outgoing(&mut o, &mut e, PeerId(n), PeerId(0), T0, &mut fx).unwrap();
            assert!(!fx.preemptions.is_empty());
            assert!(fx.preemptions.len() <= depth + 1, "depth {depth}: {}", fx.preemptions.len());
            assert!(o.check_invariants().is_empty());
        }
    }

    #[test]
    fn dropped_peer_at_outgoing_limit_waits() {
        // Peer 0: 79 connections, all outgoing, O_max = 79.
        let mut o = overlay_with(82, 80, 79);
        for p in 1..=79 {
            o.open_connection(PeerId(0), PeerId(p), Tracker, T0).unwrap();
        }
        o.learn_address(PeerId(0), PeerId(81), Tracker).unwrap();
        let mut e = Engine::new(RunSeed(3));
        let mut fx = Effects::default();
        policy(StrategyKind::Preemption)
            .on_connection_dropped(&mut o, &mut e, PeerId(0), PeerId(80), T0, &mut fx)
            .unwrap();
        assert_eq!(fx.attempts, 0);
        assert_eq!(o.peer(PeerId(0)).unwrap().peer_set_size(), 79);
    }

    #[test]
    fn falling_below_threshold_requests_reannounce() {
        let mut o = overlay_with(21, 80, 40);
        for p in 1..=19 {
            o.open_connection(PeerId(p), PeerId(0), Tracker, T0).unwrap();
        }
        let mut e = Engine::new(RunSeed(3));
        let mut fx = Effects::default();
        policy(StrategyKind::TrackerDefault)
            .on_connection_dropped(&mut o, &mut e, PeerId(0), PeerId(20), T0, &mut fx)
            .unwrap();
        assert_eq!(fx.reannounce, vec![PeerId(0)]);
    }

    #[test]
    fn more_peers_when_full_are_only_remembered() {
        let mut o = full_target(3, 3, 2);
        let mut e = Engine::new(RunSeed(3));
        let mut fx = Effects::default();
        policy(StrategyKind::Preemption)
            .on_more_peers(&mut o, &mut e, PeerId(0), &[PeerId(4), PeerId(5)], T0, &mut fx)
            .unwrap();
        assert_eq!(fx.attempts, 0);
        assert_eq!(o.peer(PeerId(0)).unwrap().known_source(PeerId(5)), Some(Tracker));
    }

    #[test]
    fn more_peers_respects_outgoing_capacity() {
        let mut o = overlay_with(6, 80, 2);
        let mut e = Engine::new(RunSeed(3));
        let mut fx = Effects::default();
        policy(StrategyKind::TrackerDefault)
            .on_more_peers(&mut o, &mut e, PeerId(0), &ids(1..6), T0, &mut fx)
            .unwrap();
        assert_eq!(fx.attempts, 2);
        assert_eq!(o.peer(PeerId(0)).unwrap().outgoing_count(), 2);
    }

    #[test]
    fn more_peers_skips_neighbors() {
        let mut o = overlay_with(3, 80, 40);
        o.open_connection(PeerId(0), PeerId(1), Tracker, T0).unwrap();
        o.open_connection(PeerId(2), PeerId(0), Tracker, T0).unwrap();
        let mut e = Engine::new(RunSeed(3));
        let mut fx = Effects::default();
        policy(StrategyKind::TrackerDefault)
            .on_more_peers(&mut o, &mut e, PeerId(0), &[PeerId(1), PeerId(2)], T0, &mut fx)
            .unwrap();
        assert_eq!(fx.attempts, 0);
    }

    #[test]
    fn strategy_tags_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.tag().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("both".parse::<StrategyKind>().is_err());
    }
}
