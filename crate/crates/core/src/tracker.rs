//! Centralized tracker: registry of live peers and random peer-list responses.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::overlay::PeerId;
use crate::sim::{Engine, SimTime};

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    /// Maximum number of peers returned per request.
    pub response_size: usize,
    /// Minimum spacing between two requests from the same peer.
    pub min_request_interval: SimTime,
    pub heartbeat_period: SimTime,
    /// A member silent for longer than this is dropped from the registry.
    pub expiry_timeout: SimTime,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            response_size: 80,
            min_request_interval: SimTime::from_minutes(5),
            heartbeat_period: SimTime::from_minutes(30),
            expiry_timeout: SimTime::from_minutes(45),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnnounceResponse {
    Peers(Vec<PeerId>),
    /// Rate-limited; the earliest time a new request would be served.
    Denied { retry_at: SimTime },
}

#[derive(Clone, Copy, Debug)]
struct Member {
    last_heartbeat: SimTime,
    last_request: SimTime,
}

#[derive(Clone, Debug)]
pub struct TrackerRegistry {
    config: TrackerConfig,
    members: BTreeMap<PeerId, Member>,
}

impl TrackerRegistry {
    pub fn new(config: TrackerConfig) -> Self {
        TrackerRegistry {
            config,
            members: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, peer: PeerId) -> bool {
        self.members.contains_key(&peer)
    }

    pub fn members(&self) -> impl Iterator<Item = PeerId> + '_ {
        self.members.keys().copied()
    }

    pub fn last_heartbeat(&self, peer: PeerId) -> Option<SimTime> {
        self.members.get(&peer).map(|m| m.last_heartbeat)
    }

    pub fn last_request(&self, peer: PeerId) -> Option<SimTime> {
        self.members.get(&peer).map(|m| m.last_request)
    }

    /// Registers `peer` and returns its initial peer set.
    pub fn announce_join(&mut self, peer: PeerId, now: SimTime, rng: &mut Engine) -> Result<Vec<PeerId>> {
        if self.members.contains_key(&peer) {
            return Err(Error::AlreadyRegistered(peer));
        }
        self.expire(now);
        let response = self.random_subset(peer, rng);
        self.members.insert(
            peer,
            Member {
                last_heartbeat: now,
                last_request: now,
            },
        );
        Ok(response)
    }

    /// Asks for more peers, subject to the per-peer request interval.
    pub fn announce_more(&mut self, peer: PeerId, now: SimTime, rng: &mut Engine) -> Result<AnnounceResponse> {
        let member = *self.members.get(&peer).ok_or(Error::UnknownPeer(peer))?;
        let retry_at = member.last_request + self.config.min_request_interval;
        if now < retry_at {
            return Ok(AnnounceResponse::Denied { retry_at });
        }
        self.expire(now);
        // The requester may itself have just expired.
        let Some(member) = self.members.get_mut(&peer) else {
            return Err(Error::UnknownPeer(peer));
        };
        member.last_request = now;
        member.last_heartbeat = now;
        Ok(AnnounceResponse::Peers(self.random_subset(peer, rng)))
    }

    /// Refreshes the liveness timestamp; ignored for non-members.
    pub fn heartbeat(&mut self, peer: PeerId, now: SimTime) {
        if let Some(m) = self.members.get_mut(&peer) {
            m.last_heartbeat = now;
        }
    }

    pub fn announce_leave(&mut self, peer: PeerId) {
        self.members.remove(&peer);
    }

    /// Drops members silent for more than the expiry timeout; returns them.
    pub fn expire(&mut self, now: SimTime) -> Vec<PeerId> {
        let timeout = self.config.expiry_timeout;
        let stale: Vec<PeerId> = self
            .members
            .iter()
            .filter(|(_, m)| now.saturating_sub(m.last_heartbeat) > timeout)
            .map(|(&p, _)| p)
            .collect();
        for p in &stale {
            self.members.remove(p);
        }
        stale
    }

    fn random_subset(&self, requester: PeerId, rng: &mut Engine) -> Vec<PeerId> {
        let candidates: Vec<PeerId> = self.members.keys().copied().filter(|&p| p != requester).collect();
        rng.sample_indices(candidates.len(), self.config.response_size)
            .into_iter()
            .map(|i| candidates[i])
            .collect()
    }
}
