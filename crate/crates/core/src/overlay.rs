//! The overlay graph and the per-peer connection bookkeeping.
//!
//! Every connection is an undirected edge that remembers which endpoint
//! initiated it. The initiator counts it against its outgoing limit, both
//! endpoints count it against their peer-set limit.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::sim::SimTime;

/// Join-order index of a peer; `0` is the initial seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeerId(pub u32);

impl PeerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// How a peer learned another peer's address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiscoverySource {
    Tracker,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConnectionId(u32);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectionRecord {
    pub id: ConnectionId,
    pub initiator: PeerId,
    pub acceptor: PeerId,
    /// How the initiator learned the acceptor's address.
    pub source: DiscoverySource,
    pub opened_at: SimTime,
    /// Accepted by a full acceptor after it dropped another connection.
    pub preempted: bool,
}

impl ConnectionRecord {
    /// The endpoint opposite `peer`.
    pub fn other(&self, peer: PeerId) -> PeerId {
        if self.initiator == peer {
            self.acceptor
        } else {
            self.initiator
        }
    }

    pub fn is_incoming_for(&self, peer: PeerId) -> bool {
        self.acceptor == peer
    }
}

#[derive(Clone, Debug)]
pub struct PeerState {
    pub id: PeerId,
    pub joined_at: SimTime,
    pub max_peer_set: usize,
    pub max_outgoing: usize,
    /// Neighbor -> connection; ordered so iteration is reproducible.
    pub(crate) neighbors: BTreeMap<PeerId, ConnectionId>,
    pub(crate) outgoing_count: usize,
    pub(crate) preempted_in_count: usize,
    pub(crate) known_addresses: BTreeMap<PeerId, DiscoverySource>,
    pub last_tracker_request: Option<SimTime>,
    pub departure_time: Option<SimTime>,
    pub(crate) alive: bool,
}

impl PeerState {
    pub fn peer_set_size(&self) -> usize {
        self.neighbors.len()
    }

    pub fn outgoing_count(&self) -> usize {
        self.outgoing_count
    }

    pub fn incoming_count(&self) -> usize {
        self.neighbors.len() - self.outgoing_count
    }

    /// Connections currently held that were accepted by preempting another.
    pub fn preempted_in_count(&self) -> usize {
        self.preempted_in_count
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    pub fn is_full(&self) -> bool {
        self.neighbors.len() >= self.max_peer_set
    }

    pub fn can_initiate(&self) -> bool {
        self.alive && !self.is_full() && self.outgoing_count < self.max_outgoing
    }

    pub fn is_neighbor(&self, other: PeerId) -> bool {
        self.neighbors.contains_key(&other)
    }

    pub fn neighbors(&self) -> impl Iterator<Item = PeerId> + '_ {
        self.neighbors.keys().copied()
    }

    pub fn known_source(&self, addr: PeerId) -> Option<DiscoverySource> {
        self.known_addresses.get(&addr).copied()
    }

    pub fn known_addresses(&self) -> impl Iterator<Item = (PeerId, DiscoverySource)> + '_ {
        self.known_addresses.iter().map(|(&p, &s)| (p, s))
    }
}

#[derive(Clone, Debug, Default)]
pub struct Overlay {
    peers: Vec<PeerState>,
    connections: Vec<Option<ConnectionRecord>>,
    free_ids: Vec<ConnectionId>,
    edge_count: usize,
}

impl Overlay {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the next peer in join order.
    pub fn add_peer(&mut self, joined_at: SimTime, max_peer_set: usize, max_outgoing: usize) -> PeerId {
        let id = PeerId(self.peers.len() as u32);
        self.peers.push(PeerState {
            id,
            joined_at,
            max_peer_set,
            max_outgoing,
            neighbors: BTreeMap::new(),
            outgoing_count: 0,
            preempted_in_count: 0,
            known_addresses: BTreeMap::new(),
            last_tracker_request: None,
            departure_time: None,
            alive: true,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn peer(&self, id: PeerId) -> Result<&PeerState> {
        self.peers.get(id.index()).ok_or(Error::UnknownPeer(id))
    }

    pub(crate) fn peer_mut(&mut self, id: PeerId) -> Result<&mut PeerState> {
        self.peers.get_mut(id.index()).ok_or(Error::UnknownPeer(id))
    }

    pub fn peers(&self) -> &[PeerState] {
        &self.peers
    }

    pub fn alive_peers(&self) -> impl Iterator<Item = &PeerState> {
        self.peers.iter().filter(|p| p.alive)
    }

    pub fn is_alive(&self, id: PeerId) -> bool {
        self.peers.get(id.index()).is_some_and(|p| p.alive)
    }

    pub fn connection(&self, id: ConnectionId) -> Result<&ConnectionRecord> {
        self.connections
            .get(id.0 as usize)
            .and_then(Option::as_ref)
            .ok_or(Error::UnknownConnection(id))
    }

    pub fn connection_between(&self, a: PeerId, b: PeerId) -> Option<&ConnectionRecord> {
        let id = *self.peers.get(a.index())?.neighbors.get(&b)?;
        self.connection(id).ok()
    }

    /// Connections held by `peer`, in neighbor order.
    pub fn connections_of(&self, peer: PeerId) -> Result<Vec<&ConnectionRecord>> {
        self.peer(peer)?
            .neighbors
            .values()
            .map(|&c| self.connection(c))
            .collect()
    }

    /// Remembers `addr` at `peer`. An address first learned from `Other`
    /// is upgraded when the tracker later returns it; never downgraded.
    pub fn learn_address(&mut self, peer: PeerId, addr: PeerId, source: DiscoverySource) -> Result<()> {
        if peer == addr {
            return Ok(());
        }
        let state = self.peer_mut(peer)?;
        state
            .known_addresses
            .entry(addr)
            .and_modify(|s| {
                if source == DiscoverySource::Tracker {
                    *s = DiscoverySource::Tracker;
                }
            })
            .or_insert(source);
        Ok(())
    }

    pub fn forget_address(&mut self, peer: PeerId, addr: PeerId) -> Result<()> {
        self.peer_mut(peer)?.known_addresses.remove(&addr);
        Ok(())
    }

    pub fn open_connection(
        &mut self,
        initiator: PeerId,
        acceptor: PeerId,
        source: DiscoverySource,
        now: SimTime,
    ) -> Result<ConnectionId> {
        self.open_inner(initiator, acceptor, source, now, false)
    }

    pub(crate) fn open_inner(
        &mut self,
        initiator: PeerId,
        acceptor: PeerId,
        source: DiscoverySource,
        now: SimTime,
        preempted: bool,
    ) -> Result<ConnectionId> {
        if initiator == acceptor {
            return Err(Error::SelfConnection(initiator));
        }
        {
            let from = self.peer(initiator)?;
            let to = self.peer(acceptor)?;
            if !from.alive {
                return Err(Error::PeerDeparted(initiator));
            }
            if !to.alive {
                return Err(Error::PeerDeparted(acceptor));
            }
            if from.is_neighbor(acceptor) {
                return Err(Error::DuplicateConnection(initiator, acceptor));
            }
            if from.outgoing_count >= from.max_outgoing {
                return Err(Error::OutgoingLimit(initiator));
            }
            if from.is_full() {
                return Err(Error::PeerSetFull(initiator));
            }
            if to.is_full() {
                return Err(Error::PeerSetFull(acceptor));
            }
        }

        let record = |id| ConnectionRecord {
            id,
            initiator,
            acceptor,
            source,
            opened_at: now,
            preempted,
        };
        let id = match self.free_ids.pop() {
            Some(id) => {
                self.connections[id.0 as usize] = Some(record(id));
                id
            }
            None => {
                let id = ConnectionId(self.connections.len() as u32);
                self.connections.push(Some(record(id)));
                id
            }
        };

        let from = &mut self.peers[initiator.index()];
        from.neighbors.insert(acceptor, id);
        from.outgoing_count += 1;
        let to = &mut self.peers[acceptor.index()];
        to.neighbors.insert(initiator, id);
        if preempted {
            to.preempted_in_count += 1;
        }
        self.edge_count += 1;
        Ok(id)
    }

    /// Tears down a connection and returns its record. Notifying the two
    /// endpoints is left to the caller.
    pub fn close_connection(&mut self, id: ConnectionId) -> Result<ConnectionRecord> {
        let record = self
            .connections
            .get_mut(id.0 as usize)
            .and_then(Option::take)
            .ok_or(Error::UnknownConnection(id))?;
        self.free_ids.push(id);

        let from = &mut self.peers[record.initiator.index()];
        from.neighbors.remove(&record.acceptor);
        from.outgoing_count -= 1;
        let to = &mut self.peers[record.acceptor.index()];
        to.neighbors.remove(&record.initiator);
        if record.preempted {
            to.preempted_in_count -= 1;
        }
        self.edge_count -= 1;
        Ok(record)
    }

    /// Closes every connection of `peer`, marks it departed, and returns
    /// the former neighbors in ascending join order.
    pub fn remove_peer(&mut self, peer: PeerId, now: SimTime) -> Result<Vec<PeerId>> {
        let state = self.peer(peer)?;
        if !state.alive {
            return Err(Error::PeerDeparted(peer));
        }
        let links: Vec<(PeerId, ConnectionId)> =
            state.neighbors.iter().map(|(&p, &c)| (p, c)).collect();
        for &(_, conn) in &links {
            self.close_connection(conn)?;
        }
        let state = &mut self.peers[peer.index()];
        state.alive = false;
        state.departure_time = Some(now);
        Ok(links.into_iter().map(|(p, _)| p).collect())
    }

    /// All edges as `(i, j)` join indices with `i < j`, sorted.
    pub fn snapshot_edges(&self, alive_only: bool) -> Vec<(u32, u32)> {
        let mut edges: Vec<(u32, u32)> = self
            .connections
            .iter()
            .flatten()
            .filter(|c| {
                !alive_only || (self.is_alive(c.initiator) && self.is_alive(c.acceptor))
            })
            .map(|c| {
                let (a, b) = (c.initiator.0, c.acceptor.0);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Describes every violated structural invariant; empty when consistent.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let mut outgoing_total = 0;
        for p in &self.peers {
            if !p.alive && !p.neighbors.is_empty() {
                violations.push(format!("{} departed but holds {} connections", p.id, p.neighbors.len()));
            }
            if p.neighbors.len() > p.max_peer_set {
                violations.push(format!("{} peer set {} > {}", p.id, p.neighbors.len(), p.max_peer_set));
            }
            if p.outgoing_count > p.max_outgoing {
                violations.push(format!("{} outgoing {} > {}", p.id, p.outgoing_count, p.max_outgoing));
            }
            if p.known_addresses.contains_key(&p.id) {
                violations.push(format!("{} knows its own address", p.id));
            }
            let mut initiated = 0;
            let mut preempted_in = 0;
            for (&nb, &cid) in &p.neighbors {
                let Ok(c) = self.connection(cid) else {
                    violations.push(format!("{} references closed connection {:?}", p.id, cid));
                    continue;
                };
                if c.initiator == c.acceptor {
                    violations.push(format!("self-loop at {}", p.id));
                }
                if c.other(p.id) != nb || (c.initiator != p.id && c.acceptor != p.id) {
                    violations.push(format!("{} maps {} to a foreign connection", p.id, nb));
                    continue;
                }
                match self.peers.get(nb.index()).and_then(|q| q.neighbors.get(&p.id)) {
                    Some(&back) if back == cid => {}
                    _ => violations.push(format!("asymmetric connection {} - {}", p.id, nb)),
                }
                if c.initiator == p.id {
                    initiated += 1;
                } else if c.preempted {
                    preempted_in += 1;
                }
            }
            if initiated != p.outgoing_count {
                violations.push(format!(
                    "{} outgoing counter {} but initiated {}",
                    p.id, p.outgoing_count, initiated
                ));
            }
            if preempted_in != p.preempted_in_count {
                violations.push(format!("{} preempted-in counter drift", p.id));
            }
            outgoing_total += p.outgoing_count;
        }
        let live = self.connections.iter().flatten().count();
        if live != self.edge_count || outgoing_total != self.edge_count {
            violations.push(format!(
                "edge count {} vs {} records vs {} outgoing",
                self.edge_count, live, outgoing_total
            ));
        }
        violations
    }
}
