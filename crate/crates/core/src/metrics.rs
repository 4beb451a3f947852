//! Structural metrics over immutable overlay snapshots.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::overlay::{Overlay, PeerId};
use crate::sim::SimTime;

/// Largest snapshot accepted by [`oracle_diameter`].
pub const ORACLE_MAX_PEERS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct OverlaySnapshot {
    pub taken_at: SimTime,
    /// Alive peers in join order.
    pub alive_peers: Vec<PeerId>,
    /// `(i, j)` join indices, `i < j`, sorted.
    pub edges: Vec<(u32, u32)>,
    pub max_peer_set: usize,
    /// Size of the early-joiner group of the bottleneck index.
    pub first_group_size: usize,
}

impl OverlaySnapshot {
    pub fn capture(overlay: &Overlay, taken_at: SimTime, max_peer_set: usize, first_group_size: usize) -> Self {
        OverlaySnapshot {
            taken_at,
            alive_peers: overlay.alive_peers().map(|p| p.id).collect(),
            edges: overlay.snapshot_edges(true),
            max_peer_set,
            first_group_size,
        }
    }

    /// Builds a snapshot from raw parts, normalizing edge orientation and order.
    pub fn from_edges(
        alive_peers: Vec<PeerId>,
        edges: impl IntoIterator<Item = (u32, u32)>,
        max_peer_set: usize,
        first_group_size: usize,
    ) -> Self {
        let mut edges: Vec<(u32, u32)> = edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort_unstable();
        edges.dedup();
        OverlaySnapshot {
            taken_at: SimTime::ZERO,
            alive_peers,
            edges,
            max_peer_set,
            first_group_size,
        }
    }

    pub fn n_alive(&self) -> usize {
        self.alive_peers.len()
    }

    /// Dense adjacency lists over positions in `alive_peers`.
    fn adjacency(&self) -> Vec<Vec<u32>> {
        let max_id = self.alive_peers.iter().map(|p| p.0).max().map_or(0, |m| m as usize + 1);
        let mut pos = vec![u32::MAX; max_id];
        for (i, p) in self.alive_peers.iter().enumerate() {
            pos[p.index()] = i as u32;
        }
        let mut adj = vec![Vec::new(); self.alive_peers.len()];
        for &(a, b) in &self.edges {
            let (pa, pb) = (pos[a as usize], pos[b as usize]);
            adj[pa as usize].push(pb);
            adj[pb as usize].push(pa);
        }
        adj
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSnapshot {
    pub taken_at: SimTime,
    pub bottleneck_index: f64,
    pub avg_peer_set: f64,
    /// Longest shortest path; `0` when the overlay is partitioned.
    pub diameter: u32,
    pub connected: bool,
    pub n_alive: usize,
    pub n_edges: usize,
}

impl MetricsSnapshot {
    pub fn compute(s: &OverlaySnapshot) -> Self {
        let (diameter, connected) = diameter_and_connectivity(s);
        MetricsSnapshot {
            taken_at: s.taken_at,
            bottleneck_index: bottleneck_index(s),
            avg_peer_set: average_peer_set_size(s),
            diameter,
            connected,
            n_alive: s.n_alive(),
            n_edges: s.edges.len(),
        }
    }
}

/// Share of possible links between the first `first_group_size` joiners and
/// everyone else that actually exist. The denominator is fixed at
/// `first_group_size * max_peer_set`.
pub fn bottleneck_index(s: &OverlaySnapshot) -> f64 {
    let denom = s.first_group_size * s.max_peer_set;
    if denom == 0 {
        return 0.0;
    }
    let boundary = s.first_group_size as u32;
    let cross = s
        .edges
        .iter()
        .filter(|&&(a, b)| (a < boundary) != (b < boundary))
        .count();
    cross as f64 / denom as f64
}

pub fn average_peer_set_size(s: &OverlaySnapshot) -> f64 {
    if s.alive_peers.is_empty() {
        return 0.0;
    }
    2.0 * s.edges.len() as f64 / s.alive_peers.len() as f64
}

/// Longest shortest-path hop count, or `0` for a partitioned overlay or
/// one with fewer than two peers.
pub fn diameter(s: &OverlaySnapshot) -> u32 {
    diameter_and_connectivity(s).0
}

pub fn is_connected(s: &OverlaySnapshot) -> bool {
    diameter_and_connectivity(s).1
}

fn diameter_and_connectivity(s: &OverlaySnapshot) -> (u32, bool) {
    let n = s.n_alive();
    if n <= 1 {
        return (0, true);
    }
    let adj = s.adjacency();
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::with_capacity(n);
    let mut longest = 0;
    for src in 0..n {
        dist.fill(u32::MAX);
        dist[src] = 0;
        queue.clear();
        queue.push_back(src as u32);
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            longest = longest.max(du);
            for &v in &adj[u as usize] {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = du + 1;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        if reached < n {
            return (0, false);
        }
    }
    (longest, true)
}

/// Diameter by Floyd-Warshall all-pairs shortest paths. Test-scale only.
pub fn oracle_diameter(s: &OverlaySnapshot) -> Result<u32> {
    let n = s.n_alive();
    if n > ORACLE_MAX_PEERS {
        return Err(Error::OracleScale {
            limit: ORACLE_MAX_PEERS,
            actual: n,
        });
    }
    if n <= 1 {
        return Ok(0);
    }
    const INF: u32 = u32::MAX / 2;
    let index_of = |p: u32| s.alive_peers.iter().position(|q| q.0 == p);
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in &s.edges {
        if let (Some(i), Some(j)) = (index_of(a), index_of(b)) {
            d[i][j] = 1;
            d[j][i] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    let mut longest = 0;
    for row in &d {
        for &x in row {
            if x >= INF {
                return Ok(0);
            }
            longest = longest.max(x);
        }
    }
    Ok(longest)
}

/// Edges in join-index coordinates; a dot at `(i, j)` and `(j, i)` of the
/// connectivity matrix for every entry.
pub fn connectivity_matrix(s: &OverlaySnapshot) -> Vec<(u32, u32)> {
    let mut edges = s.edges.clone();
    edges.sort_unstable();
    edges
}

/// Tab-separated edge list, one `i<TAB>j` pair per line.
pub fn format_edge_list(edges: &[(u32, u32)]) -> String {
    let mut out = String::with_capacity(edges.len() * 10);
    for (i, j) in edges {
        let _ = writeln!(out, "{i}\t{j}");
    }
    out
}
