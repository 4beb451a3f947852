//! Discrete-event simulation of tracker-driven swarm overlay construction
//! during a flash crowd.
//!
//! A run replays a flash-crowd arrival schedule against a central tracker
//! and a connection policy (the default tracker policy, or preemption of
//! existing connections), then measures the resulting overlay: the
//! bottleneck index between the earliest joiners and everyone else, the
//! average peer-set size and the overlay diameter.

pub mod config;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod overlay;
pub mod sim;
pub mod simulation;
pub mod strategy;
pub mod tracker;
pub mod workload;

pub use error::{Error, Result};
pub use harness::{AggregateRow, ExperimentConfig, RunRecord, SweepResult};
pub use metrics::{MetricsSnapshot, OverlaySnapshot};
pub use overlay::{DiscoverySource, Overlay, PeerId};
pub use sim::{RunSeed, SimTime};
pub use simulation::{RunConfig, RunOutput, Simulation};
pub use strategy::{PreemptionConfig, StrategyKind};
