use std::path::PathBuf;

use crate::overlay::{ConnectionId, PeerId};
use crate::sim::SimTime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot schedule at {at} min, clock is already at {now} min")]
    ScheduleInPast { at: SimTime, now: SimTime },
    #[error("random draw from an empty range")]
    EmptyRange,
    #[error("invalid simulated time: {0}")]
    InvalidTime(f64),

    #[error("unknown peer {0}")]
    UnknownPeer(PeerId),
    #[error("peer {0} has already departed")]
    PeerDeparted(PeerId),
    #[error("peer {0} is already registered")]
    AlreadyRegistered(PeerId),
    #[error("peer {0} cannot connect to itself")]
    SelfConnection(PeerId),
    #[error("peers {0} and {1} are already connected")]
    DuplicateConnection(PeerId, PeerId),
    #[error("peer {0} has no spare outgoing slot")]
    OutgoingLimit(PeerId),
    #[error("peer {0} has a full peer set")]
    PeerSetFull(PeerId),
    #[error("unknown connection {0:?}")]
    UnknownConnection(ConnectionId),
    #[error("peer {0} has an empty peer set")]
    EmptyPeerSet(PeerId),

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("oracle limited to {limit} peers, snapshot has {actual}")]
    OracleScale { limit: usize, actual: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
