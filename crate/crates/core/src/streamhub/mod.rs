//! Bit collection from many players and distribution to labs.
//!
//! [`Hub`] holds all state and does no I/O. [`server`] wraps it in a TCP
//! service, [`client`] speaks the same protocol from the other end, and
//! [`sim`] drives it on a virtual clock.

pub mod archive;
pub mod audit;
pub mod client;
pub mod distributor;
pub mod feedback;
pub mod hub;
pub mod monitor;
pub mod protocol;
pub mod replay;
pub mod server;
pub mod session;
pub mod sim;

use thiserror::Error;

pub use archive::ArchiveReservoir;
pub use audit::{audit, AuditConfig, AuditReport, LabContamination};
pub use distributor::{Allocation, Delivery, Distributor, IntervalResult, Subscription};
pub use hub::{Hub, HubConfig, HubStats, IntervalClose, LiveBit, TickBuffer, TickOutcome};
pub use monitor::{read_log, write_log, LogRecord};
pub use protocol::{LabCount, Message};
pub use replay::{replay, shared_prefix_holds, ReplayReport};
pub use session::UserSession;

#[derive(Debug, Error)]
pub enum HubError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("lab {0:?} is already subscribed")]
    DuplicateLab(String),
    #[error("unknown lab {0:?}")]
    UnknownLab(String),
    #[error("bad hub config: {0}")]
    Config(String),
    #[error("malformed log line {line} at byte {offset}: {reason}")]
    MalformedLog { line: usize, offset: u64, reason: String },
    #[error("log truncated at byte {offset}: {reason}")]
    TruncatedLog { offset: u64, reason: String },
    #[error("replay failed: {0}")]
    Replay(String),
    #[error(transparent)]
    Lab(#[from] crate::lhv::LhvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HubError>;
