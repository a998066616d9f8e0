use thiserror::Error;

use crate::side_channel::ChannelError;
use crate::wire::WireError;

/// Errors surfaced by environment operations, local or remote.
///
/// Remote failures map onto the same variants so callers cannot tell a served
/// environment from an in-process one by its error taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("environment is closed")]
    EnvClosed,
    #[error("step called before reset")]
    NotReset,
    #[error("episode is over; reset required")]
    EpisodeOver,
    #[error("action set does not match agent set: {0}")]
    MissingAgent(String),
    #[error("value does not conform to space: {0}")]
    SpaceMismatch(String),
    #[error("environment has {0} agents; a single-agent environment is required")]
    MultiAgentUnsupported(usize),
    #[error("unknown agent: {0}")]
    UnknownAgent(String),
    #[error("agent already owned by another client: {0}")]
    AgentTaken(String),
    #[error("connection does not own agent: {0}")]
    NotOwner(String),
    #[error("protocol version mismatch: {0}")]
    VersionMismatch(String),
    #[error("round not completed before the barrier timeout")]
    BarrierTimeout,
    #[error("round aborted: {0}")]
    RoundAborted(String),
    #[error("a client disconnected mid-round: {0}")]
    ClientLost(String),
    #[error("a reset round is in progress")]
    ResetInProgress,
    #[error("connection refused: {0}")]
    ConnectionRefused(String),
    #[error("connection lost: {0}")]
    ConnectionLost(String),
    #[error("request timed out")]
    RequestTimeout,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("environment failure: {0}")]
    Internal(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

impl From<WireError> for EnvError {
    fn from(e: WireError) -> Self {
        EnvError::Protocol(e.to_string())
    }
}
