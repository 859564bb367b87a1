use thiserror::Error;

use crate::structures::AgentId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),

    #[error("unknown atom `{0}`")]
    UnknownAtom(String),

    #[error("invalid atom name `{0}`")]
    InvalidAtomName(String),

    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },

    #[error("malformed state: {0}")]
    MalformedState(String),

    #[error("action {action} of agent {agent} is not enabled at state {state}")]
    NotEnabled {
        agent: AgentId,
        action: String,
        state: String,
    },

    #[error("transition table has no row for state {state} and joint action {action}")]
    TableMiss { state: String, action: String },

    #[error("protocol table has no entry for agent {agent} at state {state}")]
    MissingProtocolEntry { agent: AgentId, state: String },

    #[error("{what} exceeds cap: {needed} > {limit}")]
    CapExceeded {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("strategy error: {0}")]
    Strategy(String),

    #[error("malformed path: {0}")]
    MalformedPath(String),

    #[error("agent {0} has no goal")]
    MissingGoal(AgentId),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    /// True for errors caused by a resource guard rather than malformed input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::CapExceeded { .. })
    }
}
