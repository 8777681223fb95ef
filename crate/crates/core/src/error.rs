use thiserror::Error;

/// Errors produced by the solvers and data model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid path in entry {entry}: {reason}")]
    InvalidPath { entry: usize, reason: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{what} exceeds guard of {limit}")]
    GuardExceeded { what: String, limit: u64 },

    #[error("flow-carrying subgraph contains a directed cycle through node {node}")]
    NotADag { node: usize },

    #[error("no candidate passed the eps-Nash test; raise eps or the path-length cap")]
    NoCandidate,

    #[error("matching: {0}")]
    Matching(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error reports an infeasible problem rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_) | Error::NoCandidate)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
