//! Joint network reconstruction (NR) and community detection (CD) from
//! observed nodal dynamics.
//!
//! The library provides:
//!
//! * [`graph`] — undirected binary networks, synthetic generators
//!   (ER/BA/WS/NW) and edge-list loaders;
//! * [`dynamics`] — evolutionary-game and resistor-network simulators and
//!   the per-node linear systems they induce;
//! * [`objectives`] — reconstruction residual/sparsity, modularity,
//!   normalized mutual information, MCC and Pareto dominance;
//! * [`moea`] — nondominated sorting, crowding, environment selection and
//!   the variation operators for both tasks;
//! * [`nc`] — the multitasking optimizer with bidirectional knowledge
//!   transfer between the NR and CD tasks, plus the transfer-free
//!   reconstruct-then-detect baseline.

pub mod dynamics;
pub mod graph;
pub mod moea;
pub mod nc;
pub mod objectives;

pub use graph::{CommunityPartition, Network};

/// Errors shared across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
