//! Deterministic discrete-event engine, scenarios and traces.

mod engine;
mod matrix;
mod scenario;
mod trace;

use thiserror::Error;

use crate::network::NetworkError;
use crate::node::{NodeCoord, NodeError};

pub use engine::{expected_awareness, run, run_batch, Awareness, Expectation, RunOutput, RunStats, World};
pub use matrix::{fault_matrix, write_matrix, MatrixRow, FAULT_TIME, MATRIX_DIMS, MATRIX_DURATION};
pub use scenario::{Protocol, Scenario, Violation};
pub use trace::{summarize, FaultSummary, Summary, Trace, TraceError, TraceEvent, END_KIND};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
    #[error("node {0}: {1}")]
    Node(NodeCoord, NodeError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}
