use thiserror::Error;

use crate::acttree::{EdgeId, NodeId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box [{x1}, {y1}, {x2}, {y2}]: need x1 < x2 and y1 < y2")]
    InvalidBBox { x1: i32, y1: i32, x2: i32, y2: i32 },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),

    #[error("{to} is not an ancestor of {from}")]
    NotAncestor { from: NodeId, to: NodeId },

    #[error("nodes {0} and {1} are in an ancestor relation")]
    AncestorRelation(NodeId, NodeId),

    #[error("unsupported {format} version {found} (expected {expected})")]
    VersionMismatch {
        format: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("zero-norm vector")]
    ZeroVector,

    #[error("InfoNCE needs at least one negative")]
    NoNegatives,

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("click actions are scored with the grounding reward")]
    ClickNotScorable,

    #[error("environment: {0}")]
    Environment(String),

    #[error("agent: {0}")]
    Agent(String),

    #[error("workload needs at least one template")]
    EmptyTemplates,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
