//! Crate-wide error type.

use crate::placement::Violation;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("route endpoints must differ (got `{0}` twice)")]
    DegenerateRoute(String),

    #[error("node `{0}` carries traffic but has no network profile")]
    MissingNetworkProfile(String),

    #[error("node `{0}` hosts workload but has no processor profile")]
    MissingProcessorProfile(String),

    #[error("traffic demand references non-processing node `{0}`")]
    NonProcessingEndpoint(String),

    #[error("invalid request {request}: {message}")]
    InvalidRequest { request: u32, message: String },

    #[error("invalid scenario field `{field}`: {message}")]
    InvalidScenario { field: String, message: String },

    #[error("placement is infeasible: {}", format_violations(.0))]
    Infeasible(Vec<Violation>),

    #[error("processing capacity exceeded at `{node}`: needs {needed} CPUs, only {max} available")]
    CapacityExceeded { node: String, needed: u32, max: u32 },

    #[error("search space of {size:.3e} assignments exceeds cap {cap:.3e}; use the branch-and-bound solver")]
    SearchSpaceExceeded { size: f64, cap: f64 },

    #[error("document error: {0}")]
    Document(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(violations: &[Violation]) -> String {
    let mut parts: Vec<String> = violations.iter().take(4).map(|v| v.to_string()).collect();
    if violations.len() > 4 {
        parts.push(format!("... and {} more", violations.len() - 4));
    }
    parts.join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
