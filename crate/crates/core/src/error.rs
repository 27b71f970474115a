use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One failed invariant in a scenario, keyed by the config path of the
/// offending field (e.g. `controller.lambda`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl ValidationIssue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("linear system is numerically singular")]
    SingularSystem,

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("agents {agents:?} cannot be reached from the leader")]
    LeaderUnreachable { agents: Vec<usize> },

    #[error("normalized error {xi} outside funnel (-{lower}, {upper})")]
    OutOfEnvelope { xi: f64, lower: f64, upper: f64 },

    #[error("matrix is not Hurwitz (max eigenvalue real part {max_real_part})")]
    NotHurwitz { max_real_part: f64 },

    #[error("gain `{name}` must be positive, got {value}")]
    NonpositiveGain { name: &'static str, value: f64 },

    #[error("agent {agent} has zero in-degree plus pinning and receives no information")]
    ZeroRowDegree { agent: usize },

    #[error("input matrix of agent {agent} is not invertible")]
    SingularInput { agent: usize },

    #[error("missing gain-verifier bound `{0}`")]
    MissingBounds(&'static str),

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("scenario validation failed:\n{}", format_issues(.0))]
    Validation(Vec<ValidationIssue>),

    #[error("parse error: {0}")]
    Parse(String),
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n")
}
