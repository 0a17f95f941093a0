use std::path::PathBuf;

use thiserror::Error;

use crate::devices::Violation;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular parameters: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("scenario has {} violation(s):\n{}", .0.len(), format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("reformulation error: {0}")]
    Reformulation(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("solver limit: {0}")]
    Limit(String),

    #[error("report invariants violated: {}", .0.join("; "))]
    Invariant(Vec<String>),

    #[error("enumeration needs {required} evaluations, cap is {cap}")]
    CapExceeded { required: u128, cap: u128 },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  {}: {}", x.field, x.message))
        .collect::<Vec<_>>()
        .join("\n")
}

impl From<ies_milp::MilpError> for CoreError {
    fn from(e: ies_milp::MilpError) -> Self {
        CoreError::Solver(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
