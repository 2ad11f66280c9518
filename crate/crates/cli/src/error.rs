use std::fmt;

use serde_json::json;

/// Failure of a run. Configuration and input problems exit with 2,
/// failures during the computation with 3.
#[derive(Debug)]
pub enum CliError {
    Config { message: String, line: Option<usize>, column: Option<usize> },
    Numerical(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self::Config { message: message.into(), line: None, column: None }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Numerical(_) => 3,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Self::Config { message, line, column } => json!({
                "error": "invalid_config",
                "message": message,
                "line": line,
                "column": column,
                "exit_code": 2,
            }),
            Self::Numerical(message) => json!({
                "error": "numerical_failure",
                "message": message,
                "exit_code": 3,
            }),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config { message, line: Some(l), column: Some(c) } => write!(f, "line {l}, column {c}: {message}"),
            Self::Config { message, .. } | Self::Numerical(message) => f.write_str(message),
        }
    }
}

impl From<psipi::Error> for CliError {
    fn from(e: psipi::Error) -> Self {
        use psipi::Error as E;
        match e {
            E::Parse { line, message } => Self::Config { message, line: Some(line), column: None },
            E::Io(_) | E::Json(_) | E::Csv(_) | E::InvalidArgument(_) | E::Unsupported(_) | E::ShapeMismatch(_) => {
                Self::config(e.to_string())
            }
            other => Self::Numerical(other.to_string()),
        }
    }
}
