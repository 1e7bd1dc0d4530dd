use thiserror::Error;

/// Failures of the experiment runner, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// The problem file does not match the schema.
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown preset `{0}` (available: {1})")]
    UnknownPreset(String, String),
    /// The constraint set is empty or the start cannot be made feasible.
    #[error("infeasible problem: {0}")]
    Infeasible(String),
    /// The optimizer stopped without meeting its certificate.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("solver error: {0}")]
    Solver(shapeopt::Error),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) | CliError::UnknownPreset(..) => 2,
            CliError::NonConvergence(_) | CliError::Solver(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), message: err.to_string() }
    }
}

impl From<shapeopt::Error> for CliError {
    fn from(e: shapeopt::Error) -> Self {
        use shapeopt::Error as E;
        match e {
            E::Infeasible(m) => CliError::Infeasible(m),
            E::Degenerate { .. } => CliError::Infeasible(e.to_string()),
            E::Io(m) => CliError::Io { path: String::new(), message: m },
            other => CliError::Solver(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
