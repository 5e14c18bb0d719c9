use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("degenerate mass in {0} run(s)")]
    Degenerate(usize),
    #[error("{0} validation check(s) failed")]
    ValidationFailed(usize),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Oracle(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::ValidationFailed(_) => 4,
        }
    }
}

impl From<barycenter::Error> for CliError {
    fn from(e: barycenter::Error) -> Self {
        match e {
            barycenter::Error::Oracle(msg) => CliError::Oracle(msg),
            barycenter::Error::DegenerateMass => CliError::Degenerate(1),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
