use mfpc_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{failed} oracle check(s) failed")]
    OracleFailure { failed: usize },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

impl CliError {
    /// 0 ok, 1 other failure, 2 configuration, 3 non-convergence, 4 oracle mismatch.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::OracleFailure { .. } => 4,
            CliError::Write { .. } => 1,
            CliError::Core(e) => match e {
                CoreError::NonConvergence(_) => 3,
                CoreError::InvalidDistribution(_)
                | CoreError::EmptyPopulation
                | CoreError::InvalidIdentifier(_)
                | CoreError::InvalidParams(_)
                | CoreError::InvalidAlpha(_)
                | CoreError::InvalidConfig(_)
                | CoreError::NonScalarBeta
                | CoreError::TableParse { .. } => 2,
                _ => 1,
            },
        }
    }
}
