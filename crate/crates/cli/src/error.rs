use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Run(#[from] rank_surfaces::Error),

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    AllReplicatesFailed(String),
}

impl CliError {
    /// Process exit status: 2 for bad input, 3 for failures during a run.
    /// Too few initial sites for a fitted kernel counts as bad input.
    pub fn exit_code(&self) -> u8 {
        use rank_surfaces::Error;
        match self {
            CliError::Config(_) => 2,
            CliError::Run(Error::InvalidArgument(_) | Error::InsufficientData { .. }) => 2,
            _ => 3,
        }
    }
}
