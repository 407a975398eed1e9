use centroaffine::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serialize(String),
}

impl CliError {
    /// 2 for usage and configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Numerical(e) => match e {
                Error::UnsupportedDimension(_)
                | Error::InvalidResolution(_)
                | Error::InvalidParameter(_)
                | Error::GridMismatch(_)
                | Error::StabilityBound { .. }
                | Error::ExcludedExponent(_) => 2,
                _ => 3,
            },
            CliError::Serialize(_) => 3,
        }
    }
}
