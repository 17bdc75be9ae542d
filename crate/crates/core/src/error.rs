use thiserror::Error;

#[derive(Debug, Error)]
pub enum EcatError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = EcatError> = std::result::Result<T, E>;

impl EcatError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        EcatError::Io { path: path.as_ref().display().to_string(), source }
    }
}
