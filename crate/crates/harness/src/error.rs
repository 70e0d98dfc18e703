use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("log has no rows")]
    EmptyLog,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: gossip_core::Error,
    },
}

impl HarnessError {
    /// Name printed by the CLI on failure.
    pub fn class_name(&self) -> &'static str {
        match self {
            HarnessError::Parse { .. } => "ParseError",
            HarnessError::Validation(_) => "ValidationError",
            HarnessError::Config(_) => "ConfigError",
            HarnessError::EmptyLog => "EmptyLog",
            HarnessError::Io { .. } => "IoError",
            HarnessError::Core { source, .. } => source.class_name(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Attaches scenario context to core errors.
pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for gossip_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| HarnessError::Core {
            context: what(),
            source,
        })
    }
}
