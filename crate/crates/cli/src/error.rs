use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Serialize(String),

    #[error("{source}")]
    Module {
        module: &'static str,
        #[source]
        source: gmbridge::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Machine-readable code; module errors are qualified by the module.
    pub fn code(&self) -> String {
        match self {
            CliError::Config(_) => "config-invalid".into(),
            CliError::Io { .. } => "io-failure".into(),
            CliError::Serialize(_) => "io-failure".into(),
            CliError::Module { module, source } => format!("{module}/{}", source.code()),
        }
    }

    /// Process exit status; 1 is reserved for failed acceptance checks.
    pub fn exit_status(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Serialize(_) => 3,
            CliError::Module { .. } => 4,
        }
    }
}

/// Tags library errors with the module that raised them.
pub trait InModule<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> InModule<T> for gmbridge::Result<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Module { module, source })
    }
}
