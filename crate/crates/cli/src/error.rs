use std::path::PathBuf;

use fractal_spectra::{AsymptError, RenewalError, SelfSimError, SpectralError};
use thiserror::Error;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "numerical",
            CliError::Io { .. } => "io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<SelfSimError> for CliError {
    fn from(e: SelfSimError) -> Self {
        match e {
            SelfSimError::FixedPointSingular(_) | SelfSimError::NoSpectralOrder => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::SelfSim(inner) => inner.into(),
            SpectralError::InvalidGrid(_) | SpectralError::EmptyMesh(_) => {
                CliError::Validation(e.to_string())
            }
            SpectralError::RayExhausted { .. } | SpectralError::NotConverged { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<RenewalError> for CliError {
    fn from(e: RenewalError) -> Self {
        match e {
            RenewalError::SeriesDivergence => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<AsymptError> for CliError {
    fn from(e: AsymptError) -> Self {
        CliError::Validation(e.to_string())
    }
}
