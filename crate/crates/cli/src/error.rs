use std::fmt;
use std::path::Path;

use prism_core::colorizer::CalibrationError;
use prism_core::io::FormatError;
use prism_core::metrics::MetricsError;
use prism_core::SampleError;

/// Process exit codes.
pub mod code {
    pub const IO: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const COLORLESS: u8 = 3;
    pub const EMPTY: u8 = 4;
    pub const CALIBRATION: u8 = 5;
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(code::USAGE, message)
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::new(code::IO, format!("{}: {err}", path.display()))
    }

    /// Tags a format error with the file it came from.
    pub fn format(path: &Path, err: FormatError) -> Self {
        match err {
            FormatError::EmptyCloud => Self::new(code::EMPTY, format!("{}: {err}", path.display())),
            FormatError::Io { .. } => Self::new(code::IO, err.to_string()),
            other => Self::io(path, other),
        }
    }

    pub fn metrics(path: &Path, err: MetricsError) -> Self {
        let code = match err {
            MetricsError::EmptyCloud => code::EMPTY,
            MetricsError::Colorless => code::COLORLESS,
            MetricsError::InvalidBins { .. } => code::USAGE,
        };
        Self::new(code, format!("{}: {err}", path.display()))
    }

    pub fn sample(path: &Path, err: SampleError) -> Self {
        let code = match err {
            SampleError::Colorless => code::COLORLESS,
            _ => code::USAGE,
        };
        Self::new(code, format!("{}: {err}", path.display()))
    }

    pub fn calibration(path: &Path, err: CalibrationError) -> Self {
        Self::new(code::CALIBRATION, format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
