use std::path::Path;

use thiserror::Error;

use ringtag_core::calibration::CalibrationError;
use ringtag_core::contact::ContactError;
use ringtag_core::geometry::GeometryError;
use ringtag_core::layout::LayoutError;
use ringtag_core::pose::PoseError;
use ringtag_core::sensitivity::SensitivityError;
use ringtag_core::simulator::SimError;

/// Failure class; decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Numerical => 2,
            ErrorKind::Io => 3,
        }
    }
}

#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: String,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, stage: &str, message: impl Into<String>) -> Self {
        Self {
            kind,
            stage: stage.to_string(),
            message: message.into(),
        }
    }

    pub fn validation(stage: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Validation, stage, message)
    }

    pub fn io(stage: &str, path: &Path, err: impl std::fmt::Display) -> Self {
        Self::new(ErrorKind::Io, stage, format!("{}: {err}", path.display()))
    }

    /// Malformed content in an input file.
    pub fn parse(stage: &str, path: &Path, err: impl std::fmt::Display) -> Self {
        Self::new(ErrorKind::Validation, stage, format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

/// Classifies core errors for a given stage.
pub trait Classify {
    fn kind(&self) -> ErrorKind;

    fn at(&self, stage: &str) -> CliError
    where
        Self: std::fmt::Display,
    {
        CliError::new(self.kind(), stage, self.to_string())
    }
}

impl Classify for GeometryError {
    fn kind(&self) -> ErrorKind {
        match self {
            GeometryError::NonPositiveDepth(_) | GeometryError::NonFinite(_) => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        }
    }
}

impl Classify for LayoutError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Validation
    }
}

impl Classify for PoseError {
    fn kind(&self) -> ErrorKind {
        match self {
            PoseError::Geometry(g) => g.kind(),
            PoseError::DegenerateConfiguration | PoseError::BehindCamera => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        }
    }
}

impl Classify for SimError {
    fn kind(&self) -> ErrorKind {
        match self {
            SimError::Geometry(g) => g.kind(),
            _ => ErrorKind::Validation,
        }
    }
}

impl Classify for CalibrationError {
    fn kind(&self) -> ErrorKind {
        match self {
            CalibrationError::RankDeficient { .. } | CalibrationError::ZeroVariance => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        }
    }
}

impl Classify for SensitivityError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Validation
    }
}

impl Classify for ContactError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Validation
    }
}
