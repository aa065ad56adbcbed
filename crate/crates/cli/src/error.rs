use std::path::{Path, PathBuf};

use outage_core::dataset::DatasetError;
use outage_core::detector::DetectError;
use outage_core::evaluate::EvaluateError;
use outage_core::grid::GridError;
use outage_core::locator::LocateError;
use outage_core::scenario::ScenarioError;
use thiserror::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_MODEL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Model(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Data(_) => EXIT_DATA,
            CliError::Model(_) => EXIT_MODEL,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_owned(),
            message: err.to_string(),
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::Io(_)
            | GridError::Parse(_)
            | GridError::EmptyNetwork
            | GridError::DuplicateId { .. }
            | GridError::InvalidCoordinate { .. }
            | GridError::NonpositiveReactance { .. }
            | GridError::SelfLoop { .. }
            | GridError::UnknownSlack(_)
            | GridError::InvalidBase(_) => CliError::Data(e.to_string()),
            _ => CliError::Model(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Grid(g) => g.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Grid(g) => g.into(),
            ScenarioError::NoMonitoredBranch => CliError::Model(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<DetectError> for CliError {
    fn from(e: DetectError) -> Self {
        match e {
            DetectError::InvalidParams(_) | DetectError::Filter(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<LocateError> for CliError {
    fn from(e: LocateError) -> Self {
        match e {
            LocateError::Grid(g) => g.into(),
            LocateError::InvalidWindows(_) | LocateError::Filter(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvaluateError> for CliError {
    fn from(e: EvaluateError) -> Self {
        match e {
            EvaluateError::NoMonitoredBranch(_) => CliError::Model(e.to_string()),
            EvaluateError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            EvaluateError::Grid(g) => g.into(),
            EvaluateError::Scenario(s) => s.into(),
            EvaluateError::Detect(d) => d.into(),
            EvaluateError::Locate(l) => l.into(),
            EvaluateError::Dataset(d) => d.into(),
        }
    }
}
