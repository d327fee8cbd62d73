use std::path::PathBuf;

use thiserror::Error;

/// Network layer an integration fault originated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Sensory(usize),
    Interneuron,
    Motor,
    Baseline,
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Layer::Sensory(i) => write!(f, "sensory neuron {}", i + 1),
            Layer::Interneuron => f.write_str("interneuron"),
            Layer::Motor => f.write_str("motor neuron"),
            Layer::Baseline => f.write_str("baseline detector"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("integration fault in {layer}: non-finite state (v={v}, input={input})")]
    IntegrationFault { layer: Layer, v: f64, input: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("latency {delta_t_ms} ms is below calibrated minimum {dt_min_ms} ms")]
    CalibrationViolation { delta_t_ms: f64, dt_min_ms: f64 },

    #[error("decoder calibration failed: {0}")]
    CalibrationFailure(String),

    #[error("unknown synapse index {0}")]
    UnknownSynapse(usize),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("timestamps not strictly increasing at row {row} ({prev} s then {next} s)")]
    NonMonotoneTimestamps { row: usize, prev: f64, next: f64 },

    #[error("non-numeric field at row {row}: {field:?}")]
    NonNumericField { row: usize, field: String },

    #[error("malformed stimulus file: {0}")]
    MalformedTrace(String),

    #[error("stimulus trace contains no samples")]
    EmptyTrace,

    #[error("temperature {0} °C outside physical bounds [0, 120]")]
    TemperatureOutOfBounds(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
