use thiserror::Error;

/// Errors produced by the simulator and the tomography estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mode layouts differ")]
    LayoutMismatch,

    #[error("unknown mode label `{0}`")]
    UnknownMode(String),

    #[error("invalid mode layout: {0}")]
    InvalidLayout(String),

    #[error("photon number {count} exceeds cutoff {n_max} on mode `{mode}`")]
    CutoffOverflow { mode: String, count: u32, n_max: u8 },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("pump mode `{mode}` carries {count} photons; the closed-form crystal map needs at most 1")]
    PumpOccupation { mode: String, count: u8 },

    #[error("zero-probability branch: {0}")]
    ZeroProbability(String),

    #[error("efficiency {eta} outside {range}")]
    InvalidEfficiency { eta: f64, range: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("quadrature did not converge for {context}: error estimate {error:e} > tolerance {tolerance:e}")]
    QuadratureNonConvergence {
        context: String,
        error: f64,
        tolerance: f64,
    },

    #[error("{samples} samples cannot fill {blocks} blocks")]
    InsufficientSamples { samples: usize, blocks: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed state dump at line {line}: {message}")]
    StateDump { line: usize, message: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
