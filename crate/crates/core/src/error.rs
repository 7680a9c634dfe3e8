use thiserror::Error;

/// Errors raised by the estimation toolkit.
///
/// Numeric payloads are carried as `f64` so the error type stays
/// independent of the scalar the computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QslError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("state is not normalized (norm² = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid spin j = {0}: must be a positive half-integer")]
    InvalidSpin(f64),

    #[error("operation requires spin {expected}, got spin {found}")]
    WrongSpin { expected: f64, found: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("fidelity target {0} outside [0, 1]")]
    InvalidFidelity(f64),

    #[error("rotating-frame Hamiltonian is time dependent (relative deviation {deviation:e})")]
    FrameNotStationary { deviation: f64 },

    #[error("time step {dt:e} s exceeds the resolution limit {limit:e} s")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("fidelity {target} never reached within horizon (minimum {min_fidelity})")]
    FidelityNeverReached { target: f64, min_fidelity: f64 },

    #[error("evolution speed is zero: the state is stationary under the Hamiltonian")]
    ZeroSpeed,

    #[error("time {t:e} s outside [{lo:e}, {hi:e}] s")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("inconsistent magnetization readout: {0}")]
    InconsistentReadout(String),

    #[error("temperature must be positive, got {0} K")]
    InvalidTemperature(f64),

    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),

    #[error("root bracketing failed: {0}")]
    NoBracket(String),
}

pub type Result<T> = std::result::Result<T, QslError>;
