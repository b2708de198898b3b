use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("operation requires spatial dimension 1, grid has dimension {0}")]
    UnsupportedDimension(usize),

    #[error("invalid density at time level {level}: {reason}")]
    InvalidDensity { level: usize, reason: String },

    #[error("slice at time level {level} has nonzero mean {mean:e}")]
    NonZeroMean { level: usize, mean: f64 },

    #[error("mass mismatch between densities: {0:e}")]
    MassMismatch(f64),

    #[error("density vanishes at time level {level} (min {min:e}); perturbation is not admissible")]
    DegenerateDensity { level: usize, min: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("non-finite values in {stage} at time level {level}; try dt <= {suggested_dt:e}")]
    NonFinite {
        stage: &'static str,
        level: usize,
        suggested_dt: f64,
    },

    #[error("mass drift {drift:e} at time level {level} exceeds tolerance")]
    MassDrift { level: usize, drift: f64 },

    #[error("h = {h:e} outside admissible range [0, {tau:e}]")]
    StepOutOfRange { h: f64, tau: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed results file: {0}")]
    Results(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
