//! Error type shared across the toolkit.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter set, configuration, or argument.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A quantity that must be finite was NaN or infinite.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Numerical integration blew up.
    #[error("numerical divergence at t = {t} s ({context})")]
    Divergence { t: f64, context: String },

    /// A cubature point could not be propagated.
    #[error("cubature point {index} diverged during propagation")]
    PointDiverged { index: usize },

    /// The requested operating point cannot be realized.
    #[error("infeasible operating point: {0}")]
    Infeasible(String),

    /// A trace or stream file failed validation.
    #[error("trace format error at row {row}: {message}")]
    TraceFormat { row: usize, message: String },

    /// Covariance could not be factorized even after diagonal repair.
    #[error("covariance not repairable: min eigenvalue {min_eig:.3e}, eigenvalues {eigenvalues:?}")]
    CovarianceNotRepairable { min_eig: f64, eigenvalues: Vec<f64> },

    /// Innovation covariance was numerically singular.
    #[error("singular innovation covariance")]
    SingularInnovation,

    /// A standardized residual could not be formed.
    #[error("zero residual spread on channel {channel}")]
    ZeroResidualSpread { channel: usize },

    /// FDI injection requested without filter feedback for a windowed sample.
    #[error("missing filter feedback for windowed sample {index}")]
    MissingFeedback { index: usize },

    /// Identification threshold used before calibration.
    #[error("identification threshold not calibrated")]
    Uncalibrated,

    /// Index comparison over mismatched sample windows.
    #[error("evaluation window mismatch: {0}")]
    WindowMismatch(String),

    /// All samples were excluded from an index computation.
    #[error("index undefined: {0}")]
    IndexUndefined(String),

    /// Pipeline stage failure with location.
    #[error("stage '{stage}' failed at sample {index}: {source}")]
    Stage {
        stage: &'static str,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    ConfigParse(String),
}

impl Error {
    pub fn stage(stage: &'static str, index: usize, source: Error) -> Self {
        Error::Stage {
            stage,
            index,
            source: Box::new(source),
        }
    }

    /// Process exit code convention: 1 for validation problems, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Invalid(_)
            | Error::TraceFormat { .. }
            | Error::ConfigParse(_)
            | Error::WindowMismatch(_)
            | Error::IndexUndefined(_)
            | Error::Io(_) => 1,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
