use thiserror::Error;

/// Errors raised across the modelling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("non-positive price {value} for asset {asset} on {date}")]
    NonPositivePrice { asset: String, date: String, value: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("argument outside analyticity strip: {0}")]
    OutsideStrip(String),

    #[error("inversion grid too coarse: normalization drift {drift:e}")]
    GridTooCoarse { drift: f64 },

    #[error("optimizer did not converge: {0}")]
    NoConvergence(String),

    #[error("non-stationary model: spectral radius {0} >= 1")]
    NonStationary(f64),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("regime {regime} too sparse: {count} observations, need {needed}")]
    SparseRegime { regime: usize, count: usize, needed: usize },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("unbounded problem: {0}")]
    Unbounded(String),

    #[error("estimation step {step} failed: {source}")]
    Step {
        step: u8,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(step: u8) -> impl FnOnce(Error) -> Error {
        move |e| Error::Step { step, source: Box::new(e) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
