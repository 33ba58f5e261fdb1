use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layer sizes {0:?}: need [input, hidden.., output] with positive widths")]
    InvalidLayerSizes(Vec<usize>),

    #[error("{context}: expected length {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid bounds: require a < b, got a={a}, b={b}")]
    InvalidBounds { a: f64, b: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown problem id {0:?}")]
    UnknownProblem(String),

    #[error("invalid spatial dimension {dim} for problem {id:?}")]
    InvalidDimension { id: String, dim: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("non-finite {what}{}", sample_suffix(*.sample))]
    NonFinite {
        what: &'static str,
        sample: Option<usize>,
    },

    #[error("quadrature point x={0} outside [-1, 1]")]
    QuadratureOutOfDomain(f64),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("samples have zero variance (point mass); no density estimate possible")]
    PointMass,

    #[error("zero denominator in relative error")]
    ZeroDenominator,

    #[error("degenerate test direction (norm below 1e-12)")]
    DegenerateDirection,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn sample_suffix(sample: Option<usize>) -> String {
    match sample {
        Some(i) => format!(" at batch sample {i}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
