use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0:?} lies outside the warp domain")]
    OutsideDomain(Vec<f64>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sampled scalar map is not strictly increasing near {0}")]
    NotIncreasing(f64),
    #[error("non-positive sample value {value} at {at:?}")]
    NonPositive { value: f64, at: Vec<f64> },
    #[error("projection onto the zero vector is undefined")]
    ZeroVector,
    #[error("incompatible sampling: {0}")]
    IncompatibleSampling(String),
    #[error("conjugate gradients stagnated after {iterations} iterations (relative residual {residual:e})")]
    CgStagnation { iterations: usize, residual: f64 },
    #[error("empty sampling: no channels intersect the grid")]
    EmptySampling,
    #[error("raster too coarse: {0}")]
    RasterTooCoarse(String),
    #[error("index mismatch: {0}")]
    IndexMismatch(String),
    #[error("missing control weight")]
    MissingControlWeight,
    #[error("prototypes are numerically orthogonal; supply an auxiliary prototype")]
    OrthogonalPrototypes,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
