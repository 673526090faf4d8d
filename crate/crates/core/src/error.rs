use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("incompressible limit: poisson ratio {0} must be strictly below 0.5")]
    IncompressibleLimit(f64),

    #[error("no quadrature rule of exactness {requested} (maximum {max})")]
    QuadratureUnavailable { requested: usize, max: usize },

    #[error("assembly: {0}")]
    Assembly(String),

    #[error("linear solver: {0}")]
    Solver(String),

    #[error("relative error undefined: reference norm is zero")]
    ZeroReferenceNorm,

    #[error("order fit: {0}")]
    Fit(String),

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
