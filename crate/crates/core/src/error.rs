use thiserror::Error;

use crate::expr::ParseError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("in {location}: {source}")]
    Parse {
        location: String,
        #[source]
        source: ParseError,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("forms or fields belong to different models")]
    ModelMismatch,
    #[error("division by zero in component {component} at {point:?}, t = {t}")]
    Eval { component: String, point: Vec<f64>, t: f64 },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("degree error: {0}")]
    Degree(String),
    #[error("class is not constant on the sampling (min {}, max {})", .0.min, .0.max)]
    NonConstantClass(Box<crate::rank::ClassReport>),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("integration aborted: {0}")]
    Integration(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
