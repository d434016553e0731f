pub mod algebra;
pub mod cohomology;
pub mod error;
pub mod expr;
pub mod form;
pub mod gallery;
pub mod linalg;
pub mod model;
pub mod moser;
pub mod rank;
pub mod reeb;
pub mod sample;

pub use error::{Error, Result};
pub use form::{DifferentialForm, VectorFieldRep};
pub use model::CoframeModel;
