pub mod analysis;
pub mod attackclass;
pub mod cli;
pub mod error;
pub mod json;
pub mod mat;
pub mod model;
pub mod netmatrix;
pub mod numerics;
pub mod simcore;
pub mod synthesis;

pub use error::{Error, Result};
