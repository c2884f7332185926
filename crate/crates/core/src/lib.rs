pub mod cli;
pub mod conformal;
pub mod error;
pub mod essential;
pub mod expr;
pub mod geodesic;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod zeroset;

pub use error::{Error, Result};
