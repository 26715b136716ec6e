pub mod cli;
pub mod error;
pub mod graph;
pub mod homogeneous;
pub mod inhomogeneous;
pub mod mcre;
pub mod operators;
pub mod oversmoothing;
pub mod report;
pub mod trainer;

pub use error::{Error, Result};
