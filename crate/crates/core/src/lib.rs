pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod geometry;
pub mod pipeline;
pub mod sim;

pub use error::{Error, Result};
