//! Risk-averse multi-class classification.

pub mod data;
mod epigraph;
pub mod error;
pub mod eval;
pub mod fairness;
pub mod kernel;
pub mod models;
pub mod risk;
pub mod solver;
pub mod synthetic;
pub mod two_stage;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
