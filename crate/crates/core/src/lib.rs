//! Cooperative spatial coevolution of autoencoders with activation-guided
//! pruning, evaluated on a synthetic binary clustering benchmark.

pub mod coevolution;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod nn;
pub mod problem;
pub mod pruning;
pub mod schedule;
pub mod seed;

pub use error::{Error, Result};
pub use matrix::Matrix;
