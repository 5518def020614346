//! Robust gradient descent via smoothed heavy-tailed mean estimation.

pub mod baselines;
pub mod bench;
pub mod catoni;
pub mod error;
pub mod models;
pub mod normal;
mod quadrature;
pub mod rgd;
pub mod seeding;
pub mod synth;

pub use error::{Error, Result};
