//! Simulation of three hopping systems and information-theoretic measures
//! of how much of their behaviour is computed by the body rather than the
//! controller.

pub mod discretize;
pub mod error;
pub mod infotheory;
pub mod integrator;
pub mod measures;
pub mod models;
pub mod pipeline;

pub use error::{Error, Result};
