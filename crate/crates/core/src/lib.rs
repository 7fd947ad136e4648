//! Transmission of light through small arrays of strongly interacting atoms.

pub mod cli;
pub mod coupling;
pub mod detection;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod incident_field;
pub mod ode;
pub mod output;
pub mod qme;
pub mod quadrature;
pub mod sce;
pub mod scenario;

pub use error::{Error, Result};
