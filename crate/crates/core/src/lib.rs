pub mod analysis;
pub mod benchmark;
pub mod controllers;
pub mod discretization;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod plant;
pub mod quadrature;
pub mod simulator;
pub mod surface;

pub use error::{Error, Result};
