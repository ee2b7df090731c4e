pub mod continuum;
pub mod error;
pub mod functionals;
pub mod quadrature;
pub mod report;
pub mod spectral;
pub mod stochastic;
pub mod subordination;
pub mod suites;

pub use error::{Error, Result};
