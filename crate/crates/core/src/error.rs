use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} must satisfy {constraint}, got {value}")]
    Domain {
        what: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error(
        "generator is not reversible: m[{i}]*L[{i}][{j}] - m[{j}]*L[{j}][{i}] = {residual:e} \
         exceeds tolerance {tolerance:e}"
    )]
    NotReversible {
        i: usize,
        j: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("function carries a component {component:e} on the null space of the generator (tolerance {tolerance:e}); the fractional integral diverges")]
    NonZeroMean { component: f64, tolerance: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("exponent relation violated: {0}")]
    Exponents(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn ensure_finite(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            constraint: "a finite value",
            value,
        })
    }
}
