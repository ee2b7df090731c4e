//! Heat flow, Riesz potentials and scaling checks on uniform grids in `R^d`.

mod grid;
mod hls;
mod kernel;
mod riesz;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

pub use grid::{axis_nodes, sinc_derivative, sinc_weights, GridField, GridSidecar};
pub use hls::{
    dual_exponent, fit_log_log, hls_exponent, hls_gfunction, hls_gfunction_check, hls_ratio, hls_ratio_check,
    poisson_dimension_check, varopoulos_slope, LogLogFit, HLS_ANCHOR, HLS_GFUNCTION_ANCHOR, POISSON_DIMENSION_ANCHOR,
    VAROPOULOS_ANCHOR,
};
pub use kernel::{
    fractional_integral_at_points, fractional_pairing, heat_apply, heat_at_point, heat_kernel_1d, heat_matrix,
    heat_weights, poisson_at_point, truncation_warning, TimeQuadrature,
};
pub use riesz::{riesz_apply, SUBTRACTION_DEGREE};

/// `c(d, alpha) = Gamma((d - alpha)/2) / (2^alpha pi^{d/2} Gamma(alpha/2))`.
pub fn riesz_constant(d: usize, alpha: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    if !(alpha >= 1e-3) {
        return Err(Error::Domain {
            what: "alpha",
            constraint: ">= 1e-3",
            value: alpha,
        });
    }
    if alpha >= d as f64 {
        return Err(Error::Domain {
            what: "alpha",
            constraint: "< d",
            value: alpha,
        });
    }
    let d = d as f64;
    Ok(gamma((d - alpha) / 2.0) / (2f64.powf(alpha) * PI.powf(d / 2.0) * gamma(alpha / 2.0)))
}

/// Grid shape shared by the continuum checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub extent: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            d: 3,
            n: 48,
            extent: 8.0,
        }
    }
}

impl GridSpec {
    pub fn gaussian(&self, sigma: f64) -> Result<GridField> {
        GridField::gaussian(self.d, self.n, self.extent, sigma)
    }

    /// Same extent, `n / 2` nodes per axis.
    pub fn coarser(&self) -> GridSpec {
        GridSpec {
            n: self.n / 2,
            ..*self
        }
    }
}
