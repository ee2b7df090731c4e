//! Direct evaluation of `c(d, alpha) int f(y) |x - y|^{alpha - d} dy` on grids.
//!
//! Around each sample point `x` the integrand is split as
//! `f(x + z) = Q(z) e^{-|z|^2/2} + r(z)`, where the polynomial `Q` of degree
//! `K` is chosen so that `r` vanishes to order `K + 1` at `z = 0`. The
//! Gaussian-weighted moments of the kernel are known in closed form, and
//! `r(z) |z|^{alpha - d}` is regular enough for the plain lattice sum.

use statrs::function::gamma::gamma;

use super::grid::GridField;
use super::riesz_constant;
use crate::error::{Error, Result};

/// Degree of the subtracted local polynomial.
pub const SUBTRACTION_DEGREE: u32 = 5;

/// Multi-indices of `d` components with total degree at most `k`.
fn multi_indices(d: usize, k: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::new();
        for base in &out {
            let used: u32 = base.iter().sum();
            for e in 0..=(k - used) {
                let mut m = base.clone();
                m.push(e);
                next.push(m);
            }
        }
        out = next;
    }
    out
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `int z^beta e^{-|z|^2/2} |z|^{alpha - d} dz` over `R^d`.
fn gaussian_moment(beta: &[u32], alpha: f64) -> f64 {
    if beta.iter().any(|b| b % 2 == 1) {
        return 0.0;
    }
    let d = beta.len() as f64;
    let order: u32 = beta.iter().sum();
    let sphere = 2.0 * beta.iter().map(|&b| gamma((f64::from(b) + 1.0) / 2.0)).product::<f64>()
        / gamma((f64::from(order) + d) / 2.0);
    let radial_power = (f64::from(order) + alpha) / 2.0;
    sphere * 2f64.powf(radial_power - 1.0) * gamma(radial_power)
}

/// Riesz potential of `field` at the sample points.
pub fn riesz_apply(field: &GridField, alpha: f64, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = field.dim();
    let constant = riesz_constant(d, alpha)?;
    let h = field.spacing();
    let limit = field.extent() - 1.5 * h;
    for x in points {
        if x.len() != d {
            return Err(Error::InvalidInput("point dimension does not match the grid".into()));
        }
        if x.iter().any(|v| v.abs() > limit) {
            return Err(Error::InvalidInput(format!("sample point {x:?} is within one cell of the grid boundary")));
        }
    }
    if field.is_zero() {
        return Ok(vec![0.0; points.len()]);
    }
    let indices = multi_indices(d, SUBTRACTION_DEGREE);
    let nodes = field.axis_nodes();
    let n = field.side();
    points
        .iter()
        .map(|x| {
            // Taylor coefficients of f(x + z) at z = 0.
            let mut taylor = Vec::with_capacity(indices.len());
            for beta in &indices {
                let denom: f64 = beta.iter().map(|&b| factorial(b)).product();
                taylor.push(field.interpolate_derivative(x, beta)? / denom);
            }
            // Q = Taylor_K(f(x + z) e^{|z|^2/2}).
            let q: Vec<f64> = indices
                .iter()
                .map(|beta| {
                    indices
                        .iter()
                        .zip(&taylor)
                        .filter(|(gamma_idx, _)| {
                            gamma_idx.iter().zip(beta).all(|(g, b)| g <= b && (b - g) % 2 == 0)
                        })
                        .map(|(gamma_idx, coef)| {
                            let weight: f64 = gamma_idx
                                .iter()
                                .zip(beta)
                                .map(|(g, b)| {
                                    let k = (b - g) / 2;
                                    1.0 / (2f64.powi(k as i32) * factorial(k))
                                })
                                .product();
                            coef * weight
                        })
                        .sum()
                })
                .collect();
            let analytic: f64 = indices
                .iter()
                .zip(&q)
                .map(|(beta, c)| c * gaussian_moment(beta, alpha))
                .sum();

            let mut lattice = 0.0;
            let mut z = vec![0.0; d];
            let mut powers = vec![[0.0f64; SUBTRACTION_DEGREE as usize + 1]; d];
            for (flat, &fv) in field.values().iter().enumerate() {
                let mut rest = flat;
                for a in (0..d).rev() {
                    z[a] = nodes[rest % n] - x[a];
                    rest /= n;
                }
                let r2: f64 = z.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    continue;
                }
                for a in 0..d {
                    powers[a][0] = 1.0;
                    for e in 1..=SUBTRACTION_DEGREE as usize {
                        powers[a][e] = powers[a][e - 1] * z[a];
                    }
                }
                let poly: f64 = indices
                    .iter()
                    .zip(&q)
                    .map(|(beta, c)| c * beta.iter().enumerate().map(|(a, &b)| powers[a][b as usize]).product::<f64>())
                    .sum();
                let remainder = fv - poly * (-0.5 * r2).exp();
                lattice += remainder * r2.powf(0.5 * (alpha - d as f64));
            }
            Ok(constant * (analytic + lattice * field.cell_volume()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_count() {
        assert_eq!(multi_indices(3, 5).len(), 56);
        assert_eq!(multi_indices(1, 5).len(), 6);
    }

    #[test]
    fn zeroth_moment() {
        // int e^{-r^2/2} r^{-2} d^3z = 4 pi sqrt(pi/2).
        let m = gaussian_moment(&[0, 0, 0], 1.0);
        let exact = 4.0 * std::f64::consts::PI * (std::f64::consts::PI / 2.0).sqrt();
        assert!((m - exact).abs() < 1e-12);
    }
}
