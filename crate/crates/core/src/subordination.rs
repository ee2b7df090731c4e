//! The one-half stable subordinator and the Poisson semigroup built from
//! semigroup samples: `P_y f = int_0^inf T_s f mu_y(ds)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use crate::report::CheckReport;
use crate::spectral::{positive, SpectralDecomposition};

/// Density of `mu_t`: `(t / (2 sqrt(pi))) e^{-t^2/4s} s^{-3/2}`.
pub fn density(t: f64, s: f64) -> Result<f64> {
    positive("t", t)?;
    positive("s", s)?;
    Ok(density_unchecked(t, s))
}

fn density_unchecked(t: f64, s: f64) -> f64 {
    t / (2.0 * PI.sqrt()) * (-t * t / (4.0 * s)).exp() * s.powf(-1.5)
}

/// `d/dt` of the density: `(1 / (2 sqrt(pi))) (1 - t^2/2s) e^{-t^2/4s} s^{-3/2}`.
pub fn density_dt(t: f64, s: f64) -> Result<f64> {
    positive("t", t)?;
    positive("s", s)?;
    Ok(density_dt_unchecked(t, s))
}

fn density_dt_unchecked(t: f64, s: f64) -> f64 {
    (1.0 - t * t / (2.0 * s)) * (-t * t / (4.0 * s)).exp() * s.powf(-1.5) / (2.0 * PI.sqrt())
}

/// `mu_t([S, inf)) = erf(t / (2 sqrt(S)))`.
pub fn tail_mass(t: f64, s_max: f64) -> f64 {
    erf(t / (2.0 * s_max.sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubordinationOptions {
    /// Upper end of the explicit quadrature; the rest of the subordinator
    /// mass is assigned to `T_{s_max} f`.
    pub s_max: f64,
    /// Stop once two successive refinements differ by less than this
    /// (relative to `max(1, |values|_inf)`).
    pub tolerance: f64,
    pub initial_panels_per_unit: f64,
    pub max_refinements: usize,
}

impl SubordinationOptions {
    pub fn new(s_max: f64, tolerance: f64) -> Self {
        Self {
            s_max,
            tolerance,
            initial_panels_per_unit: 0.5,
            max_refinements: 8,
        }
    }

    /// Chooses `s_max` so that `|T_s f - T_{s_max} f| <= tolerance` for all
    /// `s >= s_max`, from the spectral gap.
    pub fn for_chain(dec: &SpectralDecomposition, f: &[f64], tolerance: f64) -> Result<Self> {
        let coefficients = dec.coefficients(f)?;
        let bound: f64 = coefficients
            .iter()
            .zip(dec.lambdas())
            .zip(dec.vectors())
            .filter(|((_, &l), _)| l > 0.0)
            .map(|((c, _), phi)| c.abs() * phi.iter().fold(0.0f64, |a, v| a.max(v.abs())))
            .sum();
        let s_max = match dec.lambda_min_positive() {
            Some(gap) if bound > tolerance => (bound / tolerance).ln() / gap,
            _ => 1.0,
        };
        Ok(Self::new(s_max.max(1.0), tolerance))
    }
}

#[derive(Clone, Debug)]
pub struct SubordinationResult {
    pub values: Vec<f64>,
    pub rule: QuadratureRule,
    pub refinements: usize,
    /// Max-norm change at the last refinement.
    pub change: f64,
}

/// Lower end of the explicit range: `mu_y` gives mass `erfc(sqrt(60))`, about
/// `1e-27`, to `s < y^2/240`.
fn s_min(y: f64) -> f64 {
    y * y / 240.0
}

fn subordinate(
    mut sampler: impl FnMut(f64) -> Result<Vec<f64>>,
    y: f64,
    options: &SubordinationOptions,
    weight: impl Fn(f64, f64) -> f64,
    tail_weight: f64,
) -> Result<SubordinationResult> {
    positive("y", y)?;
    positive("tolerance", options.tolerance)?;
    let lo = s_min(y);
    let hi = options.s_max.max(4.0 * lo);
    let tail = sampler(hi)?;
    let span = (hi / lo).ln();
    let mut panels = ((span * options.initial_panels_per_unit).ceil() as usize).max(2);
    let mut previous: Option<Vec<f64>> = None;
    for refinement in 0..=options.max_refinements {
        let rule = QuadratureRule::log_gauss_panels(lo, hi, panels, 8, &[y * y / 2.0], options.tolerance)?;
        let mut values: Vec<f64> = tail.iter().map(|v| v * tail_weight).collect();
        for (&s, &w) in rule.nodes().iter().zip(rule.weights()) {
            let c = w * weight(y, s);
            if c == 0.0 {
                continue;
            }
            let sample = sampler(s)?;
            if sample.len() != values.len() {
                return Err(Error::InvalidInput("sampler changed its output length".into()));
            }
            values.iter_mut().zip(&sample).for_each(|(v, x)| *v += c * x);
        }
        if let Some(prev) = previous.as_ref() {
            let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            let change = values
                .iter()
                .zip(prev)
                .fold(0.0f64, |a, (v, p)| a.max((v - p).abs()));
            if change <= options.tolerance * scale {
                return Ok(SubordinationResult {
                    values,
                    rule,
                    refinements: refinement,
                    change,
                });
            }
        }
        previous = Some(values);
        panels *= 2;
    }
    Err(Error::Quadrature(format!(
        "subordination integral at y = {y} did not settle after {} refinements",
        options.max_refinements
    )))
}

/// `P_y f` as the subordination integral of semigroup samples `s -> T_s f`.
pub fn poisson_via_subordination(
    sampler: impl FnMut(f64) -> Result<Vec<f64>>,
    y: f64,
    options: &SubordinationOptions,
) -> Result<SubordinationResult> {
    positive("y", y)?;
    let hi = options.s_max.max(4.0 * s_min(y));
    subordinate(sampler, y, options, density_unchecked, tail_mass(y, hi))
}

/// `d/dy P_y f`, differentiating the density under the integral.
pub fn dy_via_subordination(
    sampler: impl FnMut(f64) -> Result<Vec<f64>>,
    y: f64,
    options: &SubordinationOptions,
) -> Result<SubordinationResult> {
    positive("y", y)?;
    let hi = options.s_max.max(4.0 * s_min(y));
    let tail_weight = (-y * y / (4.0 * hi)).exp() / (PI * hi).sqrt();
    subordinate(sampler, y, options, density_dt_unchecked, tail_weight)
}

/// `sup_{z >= 0} |1 - z/2| e^{-z/8}`, the constant dominating
/// `|1 - y^2/2s|` by `e^{y^2/8s}`.
pub fn derivative_bound_constant() -> f64 {
    derivative_bound_maximizer().1
}

/// The maximizing `z = y^2/s` and the maximum value.
pub fn derivative_bound_maximizer() -> (f64, f64) {
    let g = |z: f64| (1.0 - 0.5 * z).abs() * (-z / 8.0).exp();
    // On [0, 2] the function decreases from g(0) = 1; on [2, inf) it is
    // unimodal, so golden-section search there suffices.
    let (mut a, mut b) = (2.0f64, 60.0f64);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    while b - a > 1e-12 {
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - ratio * (b - a);
        d = a + ratio * (b - a);
    }
    let z = 0.5 * (a + b);
    if g(z) >= g(0.0) {
        (z, g(z))
    } else {
        (0.0, g(0.0))
    }
}

pub const DERIVATIVE_BOUND_ANCHOR: &str = "|y du_f/dy (x,y)| <= c1 u_|f|(x, y/sqrt 2), c1 = sup_z |1 - z/2| e^{-z/8}";

/// Largest `|y du_f/dy(x, y)| / u_|f|(x, y/sqrt 2)` over states and the given
/// heights, compared with [`derivative_bound_constant`].
pub fn derivative_bound_check(dec: &SpectralDecomposition, f: &[f64], ys: &[f64], tolerance: f64) -> Result<CheckReport> {
    let abs_f: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    let mut worst = 0.0f64;
    let mut excluded = 0usize;
    let mut argmax = (0usize, 0.0f64);
    for &y in ys {
        positive("y", y)?;
        let du = dec.dy_harmonic(y, f, 1)?;
        let u = dec.apply_poisson(y / 2f64.sqrt(), &abs_f)?;
        for (x, (d, v)) in du.iter().zip(&u).enumerate() {
            if *v < 1e-300 {
                if d.abs() > 0.0 {
                    excluded += 1;
                }
                continue;
            }
            let ratio = (y * d).abs() / v;
            if ratio > worst {
                worst = ratio;
                argmax = (x, y);
            }
        }
    }
    Ok(CheckReport::at_most(
        "derivative-bound",
        DERIVATIVE_BOUND_ANCHOR,
        worst,
        derivative_bound_constant(),
        tolerance,
    )
    .with_metric("excluded_points", excluded as f64)
    .with_metric("argmax_state", argmax.0 as f64)
    .with_metric("argmax_y", argmax.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_rejects_nonpositive_arguments() {
        assert!(density(0.0, 1.0).is_err());
        assert!(density(1.0, 0.0).is_err());
        assert!(density(1.0, -1.0).is_err());
        assert!(density(1.0, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn density_vanishes_at_both_ends() {
        assert!(density(1.0, 1e-4).unwrap() < 1e-300);
        assert!(density(1.0, 1e12).unwrap() < 1e-18);
    }

    #[test]
    fn derivative_constant_matches_closed_form() {
        let (z, c) = derivative_bound_maximizer();
        assert!((z - 10.0).abs() < 1e-5, "{z}");
        assert!((c - 4.0 * (-1.25f64).exp()).abs() < 1e-12, "{c}");
    }
}
