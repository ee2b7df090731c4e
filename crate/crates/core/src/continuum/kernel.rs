//! Heat semigroup on grids.
//!
//! The kernel is the band-limited heat kernel: along each axis,
//! `k_t(z) = (h/pi) int_0^{pi/h} e^{-t xi^2} cos(xi z) d xi`, which is the exact
//! heat flow (generator `Delta`, variance `2t` per axis) applied to the sinc
//! interpolant of the grid values. It reduces to the identity at `t = 0`,
//! conserves the grid mass, and obeys the semigroup law up to truncation at
//! the grid edge. Once `e^{-t (pi/h)^2}` is below rounding the kernel equals
//! the sampled Gaussian `h (4 pi t)^{-1/2} e^{-z^2/4t}`.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use super::grid::{axis_nodes, GridField};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_unit, QuadratureRule};
use crate::spectral::{nonnegative, positive};
use crate::subordination::{poisson_via_subordination, SubordinationOptions};

const KERNEL_ORDER: usize = 16;

/// Band-limited heat kernel along one axis at offset `z`.
pub fn heat_kernel_1d(t: f64, h: f64, z: f64) -> f64 {
    let band = PI / h;
    if t * band * band >= 36.0 {
        return h * (4.0 * PI * t).powf(-0.5) * (-z * z / (4.0 * t)).exp();
    }
    if t == 0.0 {
        let u = z / h;
        return if u.abs() < 1e-12 { 1.0 } else { (PI * u).sin() / (PI * u) };
    }
    let (gx, gw) = unit_rule();
    let panels = 4 + (z.abs() / h).ceil() as usize;
    let width = band / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        for (x, w) in gx.iter().zip(gw) {
            let xi = mid + half * x;
            total += half * w * (-t * xi * xi).exp() * (xi * z).cos();
        }
    }
    total * h / PI
}

fn unit_rule() -> &'static (Vec<f64>, Vec<f64>) {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_unit(KERNEL_ORDER))
}

/// `k_t(x - x_j)` for every node `x_j` of an axis.
pub fn heat_weights(n: usize, h: f64, t: f64, x: f64) -> Vec<f64> {
    axis_nodes(n, h).into_iter().map(|xj| heat_kernel_1d(t, h, x - xj)).collect()
}

/// Toeplitz matrix of the kernel between nodes.
pub fn heat_matrix(n: usize, h: f64, t: f64) -> Vec<f64> {
    let offsets: Vec<f64> = (0..n).map(|k| heat_kernel_1d(t, h, k as f64 * h)).collect();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = offsets[i.abs_diff(j)];
        }
    }
    m
}

/// `T_t f` on the grid nodes.
pub fn heat_apply(field: &GridField, t: f64) -> Result<GridField> {
    nonnegative("t", t)?;
    if t == 0.0 {
        return Ok(field.clone());
    }
    Ok(field.apply_separable(&heat_matrix(field.side(), field.spacing(), t)))
}

/// `Some(message)` when the field is not negligible at the grid edge.
pub fn truncation_warning(field: &GridField, tolerance: f64) -> Option<String> {
    let edge = field.boundary_max();
    let scale = field.norm(f64::INFINITY);
    (edge > tolerance * scale.max(f64::MIN_POSITIVE))
        .then(|| format!("field reaches {edge:e} at the grid boundary; heat flow truncates that mass"))
}

/// `T_t f(x)` at an arbitrary point.
pub fn heat_at_point(field: &GridField, t: f64, x: &[f64]) -> Result<f64> {
    nonnegative("t", t)?;
    if x.len() != field.dim() {
        return Err(Error::InvalidInput("point dimension does not match the grid".into()));
    }
    let weights: Vec<Vec<f64>> = x
        .iter()
        .map(|&xa| heat_weights(field.side(), field.spacing(), t, xa))
        .collect();
    field.contract(&weights)
}

/// Time range and step for the semigroup representation of `I_alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeQuadrature {
    pub t_min: f64,
    pub t_max: f64,
    pub step: f64,
}

impl TimeQuadrature {
    pub const POINTS: TimeQuadrature = TimeQuadrature {
        t_min: 1e-9,
        t_max: 1e7,
        step: 0.25,
    };
    pub const PAIRING: TimeQuadrature = TimeQuadrature {
        t_min: 1e-6,
        t_max: 1e6,
        step: 0.5,
    };

    fn rule(&self) -> Result<QuadratureRule> {
        QuadratureRule::log_trapezoid(self.t_min.ln(), self.t_max.ln(), self.step, 0.0)
    }
}

fn check_alpha(alpha: f64, d: usize) -> Result<()> {
    positive("alpha", alpha)?;
    if alpha >= d as f64 {
        return Err(Error::Domain {
            what: "alpha",
            constraint: "< d",
            value: alpha,
        });
    }
    Ok(())
}

/// `(1/Gamma(beta)) int_0^inf t^{beta - 1} F(t) dt` by the trapezoid rule in
/// `ln t`. Outside the rule `F` is replaced by its limits, `near` below
/// `t_min` and `far * t^{-d/2}` above `t_max`, and the trapezoid sum is
/// continued over those geometric tails so the whole rule stays a trapezoid
/// sum on the real line.
fn semigroup_time_integral(
    beta: f64,
    half_d: f64,
    time: TimeQuadrature,
    near: f64,
    far: f64,
    mut sample: impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    let rule = time.rule()?;
    let (t_lo, t_hi) = rule.range();
    let step = match rule.substitution() {
        crate::quadrature::Substitution::LogTrapezoid { step, .. } => *step,
        _ => unreachable!("log-trapezoid rule"),
    };
    let geometric = |rate: f64| step * (0.5 + (-rate * step).exp() / (1.0 - (-rate * step).exp()));
    let mut total = near * t_lo.powf(beta) * geometric(beta);
    total += far * t_hi.powf(beta - half_d) * geometric(half_d - beta);
    for (&t, &w) in rule.nodes().iter().zip(rule.weights()) {
        total += w * t.powf(beta - 1.0) * sample(t)?;
    }
    Ok(total / gamma(beta))
}

/// `I_alpha f(x) = (1/Gamma(alpha/2)) int t^{alpha/2 - 1} T_t f(x) dt` at points.
///
/// Below `t_min` the flow is replaced by `f(x)`, above `t_max` by
/// `mass (4 pi t)^{-d/2}`.
pub fn fractional_integral_at_points(field: &GridField, alpha: f64, points: &[Vec<f64>], time: TimeQuadrature) -> Result<Vec<f64>> {
    check_alpha(alpha, field.dim())?;
    let half_d = 0.5 * field.dim() as f64;
    let far = field.mass() * (4.0 * PI).powf(-half_d);
    points
        .iter()
        .map(|x| {
            let near = field.interpolate(x)?;
            semigroup_time_integral(0.5 * alpha, half_d, time, near, far, |t| heat_at_point(field, t, x))
        })
        .collect()
}

/// `<I_alpha f, h>` from `<T_t f, h>` with the same tail treatment.
pub fn fractional_pairing(f: &GridField, h: &GridField, alpha: f64, time: TimeQuadrature) -> Result<f64> {
    f.check_same(h)?;
    check_alpha(alpha, f.dim())?;
    let half_d = 0.5 * f.dim() as f64;
    let far = f.mass() * h.mass() * (4.0 * PI).powf(-half_d);
    semigroup_time_integral(0.5 * alpha, half_d, time, f.inner(h)?, far, |t| heat_apply(f, t)?.inner(h))
}

/// `P_y f(x)` by subordinating point evaluations of the heat flow.
pub fn poisson_at_point(field: &GridField, y: f64, x: &[f64], tolerance: f64) -> Result<f64> {
    positive("y", y)?;
    let options = SubordinationOptions::new(1e6 * y.max(1.0).powi(2), tolerance);
    let result = poisson_via_subordination(|s| Ok(vec![heat_at_point(field, s, x)?]), y, &options)?;
    Ok(result.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_limits() {
        let h = 1.0 / 3.0;
        assert_eq!(heat_kernel_1d(0.0, h, 0.0), 1.0);
        assert!(heat_kernel_1d(0.0, h, 2.0 * h).abs() < 1e-15);
        // Just below and above the Gaussian switch the two forms agree.
        let t = 36.0 / (PI / h).powi(2);
        for z in [0.0, 0.5, 2.0] {
            let below = t * (1.0 - 1e-9);
            let a = heat_kernel_1d(below, h, z);
            let b = h * (4.0 * PI * below).powf(-0.5) * (-z * z / (4.0 * below)).exp();
            assert!((a - b).abs() < 1e-13, "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn kernel_rows_sum_to_one() {
        let h = 0.25;
        for t in [1e-4, 0.01, 0.2, 3.0] {
            let total: f64 = (-400..=400).map(|k| heat_kernel_1d(t, h, k as f64 * h)).sum();
            assert!((total - 1.0).abs() < 1e-6, "t={t}: {total}");
        }
    }

    #[test]
    fn alpha_range_is_enforced() {
        let g = GridField::gaussian(3, 8, 4.0, 1.0).unwrap();
        assert!(fractional_integral_at_points(&g, 3.0, &[vec![0.0; 3]], TimeQuadrature::POINTS).is_err());
        assert!(fractional_integral_at_points(&g, 0.0, &[vec![0.0; 3]], TimeQuadrature::POINTS).is_err());
    }
}
