//! Scaling checks: dimension slopes of the heat and Poisson flows, and the
//! stability of the fractional-integral and square-function ratios.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::grid::GridField;
use super::kernel::{fractional_pairing, heat_apply, heat_at_point, poisson_at_point, TimeQuadrature};
use super::GridSpec;
use crate::error::{Error, Result};
use crate::functionals::fmt_param;
use crate::quadrature::QuadratureRule;
use crate::report::CheckReport;
use crate::spectral::positive;
use crate::subordination::density_dt;

pub const VAROPOULOS_ANCHOR: &str = "||T_t f||_inf <= c t^{-d/2p} ||f||_p";
pub const POISSON_DIMENSION_ANCHOR: &str = "||P_y f||_inf <= c y^{-d/p} ||f||_p";
pub const HLS_ANCHOR: &str = "|<I_alpha f, h>| <= C ||f||_p ||h||_q', 1/q = 1/p - alpha/d";
pub const HLS_GFUNCTION_ANCHOR: &str = "||G_alpha f||_q <= C ||f||_p, 1/q = 1/p - alpha/d";

const MIN_R_SQUARED: f64 = 0.99;
const SLOPE_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidInput("a log-log fit needs at least three matching points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let residual: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - residual / syy };
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

fn log_spaced(lo: f64, hi: f64, samples: usize) -> Result<Vec<f64>> {
    positive("window start", lo)?;
    if !(hi > lo) || samples < 3 {
        return Err(Error::InvalidInput("window needs lo < hi and at least three samples".into()));
    }
    Ok((0..samples)
        .map(|k| lo * (hi / lo).powf(k as f64 / (samples - 1) as f64))
        .collect())
}

fn centroid(field: &GridField) -> Vec<f64> {
    let nodes = field.axis_nodes();
    let n = field.side();
    let d = field.dim();
    let mut acc = vec![0.0; d];
    let mut total = 0.0;
    for (flat, v) in field.values().iter().enumerate() {
        let w = v.abs();
        let mut rest = flat;
        for a in (0..d).rev() {
            acc[a] += w * nodes[rest % n];
            rest /= n;
        }
        total += w;
    }
    acc.iter().map(|a| a / total).collect()
}

fn slope_report(name: String, anchor: &str, xs: &[f64], ratios: &[f64], oracle: f64) -> Result<CheckReport> {
    let fit = fit_log_log(xs, ratios)?;
    let report = CheckReport::equality(name, anchor, fit.slope, oracle, SLOPE_TOLERANCE * oracle.abs())
        .with_metric("r_squared", fit.r_squared)
        .with_metric("intercept", fit.intercept)
        .with_metric("window_start", xs[0])
        .with_metric("window_end", xs[xs.len() - 1]);
    Ok(if fit.r_squared < MIN_R_SQUARED {
        report.inconclusive(format!("log-log fit has R^2 = {:.4} below {MIN_R_SQUARED}", fit.r_squared))
    } else {
        report
    })
}

/// Slope of `t -> ||T_t f_r||_inf / ||f_r||_p` along the dilations
/// `f_r(x) = f(x/r)`, `r = sqrt(t / t_ref)`, which keep the flow in the
/// self-similar regime the bound is sharp for. `t_ref` is the geometric mean
/// of the window.
pub fn varopoulos_slope(field: &GridField, p: f64, window: (f64, f64), samples: usize) -> Result<CheckReport> {
    let name = format!("varopoulos-slope-p{}", fmt_param(p));
    if field.is_zero() {
        return Ok(CheckReport::skipped(name, VAROPOULOS_ANCHOR, "f = 0 has no decay rate"));
    }
    if !(p >= 1.0) {
        return Err(Error::Domain {
            what: "p",
            constraint: ">= 1",
            value: p,
        });
    }
    let ts = log_spaced(window.0, window.1, samples)?;
    let t_ref = (window.0 * window.1).sqrt();
    let mut ratios = Vec::with_capacity(ts.len());
    for &t in &ts {
        let fr = field.dilate((t / t_ref).sqrt())?;
        let center = centroid(&fr);
        let flowed = heat_apply(&fr, t)?;
        let sup = flowed.norm(f64::INFINITY).max(heat_at_point(&fr, t, &center)?.abs());
        ratios.push(sup / fr.norm(p));
    }
    let oracle = -(field.dim() as f64) / (2.0 * p);
    slope_report(name, VAROPOULOS_ANCHOR, &ts, &ratios, oracle)
}

/// Slope of `y -> |P_y f_r(c)| / ||f_r||_p` along dilations `r = y / y_ref`,
/// read at the centroid `c` of `|f_r|` (the maximum for symmetric decreasing
/// profiles).
pub fn poisson_dimension_check(field: &GridField, p: f64, window: (f64, f64), samples: usize) -> Result<CheckReport> {
    let name = format!("poisson-dimension-p{}", fmt_param(p));
    if field.is_zero() {
        return Ok(CheckReport::skipped(name, POISSON_DIMENSION_ANCHOR, "f = 0 has no decay rate"));
    }
    if !(p >= 1.0) {
        return Err(Error::Domain {
            what: "p",
            constraint: ">= 1",
            value: p,
        });
    }
    let ys = log_spaced(window.0, window.1, samples)?;
    let y_ref = (window.0 * window.1).sqrt();
    let mut ratios = Vec::with_capacity(ys.len());
    for &y in &ys {
        let fr = field.dilate(y / y_ref)?;
        let center = centroid(&fr);
        let scale = fr.norm(f64::INFINITY);
        let value = poisson_at_point(&fr, y, &center, 1e-9 * scale)?;
        ratios.push(value.abs() / fr.norm(p));
    }
    let oracle = -(field.dim() as f64) / p;
    slope_report(name, POISSON_DIMENSION_ANCHOR, &ys, &ratios, oracle)
}

/// `q` with `1/q = 1/p - alpha/d`, requiring `1 < p < q < inf`.
pub fn hls_exponent(p: f64, alpha: f64, d: usize) -> Result<f64> {
    positive("alpha", alpha)?;
    let inv_q = 1.0 / p - alpha / d as f64;
    if !(p > 1.0) || !(inv_q > 0.0) || alpha >= d as f64 {
        return Err(Error::Exponents(format!(
            "need 1 < p, 0 < alpha < d and 1/p - alpha/d > 0 (p = {p}, alpha = {alpha}, d = {d})"
        )));
    }
    Ok(1.0 / inv_q)
}

/// Hölder conjugate.
pub fn dual_exponent(q: f64) -> f64 {
    if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

/// `|<I_alpha f, h>| / (||f||_p ||h||_q')`; zero when either input is zero.
pub fn hls_ratio(f: &GridField, h: &GridField, alpha: f64, p: f64) -> Result<f64> {
    f.check_same(h)?;
    let q = hls_exponent(p, alpha, f.dim())?;
    if f.is_zero() || h.is_zero() {
        return Ok(0.0);
    }
    let pairing = fractional_pairing(f, h, alpha, TimeQuadrature::PAIRING)?;
    Ok(pairing.abs() / (f.norm(p) * h.norm(dual_exponent(q))))
}

fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / min
}

pub const DILATIONS: [f64; 3] = [0.5, 1.0, 2.0];
const HLS_SIGMA_F: f64 = 1.0;
const HLS_SIGMA_H: f64 = 0.8;

/// Refinement and dilation stability of [`hls_ratio`] on Gaussians.
pub fn hls_ratio_check(spec: &GridSpec, alpha: f64, p: f64) -> Result<Vec<CheckReport>> {
    hls_exponent(p, alpha, spec.d)?;
    let suffix = format!("alpha{}-p{}", fmt_param(alpha), fmt_param(p));
    let ratio_at = |grid: &GridSpec, r: f64| -> Result<f64> {
        hls_ratio(&grid.gaussian(HLS_SIGMA_F * r)?, &grid.gaussian(HLS_SIGMA_H * r)?, alpha, p)
    };
    let fine = ratio_at(spec, 1.0)?;
    let coarse = ratio_at(&spec.coarser(), 1.0)?;
    let refinement = CheckReport::at_most(
        format!("hls-ratio-refinement-{suffix}"),
        HLS_ANCHOR,
        (coarse - fine).abs() / fine,
        0.02,
        0.0,
    )
    .with_metric("ratio_fine", fine)
    .with_metric("ratio_coarse", coarse);

    let mut sweep = Vec::with_capacity(DILATIONS.len());
    for r in DILATIONS {
        sweep.push(if r == 1.0 { fine } else { ratio_at(spec, r)? });
    }
    let mut dilation = CheckReport::at_most(
        format!("hls-ratio-dilation-{suffix}"),
        HLS_ANCHOR,
        relative_spread(&sweep),
        0.03,
        0.0,
    );
    for (r, v) in DILATIONS.iter().zip(&sweep) {
        dilation = dilation.with_metric(format!("ratio_r{}", fmt_param(*r)), *v);
    }
    Ok(vec![refinement, dilation])
}

/// `G_alpha f` at every grid node, from `du/dy = int d/dy mu_y(ds) T_s f`.
pub fn hls_gfunction(f: &GridField, alpha: f64) -> Result<GridField> {
    positive("alpha", alpha)?;
    let d = f.dim() as f64;
    if alpha >= d {
        return Err(Error::Domain {
            what: "alpha",
            constraint: "< d",
            value: alpha,
        });
    }
    if f.is_zero() {
        return Ok(f.clone());
    }
    let s_rule = QuadratureRule::log_trapezoid(4e-9f64.ln(), 1e7f64.ln(), 0.5, 0.0)?;
    let flows: Vec<GridField> = s_rule
        .nodes()
        .iter()
        .map(|&s| heat_apply(f, s))
        .collect::<Result<_>>()?;
    let s_top = s_rule.range().1;
    let tail = flows.last().expect("rule has nodes");

    let y_rule = QuadratureRule::log_trapezoid(1e-3f64.ln(), 1e3f64.ln(), 0.25, 0.0)?;
    let (y_lo, y_hi) = y_rule.range();
    let power = 2.0 * alpha + 1.0;
    let size = f.values().len();
    let mut acc = vec![0.0; size];
    let mut du = vec![0.0; size];
    for (&y, &wy) in y_rule.nodes().iter().zip(y_rule.weights()) {
        let tail_weight = (-y * y / (4.0 * s_top)).exp() / (PI * s_top).sqrt();
        du.iter_mut().zip(tail.values()).for_each(|(a, t)| *a = tail_weight * t);
        for (flow, (&s, &ws)) in flows.iter().zip(s_rule.nodes().iter().zip(s_rule.weights())) {
            let c = ws * density_dt(y, s)?;
            if c.abs() < 1e-300 {
                continue;
            }
            du.iter_mut().zip(flow.values()).for_each(|(a, v)| *a += c * v);
        }
        let mut weight = wy * y.powf(power);
        // Below y_lo the derivative is flat; above y_hi it decays like y^{-d-1}.
        if y == y_lo {
            weight += y.powf(power + 1.0) / (power + 1.0);
        } else if y == y_hi {
            weight += y.powf(power + 1.0) / (2.0 * d - 2.0 * alpha);
        }
        acc.iter_mut().zip(&du).for_each(|(a, v)| *a += weight * v * v);
    }
    Ok(f.with_values(acc.into_iter().map(f64::sqrt).collect()))
}

/// Refinement and dilation stability of `||G_alpha f||_q / ||f||_p` on a Gaussian.
pub fn hls_gfunction_check(spec: &GridSpec, alpha: f64, p: f64) -> Result<Vec<CheckReport>> {
    let q = hls_exponent(p, alpha, spec.d)?;
    let suffix = format!("alpha{}-p{}", fmt_param(alpha), fmt_param(p));
    let ratio_at = |grid: &GridSpec, r: f64| -> Result<f64> {
        let f = grid.gaussian(HLS_SIGMA_F * r)?;
        Ok(hls_gfunction(&f, alpha)?.norm(q) / f.norm(p))
    };
    let fine = ratio_at(spec, 1.0)?;
    let coarse = ratio_at(&spec.coarser(), 1.0)?;
    let refinement = CheckReport::at_most(
        format!("hls-gfunction-refinement-{suffix}"),
        HLS_GFUNCTION_ANCHOR,
        (coarse - fine).abs() / fine,
        0.05,
        0.0,
    )
    .with_metric("ratio_fine", fine)
    .with_metric("ratio_coarse", coarse);

    let mut sweep = Vec::with_capacity(DILATIONS.len());
    for r in DILATIONS {
        sweep.push(if r == 1.0 { fine } else { ratio_at(spec, r)? });
    }
    let mut dilation = CheckReport::at_most(
        format!("hls-gfunction-dilation-{suffix}"),
        HLS_GFUNCTION_ANCHOR,
        relative_spread(&sweep),
        0.05,
        0.0,
    );
    for (r, v) in DILATIONS.iter().zip(&sweep) {
        dilation = dilation.with_metric(format!("ratio_r{}", fmt_param(*r)), *v);
    }
    Ok(vec![refinement, dilation])
}
