//! Quadrature rules shared by the subordination, time-integral and half-space
//! computations.
//!
//! Every rule is a list of strictly increasing nodes with positive weights for
//! an integral over a subset of `(0, inf)` or a finite interval. Rules built
//! on a logarithmic substitution carry the Jacobian in their weights, so
//! `rule.integrate(g)` approximates `int g(x) dx` directly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the nodes of a rule were produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Substitution {
    /// Plain nodes on a finite interval.
    Interval { a: f64, b: f64 },
    /// Trapezoidal rule in `u = ln x` with a uniform step.
    LogTrapezoid { u_min: f64, u_max: f64, step: f64 },
    /// Composite Gauss-Legendre panels in `u = ln x` over `[x_min, x_max]`.
    LogGaussPanels {
        x_min: f64,
        x_max: f64,
        panels: usize,
        order: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    tolerance: f64,
    substitution: Substitution,
}

impl QuadratureRule {
    pub fn from_parts(
        nodes: Vec<f64>,
        weights: Vec<f64>,
        tolerance: f64,
        substitution: Substitution,
    ) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::InvalidInput(format!(
                "quadrature rule needs matching non-empty node/weight arrays ({} vs {})",
                nodes.len(),
                weights.len()
            )));
        }
        if let Some(k) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "quadrature weight {k} is not positive: {}",
                weights[k]
            )));
        }
        if let Some(k) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!(
                "quadrature nodes are not strictly increasing at index {k}"
            )));
        }
        Ok(Self {
            nodes,
            weights,
            tolerance,
            substitution,
        })
    }

    /// Trapezoidal rule in `u = ln x` on `[u_min, u_max]`, approximating
    /// `int_{e^u_min}^{e^u_max} g(x) dx`.
    pub fn log_trapezoid(u_min: f64, u_max: f64, step: f64, tolerance: f64) -> Result<Self> {
        if !(u_max > u_min) || !(step > 0.0) {
            return Err(Error::InvalidInput(format!(
                "log-trapezoid needs u_min < u_max and step > 0 (got [{u_min}, {u_max}], {step})"
            )));
        }
        let intervals = ((u_max - u_min) / step).ceil().max(1.0) as usize;
        let h = (u_max - u_min) / intervals as f64;
        let mut nodes = Vec::with_capacity(intervals + 1);
        let mut weights = Vec::with_capacity(intervals + 1);
        for k in 0..=intervals {
            let u = u_min + k as f64 * h;
            let x = u.exp();
            let end = k == 0 || k == intervals;
            nodes.push(x);
            weights.push(if end { 0.5 * h * x } else { h * x });
        }
        Self::from_parts(
            nodes,
            weights,
            tolerance,
            Substitution::LogTrapezoid {
                u_min,
                u_max: u_min + intervals as f64 * h,
                step: h,
            },
        )
    }

    /// Gauss-Legendre rule with `order` nodes on `[a, b]`.
    pub fn gauss_legendre(a: f64, b: f64, order: usize) -> Result<Self> {
        if !(b > a) {
            return Err(Error::InvalidInput(format!("empty interval [{a}, {b}]")));
        }
        let (x, w) = gauss_legendre_unit(order);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let nodes = x.iter().map(|t| mid + half * t).collect();
        let weights = w.iter().map(|v| half * v).collect();
        Self::from_parts(nodes, weights, 0.0, Substitution::Interval { a, b })
    }

    /// Composite Gauss-Legendre panels in `u = ln x` over `[x_min, x_max]`.
    ///
    /// `breakpoints` inside the range become panel boundaries, which keeps
    /// kinks such as `min(y, s)` from degrading the rule.
    pub fn log_gauss_panels(
        x_min: f64,
        x_max: f64,
        panels: usize,
        order: usize,
        breakpoints: &[f64],
        tolerance: f64,
    ) -> Result<Self> {
        if !(x_min > 0.0 && x_max > x_min) || panels == 0 || order == 0 {
            return Err(Error::InvalidInput(format!(
                "log Gauss panels need 0 < x_min < x_max and positive counts (got [{x_min}, {x_max}])"
            )));
        }
        let (u0, u1) = (x_min.ln(), x_max.ln());
        let mut cuts: Vec<f64> = (0..=panels)
            .map(|k| u0 + (u1 - u0) * k as f64 / panels as f64)
            .collect();
        for b in breakpoints {
            if b.is_finite() && *b > x_min && *b < x_max {
                let ub = b.ln();
                if cuts.iter().all(|c| (c - ub).abs() > 1e-12) {
                    cuts.push(ub);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        let (gx, gw) = gauss_legendre_unit(order);
        let mut nodes = Vec::with_capacity((cuts.len() - 1) * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for pair in cuts.windows(2) {
            let half = 0.5 * (pair[1] - pair[0]);
            let mid = 0.5 * (pair[1] + pair[0]);
            for (t, w) in gx.iter().zip(&gw) {
                let x = (mid + half * t).exp();
                nodes.push(x);
                weights.push(half * w * x);
            }
        }
        Self::from_parts(
            nodes,
            weights,
            tolerance,
            Substitution::LogGaussPanels {
                x_min,
                x_max,
                panels: cuts.len() - 1,
                order,
            },
        )
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn substitution(&self) -> &Substitution {
        &self.substitution
    }

    /// The interval the rule integrates over.
    pub fn range(&self) -> (f64, f64) {
        match self.substitution {
            Substitution::Interval { a, b } => (a, b),
            Substitution::LogTrapezoid { u_min, u_max, .. } => (u_min.exp(), u_max.exp()),
            Substitution::LogGaussPanels { x_min, x_max, .. } => (x_min, x_max),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// `node,weight` lines with a header, for auditing a rule.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,weight\n");
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let _ = writeln!(out, "{x:e},{w:e}");
        }
        out
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre order must be positive");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi's initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

const GK_XK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_489_0,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

fn kronrod15(g: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = g(c);
    let mut kronrod = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for j in 0..7 {
        let dx = h * GK_XK[j];
        let s = g(c - dx) + g(c + dx);
        kronrod += GK_WK[j] * s;
        if j % 2 == 1 {
            gauss += GK_WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod (7/15) integration on a finite interval.
///
/// Returns the value and the accumulated error estimate.
pub fn integrate_adaptive(
    mut g: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = kronrod15(&mut g, a, b);
    intervals.push((a, b, v, e));
    for _ in 0..2000 {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, err));
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&mut g, lo, mid);
        let (v2, e2) = kronrod15(&mut g, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    let total: f64 = intervals.iter().map(|iv| iv.2).sum();
    let err: f64 = intervals.iter().map(|iv| iv.3).sum();
    Err(Error::Quadrature(format!(
        "adaptive Gauss-Kronrod exhausted its subdivision budget (value {total:e}, error {err:e})"
    )))
}

/// Adaptive integration over `[a, inf)` through `x = a + t / (1 - t)`.
pub fn integrate_adaptive_semi_infinite(
    mut g: impl FnMut(f64) -> f64,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    integrate_adaptive(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - t;
            let x = a + t / one_minus;
            let v = g(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}
