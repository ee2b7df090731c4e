//! Exact backend on finite reversible Markov chains.
//!
//! A generator `L` that is reversible with respect to weights `m` becomes
//! symmetric after the similarity `D^{1/2} L D^{-1/2}` with `D = diag(m)`, so
//! its spectrum is real and every semigroup built from it is a spectral
//! multiplier.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{ensure_finite, Error, Result};
use crate::quadrature::QuadratureRule;

/// Eigenvalues of `-L` below this are treated as exact zeros.
pub const ZERO_EIGENVALUE: f64 = 1e-12;
/// Largest allowed null-space component of `f` relative to `||f||_2`.
pub const ZERO_MEAN_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    n: usize,
    /// Row-major generator.
    #[serde(rename = "L")]
    l: Vec<f64>,
    m: Vec<f64>,
}

impl ChainModel {
    /// Builds a chain from a row-major generator and stationary weights,
    /// checking the Markov and detailed-balance conditions.
    pub fn new(n: usize, l: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        let model = Self { n, l, m };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidInput("chain needs at least one state".into()));
        }
        if self.l.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "generator has {} entries, expected {}",
                self.l.len(),
                n * n
            )));
        }
        if self.m.len() != n {
            return Err(Error::InvalidInput(format!(
                "weights have {} entries, expected {n}",
                self.m.len()
            )));
        }
        for (i, &w) in self.m.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("weight m[{i}] = {w} is not positive")));
            }
        }
        let scale = self.l.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let v = self.rate(i, j);
                ensure_finite("generator entry", v)?;
                if i != j && v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "off-diagonal rate L[{i}][{j}] = {v} is negative"
                    )));
                }
                row += v;
            }
            if row.abs() > 1e-10 * scale * n as f64 {
                return Err(Error::InvalidInput(format!(
                    "row {i} of the generator sums to {row:e}, not 0"
                )));
            }
        }
        let flux_scale = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .fold(0.0f64, |a, (i, j)| a.max((self.m[i] * self.rate(i, j)).abs()))
            .max(f64::MIN_POSITIVE);
        let tolerance = 1e-10 * flux_scale;
        let mut worst = (0, 0, 0.0f64);
        for i in 0..n {
            for j in (i + 1)..n {
                let r = self.m[i] * self.rate(i, j) - self.m[j] * self.rate(j, i);
                if r.abs() > worst.2.abs() {
                    worst = (i, j, r);
                }
            }
        }
        if worst.2.abs() > tolerance {
            return Err(Error::NotReversible {
                i: worst.0,
                j: worst.1,
                residual: worst.2,
                tolerance,
            });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generator(&self) -> &[f64] {
        &self.l
    }

    pub fn weights(&self) -> &[f64] {
        &self.m
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    pub fn total_mass(&self) -> f64 {
        self.m.iter().sum()
    }

    /// `(L f)_i`.
    pub fn apply_generator(&self, f: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.rate(i, j) * f[j]).sum())
            .collect()
    }

    /// Two states with unit rates and unit weights.
    pub fn two_state() -> Self {
        Self {
            n: 2,
            l: vec![-1.0, 1.0, 1.0, -1.0],
            m: vec![1.0, 1.0],
        }
    }

    /// Three states on a cycle, unit rate along every edge in both directions.
    pub fn three_cycle() -> Self {
        Self {
            n: 3,
            l: vec![-2.0, 1.0, 1.0, 1.0, -2.0, 1.0, 1.0, 1.0, -2.0],
            m: vec![1.0; 3],
        }
    }

    /// Nearest-neighbour walk on `n` states with unit rates.
    pub fn path(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("a path chain needs at least two states".into()));
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n - 1 {
            l[i * n + i + 1] = 1.0;
            l[(i + 1) * n + i] = 1.0;
        }
        for i in 0..n {
            let row: f64 = (0..n).filter(|&j| j != i).map(|j| l[i * n + j]).sum();
            l[i * n + i] = -row;
        }
        Self::new(n, l, vec![1.0; n])
    }

    /// A connected reversible chain with random weights and conductances.
    ///
    /// Edge `(i, i+1)` is always present so the chain is irreducible; other
    /// edges appear with probability one half.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("chain needs at least one state".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let keep = j == i + 1 || rng.random_bool(0.5);
                if keep {
                    let c = rng.random_range(0.1..1.5);
                    l[i * n + j] = c / m[i];
                    l[j * n + i] = c / m[j];
                }
            }
        }
        for i in 0..n {
            let row: f64 = (0..n).filter(|&j| j != i).map(|j| l[i * n + j]).sum();
            l[i * n + i] = -row;
        }
        Self::new(n, l, m)
    }

    /// Resolves `two-state`, `three-cycle`, `path-<n>`, `random-<n>` and
    /// `random-<n>-<seed>`, with or without a `builtin:` prefix.
    pub fn builtin(name: &str) -> Result<Self> {
        let name = name.strip_prefix("builtin:").unwrap_or(name);
        let parse = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::InvalidInput(format!("unknown built-in chain `{name}`")))
        };
        match name {
            "two-state" => Ok(Self::two_state()),
            "three-cycle" => Ok(Self::three_cycle()),
            _ => {
                if let Some(rest) = name.strip_prefix("path-") {
                    Self::path(parse(rest)? as usize)
                } else if let Some(rest) = name.strip_prefix("random-") {
                    match rest.split_once('-') {
                        Some((n, seed)) => Self::random(parse(n)? as usize, parse(seed)?),
                        None => Self::random(parse(rest)? as usize, 0),
                    }
                } else {
                    Err(Error::InvalidInput(format!(
                        "unknown built-in chain `{name}` (expected two-state, three-cycle, path-<n>, random-<n>[-<seed>])"
                    )))
                }
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn decompose(&self) -> Result<SpectralDecomposition> {
        decompose(self)
    }
}

/// Eigenvalues of `-L` in ascending order with m-orthonormal eigenvectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    lambdas: Vec<f64>,
    /// `vectors[i]` is the eigenfunction for `lambdas[i]`.
    vectors: Vec<Vec<f64>>,
    m: Vec<f64>,
}

pub fn decompose(model: &ChainModel) -> Result<SpectralDecomposition> {
    model.validate()?;
    let n = model.n;
    let sqrt_m: Vec<f64> = model.m.iter().map(|v| v.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| {
        let a = -sqrt_m[i] * model.rate(i, j) / sqrt_m[j];
        let b = -sqrt_m[j] * model.rate(j, i) / sqrt_m[i];
        0.5 * (a + b)
    });
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut lambdas = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in order {
        let raw = eig.eigenvalues[k];
        lambdas.push(if raw < ZERO_EIGENVALUE { 0.0 } else { raw });
        let col = eig.eigenvectors.column(k);
        let mut phi: Vec<f64> = (0..n).map(|i| col[i] / sqrt_m[i]).collect();
        // Fix the sign so repeated runs agree: largest |entry| positive.
        let pivot = phi
            .iter()
            .copied()
            .fold(0.0f64, |a, v| if v.abs() > a.abs() + 1e-12 { v } else { a });
        if pivot < 0.0 {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        vectors.push(phi);
    }
    Ok(SpectralDecomposition {
        lambdas,
        vectors,
        m: model.m.clone(),
    })
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.m
    }

    pub fn total_mass(&self) -> f64 {
        self.m.iter().sum()
    }

    /// Smallest strictly positive eigenvalue, if any.
    pub fn lambda_min_positive(&self) -> Option<f64> {
        self.lambdas.iter().copied().find(|&l| l > 0.0)
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambdas.last().copied().unwrap_or(0.0)
    }

    /// `<f, g> = sum_i f_i g_i m_i`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        inner(&self.m, f, g)
    }

    pub fn norm(&self, f: &[f64], p: f64) -> f64 {
        weighted_norm(&self.m, f, p)
    }

    /// Spectral coefficients `<f, phi_i>`.
    pub fn coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        Ok(self.vectors.iter().map(|phi| self.inner(f, phi)).collect())
    }

    pub fn synthesize(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (c, phi) in coefficients.iter().zip(&self.vectors) {
            if *c != 0.0 {
                out.iter_mut().zip(phi).for_each(|(o, p)| *o += c * p);
            }
        }
        out
    }

    /// `sum_i multiplier(lambda_i) <f, phi_i> phi_i`.
    pub fn apply_multiplier(&self, f: &[f64], multiplier: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let coefficients: Vec<f64> = self
            .coefficients(f)?
            .into_iter()
            .zip(&self.lambdas)
            .map(|(c, &l)| c * multiplier(l))
            .collect();
        Ok(self.synthesize(&coefficients))
    }

    /// `T_t f`.
    pub fn apply_semigroup(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        nonnegative("t", t)?;
        if t == 0.0 {
            self.check_len(f)?;
            return Ok(f.to_vec());
        }
        self.apply_multiplier(f, |l| (-l * t).exp())
    }

    /// `P_y f = u_f(., y)`.
    pub fn apply_poisson(&self, y: f64, f: &[f64]) -> Result<Vec<f64>> {
        nonnegative("y", y)?;
        if y == 0.0 {
            self.check_len(f)?;
            return Ok(f.to_vec());
        }
        self.apply_multiplier(f, |l| (-l.sqrt() * y).exp())
    }

    /// `d^k/dy^k u_f(., y)` for `k >= 1`.
    pub fn dy_harmonic(&self, y: f64, f: &[f64], k: u32) -> Result<Vec<f64>> {
        nonnegative("y", y)?;
        if k == 0 {
            return Err(Error::InvalidInput(
                "derivative order must be at least 1; use apply_poisson for k = 0".into(),
            ));
        }
        self.apply_multiplier(f, |l| {
            let r = l.sqrt();
            (-r).powi(k as i32) * (-r * y).exp()
        })
    }

    /// Largest null-space component of `f` relative to `||f||_2`; errors when
    /// it exceeds [`ZERO_MEAN_TOLERANCE`].
    pub fn check_zero_mean(&self, f: &[f64]) -> Result<()> {
        let coefficients = self.coefficients(f)?;
        let norm = self.norm(f, 2.0);
        if norm == 0.0 {
            return Ok(());
        }
        let null: f64 = coefficients
            .iter()
            .zip(&self.lambdas)
            .filter(|(_, &l)| l == 0.0)
            .map(|(c, _)| c * c)
            .sum::<f64>()
            .sqrt();
        let component = null / norm;
        if component > ZERO_MEAN_TOLERANCE {
            return Err(Error::NonZeroMean {
                component,
                tolerance: ZERO_MEAN_TOLERANCE,
            });
        }
        Ok(())
    }

    /// Removes the null-space component of `f`.
    pub fn project_out_null(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.apply_multiplier(f, |l| if l == 0.0 { 0.0 } else { 1.0 })
    }

    /// `I_alpha f = sum_{lambda_i > 0} lambda_i^{-alpha/2} <f, phi_i> phi_i`.
    pub fn fractional_integral(&self, alpha: f64, f: &[f64]) -> Result<Vec<f64>> {
        positive("alpha", alpha)?;
        self.check_zero_mean(f)?;
        self.apply_multiplier(f, |l| if l == 0.0 { 0.0 } else { l.powf(-0.5 * alpha) })
    }

    /// `I_alpha f` from the time integral `(1/Gamma(alpha/2)) int t^{alpha/2-1} T_t f dt`,
    /// with each mode's relative error bounded by `tolerance`.
    pub fn fractional_integral_quadrature(
        &self,
        alpha: f64,
        f: &[f64],
        tolerance: f64,
    ) -> Result<(Vec<f64>, QuadratureRule)> {
        positive("alpha", alpha)?;
        self.check_zero_mean(f)?;
        let Some(lambda_min) = self.lambda_min_positive() else {
            return Ok((vec![0.0; self.n()], time_rule(alpha, 1.0, 1.0, tolerance)?));
        };
        let rule = time_rule(alpha, lambda_min, self.lambda_max(), tolerance)?;
        let f = self.project_out_null(f)?;
        let coefficients = self.coefficients(&f)?;
        let values = fractional_integral_with_sampler(alpha, &rule, |t| {
            let c: Vec<f64> = coefficients
                .iter()
                .zip(&self.lambdas)
                .map(|(c, &l)| c * (-l * t).exp())
                .collect();
            Ok(self.synthesize(&c))
        })?;
        Ok((values, rule))
    }

    /// `-L` rebuilt from the spectral data as a row-major matrix.
    pub fn reconstruct_negative_generator(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * n];
        for (l, phi) in self.lambdas.iter().zip(&self.vectors) {
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] += l * phi[i] * phi[j] * self.m[j];
                }
            }
        }
        out
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "function has {} values but the chain has {} states",
                f.len(),
                self.n()
            )));
        }
        Ok(())
    }
}

/// Log-trapezoid rule in `t` for `int_0^inf t^{alpha/2-1} e^{-lambda t} dt`
/// over `lambda in [lambda_min, lambda_max]`, with both discarded tails below
/// `tolerance` relative to `lambda^{-alpha/2} Gamma(alpha/2)`.
pub fn time_rule(alpha: f64, lambda_min: f64, lambda_max: f64, tolerance: f64) -> Result<QuadratureRule> {
    positive("alpha", alpha)?;
    positive("lambda_min", lambda_min)?;
    positive("tolerance", tolerance)?;
    let beta = 0.5 * alpha;
    let tail = 0.5 * tolerance;
    // Lower tail for mode lambda: P(beta, lambda t_min) <= (lambda t_min)^beta / Gamma(beta + 1).
    let t_min = (tail * gamma(beta + 1.0)).powf(1.0 / beta) / lambda_max.max(lambda_min);
    // Upper tail: Q(beta, lambda T) <= Q(beta, lambda_min T).
    let mut t_max = 1.0 / lambda_min;
    while gamma_ur(beta, lambda_min * t_max) > tail {
        t_max *= 1.5;
        if t_max > 1e300 {
            return Err(Error::Quadrature("time integral tail never fell below tolerance".into()));
        }
    }
    let step = 0.2;
    let count = (t_max.ln() - t_min.ln()) / step;
    if count > 1e6 {
        return Err(Error::Quadrature(format!(
            "time range [{t_min:e}, {t_max:e}] needs {count:.0} nodes"
        )));
    }
    QuadratureRule::log_trapezoid(t_min.ln(), t_max.ln(), step, tolerance)
}

/// `(1/Gamma(alpha/2)) sum_k w_k t_k^{alpha/2-1} T_{t_k} f` for any semigroup sampler.
pub fn fractional_integral_with_sampler(
    alpha: f64,
    rule: &QuadratureRule,
    mut sampler: impl FnMut(f64) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    positive("alpha", alpha)?;
    let beta = 0.5 * alpha;
    let norm = 1.0 / gamma(beta);
    let mut acc: Option<Vec<f64>> = None;
    for (&t, &w) in rule.nodes().iter().zip(rule.weights()) {
        let sample = sampler(t)?;
        let c = w * t.powf(beta - 1.0) * norm;
        match acc.as_mut() {
            Some(a) => a.iter_mut().zip(&sample).for_each(|(a, s)| *a += c * s),
            None => acc = Some(sample.iter().map(|s| c * s).collect()),
        }
    }
    Ok(acc.unwrap_or_default())
}

pub fn inner(m: &[f64], f: &[f64], g: &[f64]) -> f64 {
    m.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
}

/// m-weighted `L^p` norm; `p = inf` gives the max norm.
pub fn weighted_norm(m: &[f64], f: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    }
    m.iter()
        .zip(f)
        .map(|(w, v)| w * v.abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

pub(crate) fn positive(what: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            constraint: "> 0",
            value,
        })
    }
}

pub(crate) fn nonnegative(what: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            constraint: ">= 0",
            value,
        })
    }
}
