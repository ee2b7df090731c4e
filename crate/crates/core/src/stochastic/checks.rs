//! Statistical checks of the identities satisfied by the killed process.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{
    bridge_kill_probability, kill_fraction, path_rng, sample_paths, ChainSampler, ChainState, HarmonicDerivative, Integrands,
    McEstimate, Multiplier, PathBundle, ProcessConfig, StartLaw, WeightedDerivative,
};
use crate::error::{Error, Result};
use crate::functionals::{fmt_param, pairing_for_chain, PairingParams};
use crate::quadrature::{integrate_adaptive, integrate_adaptive_semi_infinite};
use crate::report::CheckReport;
use crate::spectral::{positive, SpectralDecomposition};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub const EXIT_ANCHOR: &str = "E[h(X_tau)] = int_S h(x) dx";
pub const GREEN_ANCHOR: &str = "E[int_0^tau F(Z_t) dt] = 2 int_0^inf int_S (y ^ s) F(x,y) dx dy";
pub const TRANSFORM_ANCHOR: &str =
    "T_alpha^{s,N} f(x) = E[int_0^tau (Y_t^alpha ^ N) du_f/dy(Z_t) dY_t | X_tau = x]";
pub const PROJECTION_ANCHOR: &str = "E[h(X_tau) int_0^tau (Y_t^alpha ^ N) du_f/dy(Z_t) dY_t] = E[int_0^tau (Y_t^alpha ^ N) du_f/dy(Z_t) du_h/dy(Z_t) dt]";
pub const CLOCK_ANCHOR: &str = "(kappa A + (1/2) d^2/dy^2) u_f = 0 exactly when kappa = 1/2";
pub const ITO_ANCHOR: &str = "E[(int_0^tau (Y^alpha ^ N) du_f/dy dY)^2] = E[int_0^tau (Y^alpha ^ N)^2 |du_f/dy|^2 dt]";
pub const OCCUPATION_ANCHOR: &str = "X_tau has law m / sum(m)";
pub const DT_HALVING_ANCHOR: &str = "plumbing";

/// Censored fraction above which MC checks are inconclusive.
pub const MAX_CENSORED_FRACTION: f64 = 0.01;
/// Terminal-state bins with fewer paths are flagged as low confidence.
pub const MIN_BIN_PATHS: usize = 100;
/// Heights where `e^{-sqrt(lambda) y}` falls below `e^{-25}` carry no mass.
const SUPPORT_DECAY: f64 = 25.0;

fn censoring(report: CheckReport, bundle: &PathBundle) -> CheckReport {
    let fraction = bundle.censored_fraction();
    let report = report.with_metric("censored_fraction", fraction);
    if fraction > MAX_CENSORED_FRACTION {
        report.inconclusive(format!("{:.2}% of paths were censored", 100.0 * fraction))
    } else {
        report
    }
}

fn weighted_sum(dec: &SpectralDecomposition, h: &[f64]) -> f64 {
    h.iter().zip(dec.weights()).map(|(a, m)| a * m).sum()
}

fn check_len(dec: &SpectralDecomposition, f: &[f64]) -> Result<()> {
    if f.len() != dec.n() {
        return Err(Error::InvalidInput(format!(
            "function has {} values but the chain has {} states",
            f.len(),
            dec.n()
        )));
    }
    Ok(())
}

/// Monte Carlo of `sum(m) E[h(X_tau)]` against `sum_x h_x m_x`.
pub fn exit_identity_check(dec: &SpectralDecomposition, cfg: &ProcessConfig, h: &[f64], count: usize) -> Result<CheckReport> {
    check_len(dec, h)?;
    let bundle = sample_paths(dec, cfg, count, &Integrands::none(cfg.s))?;
    exit_identity_report(dec, &bundle, h)
}

/// The exit identity evaluated on an existing bundle.
pub fn exit_identity_report(dec: &SpectralDecomposition, bundle: &PathBundle, h: &[f64]) -> Result<CheckReport> {
    check_len(dec, h)?;
    let est = bundle.estimate(|p| h[p.terminal_state]).scaled(bundle.total_mass);
    let report = CheckReport::monte_carlo(
        "exit-identity",
        EXIT_ANCHOR,
        est.mean,
        weighted_sum(dec, h),
        est.standard_error,
        3.0,
    )
    .with_metric("paths", est.count as f64);
    Ok(censoring(report, bundle))
}

/// Test integrands for the Green formula; all are functions of `y` alone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenIntegrand {
    /// `1_{y <= level}`.
    Indicator { level: f64 },
    /// `y^alpha e^{-y}`.
    PowerExp { alpha: f64 },
    Zero,
}

impl GreenIntegrand {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            GreenIntegrand::Indicator { level } => f64::from(u8::from(y <= level)),
            GreenIntegrand::PowerExp { alpha } => y.powf(alpha) * (-y).exp(),
            GreenIntegrand::Zero => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GreenIntegrand::Indicator { level } => positive("indicator level", level),
            GreenIntegrand::PowerExp { alpha } => {
                if !(alpha >= 0.0 && alpha <= 20.0) {
                    return Err(Error::Domain {
                        what: "power",
                        constraint: "in [0, 20]",
                        value: alpha,
                    });
                }
                Ok(())
            }
            GreenIntegrand::Zero => Ok(()),
        }
    }

    /// Height above which the integrand is zero or below `e^{-35}`.
    pub fn support_level(&self) -> f64 {
        match *self {
            // Above the level, not at it: landing on the jump of the indicator
            // biases the left-endpoint rule.
            GreenIntegrand::Indicator { level } => 3.0 * level,
            GreenIntegrand::PowerExp { alpha } => {
                let mut y = alpha.max(1.0);
                while alpha * y.ln() - y > -35.0 {
                    y += 0.5;
                }
                y
            }
            GreenIntegrand::Zero => 1.0,
        }
    }

    /// `2 int_0^inf (y ^ s) F(y) dy`.
    pub fn green_integral(&self, s: f64) -> Result<f64> {
        Ok(match *self {
            GreenIntegrand::Indicator { level } => {
                let a = level.min(s);
                2.0 * (0.5 * a * a + s * (level - a))
            }
            GreenIntegrand::PowerExp { .. } => {
                let (near, _) = integrate_adaptive(|y| y * self.eval(y), 0.0, s, 1e-13, 1e-12)?;
                let (far, _) = integrate_adaptive_semi_infinite(|y| self.eval(y), s, 1e-13, 1e-12)?;
                2.0 * (near + s * far)
            }
            GreenIntegrand::Zero => 0.0,
        })
    }

    pub fn label(&self) -> String {
        match *self {
            GreenIntegrand::Indicator { level } => format!("indicator-{}", fmt_param(level)),
            GreenIntegrand::PowerExp { alpha } => format!("power-exp-{}", fmt_param(alpha)),
            GreenIntegrand::Zero => "zero".into(),
        }
    }
}

/// Monte Carlo of `sum(m) E[int_0^tau F(Y_t) dt]` against the Green formula.
/// Passes when within 3 standard errors and 1% relative error.
pub fn green_formula_check(
    dec: &SpectralDecomposition,
    cfg: &ProcessConfig,
    integrand: GreenIntegrand,
    count: usize,
) -> Result<CheckReport> {
    integrand.validate()?;
    let oracle = dec.total_mass() * integrand.green_integral(cfg.s)?;
    let name = match integrand {
        GreenIntegrand::Indicator { .. } => "green-formula".to_string(),
        other => format!("green-formula-{}", other.label()),
    };
    let f = move |_x: usize, y: f64| integrand.eval(y);
    let integrands = Integrands {
        time: Some(&f),
        stochastic: None,
        support_level: integrand.support_level(),
    };
    let bundle = sample_paths(dec, cfg, count, &integrands)?;
    let est = bundle.estimate(|p| p.time).scaled(bundle.total_mass);
    let mut report = CheckReport::monte_carlo(name, GREEN_ANCHOR, est.mean, oracle, est.standard_error, 3.0)
        .with_metric("paths", est.count as f64)
        .with_metric("fine_step_value", bundle.estimate(|p| p.time_fine).mean * bundle.total_mass);
    if oracle != 0.0 {
        let relative = ((est.mean - oracle) / oracle).abs();
        report = report.with_metric("relative_error", relative);
        // Within 3 SE yet above 1% means 3 SE itself exceeds 1%: too few paths.
        if report.passed() && relative >= 0.01 {
            report = report.inconclusive(format!(
                "relative error {relative:.4} is not below 1%; the sample cannot resolve 1%"
            ));
        }
    }
    Ok(censoring(report, &bundle))
}

fn support_for(dec: &SpectralDecomposition, tables: &[&HarmonicDerivative], s: f64) -> f64 {
    tables
        .iter()
        .filter_map(|t| t.slowest_root())
        .reduce(f64::min)
        .map_or(s, |root| SUPPORT_DECAY / root)
        .max(SUPPORT_DECAY / dec.lambda_max().sqrt().max(1e-300))
        .min(SUPPORT_DECAY / dec.lambda_min_positive().unwrap_or(1.0).sqrt())
}

/// The conditional expectations `E[stochastic integral | X_tau = x]` by exact
/// binning, with the closed-form values `pairing(f, 1_x) / m_x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTransform {
    pub alpha: f64,
    pub bins: Vec<McEstimate>,
    pub oracle: Vec<f64>,
    pub low_confidence: Vec<usize>,
    pub censored_fraction: f64,
    /// `sum(m) E[SI^2]` and its standard error.
    pub second_moment: McEstimate,
    pub fine_shift: f64,
}

pub fn martingale_transform(
    dec: &SpectralDecomposition,
    cfg: &ProcessConfig,
    f: &[f64],
    alpha: f64,
    count: usize,
) -> Result<MartingaleTransform> {
    positive("alpha", alpha)?;
    let table = HarmonicDerivative::new(dec, f)?;
    let n = dec.n();
    let params = PairingParams::new(alpha, cfg.s, cfg.truncation);
    let a = WeightedDerivative::new(&table, alpha, cfg.truncation)?;
    let integrands = Integrands {
        time: None,
        stochastic: Some(&a),
        support_level: support_for(dec, &[&table], cfg.s),
    };
    let bundle = if table.is_zero() {
        // Nothing to integrate: every path contributes 0.
        PathBundle {
            paths: Vec::new(),
            total_mass: dec.total_mass(),
        }
    } else {
        sample_paths(dec, cfg, count, &integrands)?
    };
    let mut bins = Vec::with_capacity(n);
    let mut oracle = Vec::with_capacity(n);
    let mut low_confidence = Vec::new();
    for x in 0..n {
        let mut indicator = vec![0.0; n];
        indicator[x] = 1.0;
        let truth = if table.is_zero() {
            0.0
        } else {
            pairing_for_chain(dec, f, &indicator, &params)? / dec.weights()[x]
        };
        oracle.push(truth);
        if table.is_zero() {
            bins.push(McEstimate {
                mean: 0.0,
                standard_error: 0.0,
                count,
            });
            continue;
        }
        let est = McEstimate::from_samples(
            bundle
                .paths
                .iter()
                .filter(|p| !p.censored && p.terminal_state == x)
                .map(|p| p.stochastic),
        );
        if est.count < MIN_BIN_PATHS {
            low_confidence.push(x);
        }
        bins.push(est);
    }
    let second_moment = if table.is_zero() {
        McEstimate {
            mean: 0.0,
            standard_error: 0.0,
            count,
        }
    } else {
        bundle.estimate(|p| p.stochastic * p.stochastic).scaled(bundle.total_mass)
    };
    let fine_shift = if table.is_zero() {
        0.0
    } else {
        bundle.estimate(|p| p.stochastic_fine - p.stochastic).mean
    };
    Ok(MartingaleTransform {
        alpha,
        bins,
        oracle,
        low_confidence,
        censored_fraction: bundle.censored_fraction(),
        second_moment,
        fine_shift,
    })
}

impl MartingaleTransform {
    /// Largest `|estimate - oracle| / SE` over bins, against 3.
    pub fn report(&self) -> CheckReport {
        let mut worst = 0.0f64;
        let mut report_metrics = Vec::new();
        for (x, (est, truth)) in self.bins.iter().zip(&self.oracle).enumerate() {
            let z = if est.standard_error > 0.0 {
                (est.mean - truth).abs() / est.standard_error
            } else if est.mean == *truth {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
            report_metrics.push((format!("bin{x}_estimate"), est.mean));
            report_metrics.push((format!("bin{x}_oracle"), *truth));
            report_metrics.push((format!("bin{x}_standard_error"), est.standard_error));
        }
        let mut report = CheckReport::at_most("martingale-transform", TRANSFORM_ANCHOR, worst, 3.0, 0.0)
            .with_metric("alpha", self.alpha)
            .with_metric("censored_fraction", self.censored_fraction);
        for (k, v) in report_metrics {
            report = report.with_metric(k, v);
        }
        if !self.low_confidence.is_empty() {
            report = report.inconclusive(format!(
                "terminal states {:?} have fewer than {MIN_BIN_PATHS} paths",
                self.low_confidence
            ));
        }
        if self.censored_fraction > MAX_CENSORED_FRACTION {
            report = report.inconclusive("too many censored paths");
        }
        report
    }

    /// `sum(m) E[SI^2]` against the pairing of `f` with itself at `(2 alpha, s, N^2)`.
    pub fn ito_report(&self, dec: &SpectralDecomposition, f: &[f64], cfg: &ProcessConfig) -> Result<CheckReport> {
        let params = PairingParams::new(2.0 * self.alpha, cfg.s, cfg.truncation * cfg.truncation);
        let truth = pairing_for_chain(dec, f, f, &params)?;
        let est = self.second_moment;
        let report = if est.standard_error == 0.0 {
            CheckReport::equality("ito-isometry", ITO_ANCHOR, est.mean, truth, 1e-12)
        } else {
            CheckReport::monte_carlo("ito-isometry", ITO_ANCHOR, est.mean, truth, est.standard_error, 3.0)
        };
        Ok(report.with_metric("paths", est.count as f64))
    }
}

/// The three pairing values: `(a)` MC of `h(X_tau) SI`, `(b)` MC of the
/// time integral, `(c)` the pairing quadrature, all scaled by `sum(m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingMc {
    pub alpha: f64,
    pub projection: McEstimate,
    pub time_integral: McEstimate,
    /// `(a) - (b)` path by path.
    pub difference: McEstimate,
    pub quadrature: f64,
    pub censored_fraction: f64,
    /// Fine-minus-coarse shifts of `(a)` and `(b)`.
    pub fine_shift_projection: f64,
    pub fine_shift_time: f64,
}

pub fn pairing_mc(
    dec: &SpectralDecomposition,
    cfg: &ProcessConfig,
    f: &[f64],
    h: &[f64],
    alpha: f64,
    count: usize,
) -> Result<PairingMc> {
    positive("alpha", alpha)?;
    check_len(dec, h)?;
    let tf = HarmonicDerivative::new(dec, f)?;
    let th = HarmonicDerivative::new(dec, h)?;
    let params = PairingParams::new(alpha, cfg.s, cfg.truncation);
    let quadrature = if tf.is_zero() || th.is_zero() {
        0.0
    } else {
        pairing_for_chain(dec, f, h, &params)?
    };
    let zero = McEstimate {
        mean: 0.0,
        standard_error: 0.0,
        count,
    };
    if tf.is_zero() {
        return Ok(PairingMc {
            alpha,
            projection: zero,
            time_integral: zero,
            difference: zero,
            quadrature,
            censored_fraction: 0.0,
            fine_shift_projection: 0.0,
            fine_shift_time: 0.0,
        });
    }
    let a = WeightedDerivative::new(&tf, alpha, cfg.truncation)?;
    let b = |x: usize, y: f64| a.value(x, y) * th.eval(x, y);
    let integrands = Integrands {
        time: Some(&b),
        stochastic: Some(&a),
        support_level: support_for(dec, &[&tf, &th], cfg.s),
    };
    let bundle = sample_paths(dec, cfg, count, &integrands)?;
    let mass = bundle.total_mass;
    Ok(PairingMc {
        alpha,
        projection: bundle.estimate(|p| h[p.terminal_state] * p.stochastic).scaled(mass),
        time_integral: bundle.estimate(|p| p.time).scaled(mass),
        difference: bundle.estimate(|p| h[p.terminal_state] * p.stochastic - p.time).scaled(mass),
        quadrature,
        censored_fraction: bundle.censored_fraction(),
        fine_shift_projection: mass
            * bundle.estimate(|p| h[p.terminal_state] * (p.stochastic_fine - p.stochastic)).mean,
        fine_shift_time: mass * bundle.estimate(|p| p.time_fine - p.time).mean,
    })
}

/// `-1`, `0` or `1`; unlike `f64::signum`, zero maps to zero.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff.abs() / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

impl PairingMc {
    /// Passes when `(a)`, `(b)` and `(c)` are pairwise within 3 standard errors.
    pub fn report(&self) -> CheckReport {
        let za = z_score(self.projection.mean - self.quadrature, self.projection.standard_error);
        let zb = z_score(self.time_integral.mean - self.quadrature, self.time_integral.standard_error);
        let zab = z_score(self.difference.mean, self.difference.standard_error);
        let mut report = CheckReport::monte_carlo(
            "pairing-mc",
            PROJECTION_ANCHOR,
            self.projection.mean,
            self.quadrature,
            self.projection.standard_error,
            3.0,
        )
        .with_metric("alpha", self.alpha)
        .with_metric("a_projection", self.projection.mean)
        .with_metric("a_standard_error", self.projection.standard_error)
        .with_metric("b_time_integral", self.time_integral.mean)
        .with_metric("b_standard_error", self.time_integral.standard_error)
        .with_metric("c_quadrature", self.quadrature)
        .with_metric("z_a_c", za)
        .with_metric("z_b_c", zb)
        .with_metric("z_a_b", zab)
        .with_metric("paths", self.projection.count as f64)
        .with_metric("censored_fraction", self.censored_fraction);
        if report.passed() && (zb > 3.0 || zab > 3.0) {
            report = report.fail(format!("pairwise z-scores a-c {za:.2}, b-c {zb:.2}, a-b {zab:.2}"));
        }
        if self.censored_fraction > MAX_CENSORED_FRACTION {
            report = report.inconclusive("too many censored paths");
        }
        report
    }
}

/// Chi-square test of the terminal states against `m / sum(m)`; passes at
/// the 1% level.
pub fn occupation_check(dec: &SpectralDecomposition, bundle: &PathBundle) -> Result<CheckReport> {
    let n = dec.n();
    let mut counts = vec![0usize; n];
    for p in bundle.paths.iter().filter(|p| !p.censored) {
        counts[p.terminal_state] += 1;
    }
    let total: usize = counts.iter().sum();
    if n < 2 || total == 0 {
        return Ok(CheckReport::skipped(
            "occupation-chi-square",
            OCCUPATION_ANCHOR,
            "needs at least two states and one finished path",
        ));
    }
    let mass = dec.total_mass();
    let statistic: f64 = counts
        .iter()
        .zip(dec.weights())
        .map(|(&c, &m)| {
            let expected = total as f64 * m / mass;
            (c as f64 - expected).powi(2) / expected
        })
        .sum();
    let dist = ChiSquared::new((n - 1) as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let critical = dist.inverse_cdf(0.99);
    let p_value = 1.0 - dist.cdf(statistic);
    Ok(
        CheckReport::at_most("occupation-chi-square", OCCUPATION_ANCHOR, statistic, critical, 0.0)
            .with_metric("p_value", p_value)
            .with_metric("degrees_of_freedom", (n - 1) as f64)
            .with_metric("paths", total as f64),
    )
}

/// Largest `|mean(dt/2) - mean(dt)| / SE` over the supplied estimates;
/// passes below 1.
pub fn dt_halving_report(shifts: &[(&str, f64, f64)]) -> CheckReport {
    let mut worst = 0.0f64;
    let mut report_metrics = Vec::new();
    for (label, shift, se) in shifts {
        let ratio = z_score(*shift, *se);
        worst = worst.max(ratio);
        report_metrics.push((format!("{label}_shift"), *shift));
        report_metrics.push((format!("{label}_standard_error"), *se));
    }
    let mut report = CheckReport::at_most("dt-halving", DT_HALVING_ANCHOR, worst, 1.0, 0.0);
    for (k, v) in report_metrics {
        report = report.with_metric(k, v);
    }
    report
}

/// Drift of `u_f(Z_{t ^ tau}) - u_f(Z_0)` for one clock ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockDrift {
    pub kappa: f64,
    pub checkpoints: Vec<f64>,
    pub drifts: Vec<McEstimate>,
    /// Sign of `(1/2 - kappa) u_f(Z_0)`.
    pub predicted_sign: f64,
}

impl ClockDrift {
    pub fn drift_free(&self) -> bool {
        self.drifts.iter().all(|d| d.mean.abs() <= 3.0 * d.standard_error)
    }

    /// The last checkpoint shows a significant drift of the predicted sign.
    pub fn matches_prediction(&self) -> bool {
        let last = self.drifts.last().expect("at least one checkpoint");
        last.mean.abs() > 3.0 * last.standard_error && sign(last.mean) == self.predicted_sign
    }
}

pub const CLOCK_RATIOS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// Simulates `u_f(Z_{t ^ tau})` at the checkpoints from a fixed start state
/// for each clock ratio; the start state maximises `|u_f(x, s)|`.
pub fn clock_calibration(
    dec: &SpectralDecomposition,
    f: &[f64],
    s: f64,
    dt: f64,
    checkpoints: &[f64],
    count: usize,
    seed: u64,
) -> Result<Vec<ClockDrift>> {
    positive("s", s)?;
    positive("dt", dt)?;
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[1] <= w[0]) || checkpoints[0] <= 0.0 {
        return Err(Error::InvalidInput("checkpoints must be positive and increasing".into()));
    }
    let table = HarmonicDerivative::new(dec, f)?;
    let start = (0..dec.n())
        .max_by(|&a, &b| table.extension(a, s).abs().total_cmp(&table.extension(b, s).abs()))
        .unwrap_or(0);
    let u0 = table.extension(start, s);
    CLOCK_RATIOS
        .iter()
        .map(|&kappa| {
            let sampler = ChainSampler::new(dec, kappa);
            let samples: Vec<Vec<f64>> = (0..count as u64)
                .into_par_iter()
                .map(|i| clock_path(&sampler, &table, start, s, dt, checkpoints, seed, i))
                .collect();
            let drifts = (0..checkpoints.len())
                .map(|c| McEstimate::from_samples(samples.iter().map(|v| v[c] - u0)))
                .collect();
            Ok(ClockDrift {
                kappa,
                checkpoints: checkpoints.to_vec(),
                drifts,
                predicted_sign: sign((0.5 - kappa) * u0),
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn clock_path(
    sampler: &ChainSampler,
    table: &HarmonicDerivative,
    start: usize,
    s: f64,
    dt: f64,
    checkpoints: &[f64],
    seed: u64,
    index: u64,
) -> Vec<f64> {
    let mut rng = path_rng(seed, index);
    let mut chain = ChainState {
        x: start,
        next_jump: sampler.holding(start, &mut rng),
    };
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut t = 0.0;
    let mut y = s;
    let mut stopped: Option<f64> = None;
    for &checkpoint in checkpoints {
        if let Some(v) = stopped {
            out.push(v);
            continue;
        }
        let steps = ((checkpoint - t) / dt).ceil().max(1.0) as usize;
        let h = (checkpoint - t) / steps as f64;
        for _ in 0..steps {
            let z: f64 = rng.sample(StandardNormal);
            let next = y + h.sqrt() * z;
            let u: f64 = rng.random();
            if u < bridge_kill_probability(y, next, h) {
                let tau = t + h * kill_fraction(y, next, h, &mut rng);
                chain.advance(sampler, tau, &mut rng);
                stopped = Some(table.extension(chain.x, 0.0));
                break;
            }
            y = next;
            t += h;
            chain.advance(sampler, t, &mut rng);
        }
        match stopped {
            Some(v) => out.push(v),
            None => {
                t = checkpoint;
                out.push(table.extension(chain.x, y));
            }
        }
    }
    out
}

/// Passes when `kappa = 1/2` is the only drift-free clock ratio and every
/// other ratio drifts with the predicted sign.
pub fn clock_calibration_report(drifts: &[ClockDrift]) -> CheckReport {
    let free: Vec<f64> = drifts.iter().filter(|d| d.drift_free()).map(|d| d.kappa).collect();
    let value = if free.len() == 1 { free[0] } else { f64::NAN };
    let mut report = CheckReport::equality("clock-calibration", CLOCK_ANCHOR, value, 0.5, 0.0);
    for d in drifts {
        for (t, est) in d.checkpoints.iter().zip(&d.drifts) {
            report = report
                .with_metric(format!("kappa{}_t{}_drift", fmt_param(d.kappa), fmt_param(*t)), est.mean)
                .with_metric(
                    format!("kappa{}_t{}_standard_error", fmt_param(d.kappa), fmt_param(*t)),
                    est.standard_error,
                );
        }
    }
    if drifts.iter().all(|d| d.predicted_sign == 0.0) {
        return report.inconclusive("f has no non-constant part: every clock ratio is drift-free");
    }
    if free.is_empty() {
        return report.fail("no clock ratio is drift-free: the simulation is defective");
    }
    if free.len() > 1 {
        return report.fail(format!("several clock ratios are drift-free: {free:?}"));
    }
    let wrong: Vec<f64> = drifts
        .iter()
        .filter(|d| d.kappa != 0.5 && !d.matches_prediction())
        .map(|d| d.kappa)
        .collect();
    if !wrong.is_empty() {
        return report.fail(format!("clock ratios {wrong:?} do not drift with the predicted sign"));
    }
    report
}

/// Monte Carlo ratios `<T_alpha^{s,N} f, h> / <I_alpha f, h>` along `s`,
/// each compared with its quadrature value.
pub fn limit_constant_mc(
    dec: &SpectralDecomposition,
    cfg: &ProcessConfig,
    f: &[f64],
    h: &[f64],
    alpha: f64,
    s_values: &[f64],
    count: usize,
) -> Result<CheckReport> {
    let i_f = dec.fractional_integral(alpha, f)?;
    let denominator = dec.inner(&i_f, h);
    if denominator == 0.0 {
        return Err(Error::InvalidInput("<I_alpha f, h> vanishes; the ratio is undefined".into()));
    }
    let mut worst = 0.0f64;
    let mut metrics = Vec::new();
    let mut censored = 0.0f64;
    for &s in s_values {
        let mut local = cfg.clone();
        local.s = s;
        local.truncation = cfg.truncation.max(s.powf(alpha));
        let run = pairing_mc(dec, &local, f, h, alpha, count)?;
        let ratio = run.projection.mean / denominator;
        let se = run.projection.standard_error / denominator.abs();
        let truth = run.quadrature / denominator;
        worst = worst.max(z_score(ratio - truth, se));
        censored = censored.max(run.censored_fraction);
        metrics.push((format!("ratio_mc_s{}", fmt_param(s)), ratio));
        metrics.push((format!("ratio_se_s{}", fmt_param(s)), se));
        metrics.push((format!("ratio_quadrature_s{}", fmt_param(s)), truth));
    }
    let mut report = CheckReport::at_most(
        format!("limit-constant-mc-alpha{}", fmt_param(alpha)),
        crate::functionals::LIMIT_CONSTANT_ANCHOR,
        worst,
        3.0,
        0.0,
    );
    for (k, v) in metrics {
        report = report.with_metric(k, v);
    }
    if censored > MAX_CENSORED_FRACTION {
        report = report.inconclusive("too many censored paths");
    }
    Ok(report)
}

/// Terminal states under the stationary start law, with no integrands.
pub fn terminal_states(dec: &SpectralDecomposition, cfg: &ProcessConfig, count: usize) -> Result<PathBundle> {
    let cfg = cfg.clone().with_start(StartLaw::Stationary);
    sample_paths(dec, &cfg, count, &Integrands::none(cfg.s))
}
