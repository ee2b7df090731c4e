//! Named check suites and their run configuration.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::continuum::{
    fractional_integral_at_points, heat_apply, hls_exponent, hls_gfunction_check, hls_ratio_check,
    poisson_dimension_check, riesz_apply, varopoulos_slope, GridField, GridSpec, TimeQuadrature,
};
use crate::error::{Error, Result};
use crate::functionals::{
    cauchy_schwarz_chain, fmt_param, frac_g_function, g_function, hedberg_split, limit_constant, pairing_for_chain,
    pairing_spectral_limit, stein_check, HalfSpaceField, HedbergInput, PairingParams,
};
use crate::quadrature::{integrate_adaptive, integrate_adaptive_semi_infinite};
use crate::report::CheckReport;
use crate::spectral::{weighted_norm, ChainModel, SpectralDecomposition};
use crate::stochastic::{
    clock_calibration, clock_calibration_report, dt_halving_report, exit_identity_report, green_formula_check,
    limit_constant_mc, martingale_transform, occupation_check, pairing_mc, terminal_states, GreenIntegrand,
    ProcessConfig,
};
use crate::subordination::{
    density, derivative_bound_check, derivative_bound_constant, dy_via_subordination, poisson_via_subordination,
    SubordinationOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Spectral,
    Subordination,
    Continuum,
    Functionals,
    Mc,
    All,
}

impl Suite {
    pub const SINGLE: [Suite; 5] = [
        Suite::Spectral,
        Suite::Subordination,
        Suite::Continuum,
        Suite::Functionals,
        Suite::Mc,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "spectral" => Ok(Suite::Spectral),
            "subordination" => Ok(Suite::Subordination),
            "continuum" => Ok(Suite::Continuum),
            "functionals" => Ok(Suite::Functionals),
            "mc" => Ok(Suite::Mc),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidInput(format!(
                "field `suite`: unknown suite `{other}` (expected spectral, subordination, continuum, functionals, mc or all)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Spectral => "spectral",
            Suite::Subordination => "subordination",
            Suite::Continuum => "continuum",
            Suite::Functionals => "functionals",
            Suite::Mc => "mc",
            Suite::All => "all",
        }
    }
}

/// Everything a run needs. Missing JSON fields take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub suite: Suite,
    /// Built-in chain name (optionally `builtin:`-prefixed) or a JSON chain file.
    pub chain: String,
    pub grid_n: usize,
    pub grid_extent: f64,
    pub alpha: Vec<f64>,
    pub p: Vec<f64>,
    pub paths: usize,
    pub dt: f64,
    pub s: Vec<f64>,
    pub truncation: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            chain: "builtin:two-state".into(),
            grid_n: 48,
            grid_extent: 8.0,
            alpha: vec![1.0],
            p: vec![2.0],
            paths: 100_000,
            dt: 0.004,
            s: vec![5.0],
            truncation: 1e3,
            seed: 7,
        }
    }
}

fn field_error(field: &str, message: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("field `{field}`: {message}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." || path == "?" {
                Error::InvalidInput(format!("config: {inner}"))
            } else {
                field_error(&path, inner)
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (field, list) in [("alpha", &self.alpha), ("p", &self.p), ("s", &self.s)] {
            if list.is_empty() {
                return Err(field_error(field, "list must not be empty"));
            }
            if let Some(v) = list.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(field_error(field, format!("values must be positive and finite, got {v}")));
            }
        }
        if let Some(p) = self.p.iter().find(|p| **p <= 1.0) {
            return Err(field_error("p", format!("values must exceed 1, got {p}")));
        }
        if self.grid_n < 8 {
            return Err(field_error("grid_n", format!("must be at least 8, got {}", self.grid_n)));
        }
        if !(self.grid_extent.is_finite() && self.grid_extent > 0.0) {
            return Err(field_error("grid_extent", format!("must be positive, got {}", self.grid_extent)));
        }
        if self.paths < 2 {
            return Err(field_error("paths", format!("need at least 2 paths, got {}", self.paths)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(field_error("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.truncation > 0.0) {
            return Err(field_error("truncation", format!("must be positive, got {}", self.truncation)));
        }
        if matches!(self.suite, Suite::Continuum | Suite::All) {
            for &alpha in &self.alpha {
                for &p in &self.p {
                    hls_exponent(p, alpha, 3).map_err(|e| field_error("alpha/p", e))?;
                }
            }
        }
        self.chain_model()?;
        Ok(())
    }

    pub fn chain_model(&self) -> Result<ChainModel> {
        let path = Path::new(&self.chain);
        if !self.chain.starts_with("builtin:") && (self.chain.ends_with(".json") || path.exists()) {
            if !path.exists() {
                return Err(field_error("chain", format!("file `{}` does not exist", self.chain)));
            }
            return ChainModel::load(path).map_err(|e| field_error("chain", e));
        }
        ChainModel::builtin(&self.chain).map_err(|e| field_error("chain", e))
    }

    fn grid(&self) -> GridSpec {
        GridSpec {
            d: 3,
            n: self.grid_n,
            extent: self.grid_extent,
        }
    }

    fn process(&self, s: f64) -> ProcessConfig {
        ProcessConfig::new(s, self.dt)
            .with_seed(self.seed)
            .with_truncation(self.truncation)
    }
}

/// Runs one suite, or every suite in order for [`Suite::All`]. A check that
/// errors becomes a failed report carrying the error, so the rest still run.
pub fn run_suite(config: &RunConfig) -> Result<Vec<CheckReport>> {
    config.validate()?;
    let dec = config.chain_model()?.decompose()?;
    let suites: Vec<Suite> = if config.suite == Suite::All {
        Suite::SINGLE.to_vec()
    } else {
        vec![config.suite]
    };
    let mut reports = Vec::new();
    for suite in suites {
        let runs: Vec<(&str, Box<dyn Fn() -> Result<Vec<CheckReport>> + '_>)> = match suite {
            Suite::Spectral => spectral_checks(config, &dec),
            Suite::Subordination => subordination_checks(config, &dec),
            Suite::Continuum => continuum_checks(config),
            Suite::Functionals => functionals_checks(config, &dec),
            Suite::Mc => mc_checks(config, &dec),
            Suite::All => unreachable!("expanded above"),
        };
        for (name, run) in runs {
            let failed = |why: String| CheckReport::equality(name, anchor_of(name), f64::NAN, 0.0, 0.0).fail(why);
            match std::panic::catch_unwind(std::panic::AssertUnwindSafe(&run)) {
                Ok(Ok(mut batch)) => reports.append(&mut batch),
                Ok(Err(e)) => reports.push(failed(format!("error: {e}"))),
                Err(panic) => {
                    let why = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_default();
                    reports.push(failed(format!("panicked: {why}")));
                }
            }
        }
    }
    Ok(reports)
}

/// Per-path records of the exit-law run (`s = 1`), as CSV.
pub fn paths_csv(config: &RunConfig) -> Result<String> {
    config.validate()?;
    let dec = config.chain_model()?.decompose()?;
    Ok(terminal_states(&dec, &config.process(1.0), config.paths)?.to_csv())
}

type Runs<'a> = Vec<(&'static str, Box<dyn Fn() -> Result<Vec<CheckReport>> + 'a>)>;

fn one(report: CheckReport) -> Result<Vec<CheckReport>> {
    Ok(vec![report])
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Seeded test function on the chain; zero-mean when requested.
fn test_function(dec: &SpectralDecomposition, seed: u64, zero_mean: bool) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..dec.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
    if zero_mean {
        dec.project_out_null(&raw)
    } else {
        Ok(raw)
    }
}

/// The slowest non-constant mode scaled to unit sup norm; `(1, -1)` on two states.
fn slow_mode(dec: &SpectralDecomposition) -> Result<Vec<f64>> {
    let k = (0..dec.n())
        .find(|&k| dec.lambdas()[k] > 0.0)
        .ok_or_else(|| Error::InvalidInput("chain has no non-constant mode".into()))?;
    let phi = &dec.vectors()[k];
    let scale = phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(phi.iter().map(|v| v / scale).collect())
}

/// Random chains of the sizes used by the chain-family checks.
fn random_family(count: u64, max_n: usize, seed: u64) -> Result<Vec<SpectralDecomposition>> {
    (0..count)
        .map(|i| ChainModel::random(2 + (i as usize % (max_n - 1)), seed.wrapping_add(i))?.decompose())
        .collect()
}

fn spectral_checks<'a>(config: &'a RunConfig, dec: &'a SpectralDecomposition) -> Runs<'a> {
    let seed = config.seed;
    vec![
        (
            "decomposition-reconstruction",
            Box::new(move || {
                let model = config.chain_model()?;
                let n = dec.n();
                let rebuilt = dec.reconstruct_negative_generator();
                let err = (0..n * n).fold(0.0f64, |m, k| m.max((rebuilt[k] + model.generator()[k]).abs()));
                let scale = model.generator().iter().fold(1.0f64, |a, v| a.max(v.abs()));
                one(CheckReport::at_most(
                    "decomposition-reconstruction",
                    anchor_of("decomposition-reconstruction"),
                    err / scale,
                    0.0,
                    1e-10,
                ))
            }),
        ),
        (
            "semigroup-law",
            Box::new(move || {
                let f = test_function(dec, seed, false)?;
                let mut worst = 0.0f64;
                for (t, s) in [(0.1, 0.3), (0.5, 1.5), (2.0, 0.7)] {
                    let joint = dec.apply_semigroup(t + s, &f)?;
                    let split = dec.apply_semigroup(t, &dec.apply_semigroup(s, &f)?)?;
                    worst = worst.max(max_diff(&joint, &split));
                }
                one(CheckReport::at_most("semigroup-law", anchor_of("semigroup-law"), worst, 0.0, 1e-10))
            }),
        ),
        (
            "semigroup-symmetry",
            Box::new(move || {
                let f = test_function(dec, seed, false)?;
                let g = test_function(dec, seed + 1, false)?;
                let mut worst = 0.0f64;
                for t in [0.05, 0.7, 3.0] {
                    let a = dec.inner(&dec.apply_semigroup(t, &f)?, &g);
                    let b = dec.inner(&f, &dec.apply_semigroup(t, &g)?);
                    worst = worst.max((a - b).abs());
                }
                one(CheckReport::at_most("semigroup-symmetry", anchor_of("semigroup-symmetry"), worst, 0.0, 1e-10))
            }),
        ),
        (
            "semigroup-markov",
            Box::new(move || {
                let ones = vec![1.0; dec.n()];
                let positive: Vec<f64> = test_function(dec, seed, false)?.iter().map(|v| v.abs()).collect();
                let mut conservation = 0.0f64;
                let mut negativity = 0.0f64;
                for t in [0.01, 0.5, 10.0] {
                    conservation = conservation.max(max_diff(&dec.apply_semigroup(t, &ones)?, &ones));
                    let tf = dec.apply_semigroup(t, &positive)?;
                    negativity = negativity.max(tf.iter().fold(0.0f64, |a, v| a.max(-v)));
                }
                one(CheckReport::at_most(
                    "semigroup-markov",
                    anchor_of("semigroup-markov"),
                    conservation.max(negativity - 1e-12).max(0.0),
                    0.0,
                    1e-10,
                )
                .with_metric("conservation_error", conservation)
                .with_metric("most_negative", -negativity))
            }),
        ),
        (
            "lp-contraction",
            Box::new(move || {
                let f = test_function(dec, seed, false)?;
                let m = dec.weights();
                let mut worst = 0.0f64;
                let mut report_metrics = Vec::new();
                for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
                    let base = weighted_norm(m, &f, p);
                    let mut ratio = 0.0f64;
                    for t in [0.05, 0.5, 5.0] {
                        ratio = ratio.max(weighted_norm(m, &dec.apply_semigroup(t, &f)?, p) / base);
                    }
                    worst = worst.max(ratio);
                    report_metrics.push((format!("ratio_p{}", fmt_param(p)), ratio));
                }
                let mut report = CheckReport::at_most("lp-contraction", anchor_of("lp-contraction"), worst, 1.0, 1e-10);
                for (k, v) in report_metrics {
                    report = report.with_metric(k, v);
                }
                one(report)
            }),
        ),
        (
            "fractional-integral-quadrature",
            Box::new(move || {
                let mut reports = Vec::new();
                let f = test_function(dec, seed, true)?;
                for alpha in [0.5, 1.0, 1.5] {
                    let exact = dec.fractional_integral(alpha, &f)?;
                    let (quad, rule) = dec.fractional_integral_quadrature(alpha, &f, 1e-12)?;
                    let scale = dec.norm(&exact, 2.0);
                    let diff: Vec<f64> = quad.iter().zip(&exact).map(|(a, b)| a - b).collect();
                    let relative = if scale > 0.0 { dec.norm(&diff, 2.0) / scale } else { dec.norm(&diff, 2.0) };
                    reports.push(
                        CheckReport::at_most(
                            format!("fractional-integral-quadrature-alpha{}", fmt_param(alpha)),
                            anchor_of("fractional-integral-quadrature"),
                            relative,
                            0.0,
                            1e-7,
                        )
                        .with_metric("nodes", rule.len() as f64),
                    );
                }
                Ok(reports)
            }),
        ),
    ]
}

fn subordination_checks<'a>(config: &'a RunConfig, dec: &'a SpectralDecomposition) -> Runs<'a> {
    let seed = config.seed;
    vec![
        (
            "subordinator-laplace",
            Box::new(|| {
                let (mass, _) = integrate_adaptive_semi_infinite(
                    |s| if s > 0.0 { density(1.0, s).unwrap_or(0.0) } else { 0.0 },
                    0.0,
                    1e-12,
                    1e-12,
                )?;
                let (laplace, _) = integrate_adaptive_semi_infinite(
                    |s| if s > 0.0 { (-4.0 * s).exp() * density(1.0, s).unwrap_or(0.0) } else { 0.0 },
                    0.0,
                    1e-13,
                    1e-12,
                )?;
                let err = (mass - 1.0).abs().max((laplace - (-2.0f64).exp()).abs());
                one(
                    CheckReport::at_most("subordinator-laplace", anchor_of("subordinator-laplace"), err, 0.0, 1e-8)
                        .with_metric("mass", mass)
                        .with_metric("laplace_at_4", laplace),
                )
            }),
        ),
        (
            "poisson-subordination",
            Box::new(move || {
                let mut family = random_family(20, 16, seed)?;
                family.push(dec.clone());
                let mut worst = 0.0f64;
                for (i, d) in family.iter().enumerate() {
                    let f = test_function(d, seed + i as u64, false)?;
                    let opts = SubordinationOptions::for_chain(d, &f, 1e-10)?;
                    for y in [0.05, 0.5, 2.0, 8.0] {
                        let sub = poisson_via_subordination(|s| d.apply_semigroup(s, &f), y, &opts)?.values;
                        worst = worst.max(max_diff(&sub, &d.apply_poisson(y, &f)?));
                    }
                }
                one(
                    CheckReport::at_most("poisson-subordination", anchor_of("poisson-subordination"), worst, 0.0, 1e-6)
                        .with_metric("chains", family.len() as f64),
                )
            }),
        ),
        (
            "dy-subordination",
            Box::new(move || {
                let f = test_function(dec, seed, false)?;
                let opts = SubordinationOptions::for_chain(dec, &f, 1e-12)?;
                let mut worst = 0.0f64;
                for y in [0.1, 0.7, 3.0] {
                    let sub = dy_via_subordination(|s| dec.apply_semigroup(s, &f), y, &opts)?.values;
                    worst = worst.max(max_diff(&sub, &dec.dy_harmonic(y, &f, 1)?));
                }
                one(CheckReport::at_most("dy-subordination", anchor_of("dy-subordination"), worst, 0.0, 1e-6))
            }),
        ),
        (
            "derivative-bound-constant",
            Box::new(|| {
                one(CheckReport::equality(
                    "derivative-bound-constant",
                    anchor_of("derivative-bound-constant"),
                    derivative_bound_constant(),
                    4.0 * (-1.25f64).exp(),
                    1e-9,
                ))
            }),
        ),
        (
            "derivative-bound",
            Box::new(move || {
                let ys: Vec<f64> = (0..60).map(|k| 10f64.powf(-3.0 + 5.0 * k as f64 / 59.0)).collect();
                let mut family = random_family(10, 16, seed + 100)?;
                family.push(dec.clone());
                let mut worst: Option<CheckReport> = None;
                for (i, d) in family.iter().enumerate() {
                    let f: Vec<f64> = test_function(d, seed + 200 + i as u64, false)?.iter().map(|v| v.abs()).collect();
                    let report = derivative_bound_check(d, &f, &ys, 1e-3)?;
                    if worst.as_ref().is_none_or(|w| report.value > w.value) {
                        worst = Some(report);
                    }
                }
                let report = worst.expect("family is non-empty");
                one(report.with_metric("functions", family.len() as f64))
            }),
        ),
    ]
}

/// `I_1` of `e^{-|x|^2/2}` in three dimensions at radius `r` by the radial
/// reduction of the Riesz kernel.
fn riesz_gaussian_radial(r: f64) -> Result<f64> {
    let c = 1.0 / (2.0 * PI * PI);
    if r == 0.0 {
        return Ok((2.0 / PI).sqrt());
    }
    let g = |rho: f64| {
        if rho == 0.0 || rho == r {
            0.0
        } else {
            rho * (-rho * rho / 2.0).exp() * ((r + rho) / (r - rho)).abs().ln()
        }
    };
    let (a, _) = integrate_adaptive(g, 0.0, r, 1e-14, 1e-13)?;
    let (b, _) = integrate_adaptive(g, r, r + 20.0, 1e-14, 1e-13)?;
    Ok(c * 2.0 * PI / r * (a + b))
}

fn continuum_checks(config: &RunConfig) -> Runs<'_> {
    let spec = config.grid();
    vec![
        (
            "heat-gaussian",
            Box::new(move || {
                let f = spec.gaussian(1.0)?;
                let mut worst = 0.0f64;
                let mut mass_drift = 0.0f64;
                for t in [0.05, 0.2] {
                    let s2: f64 = 1.0 + 2.0 * t;
                    let exact = GridField::from_fn(3, spec.n, spec.extent, |x| {
                        s2.powf(-1.5) * (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * s2)).exp()
                    })?;
                    let flowed = heat_apply(&f, t)?;
                    worst = worst.max(max_diff(flowed.values(), exact.values()));
                    mass_drift = mass_drift.max((flowed.mass() - f.mass()).abs() / f.mass());
                }
                one(
                    CheckReport::at_most("heat-gaussian", anchor_of("heat-gaussian"), worst, 0.0, 1e-6)
                        .with_metric("relative_mass_drift", mass_drift),
                )
            }),
        ),
        (
            "riesz-gaussian",
            Box::new(move || {
                let f = spec.gaussian(1.0)?;
                let h = f.spacing();
                let limit = spec.extent - 2.0 * h;
                let points: Vec<Vec<f64>> = [
                    [0.0, 0.0, 0.0],
                    [0.5, 0.0, 0.0],
                    [0.3, -0.4, 0.6],
                    [1.2, 0.7, -0.3],
                    [-2.0, 1.0, 0.5],
                    [0.1, 2.5, -1.7],
                ]
                .iter()
                .map(|p| p.to_vec())
                .filter(|p| p.iter().all(|v: &f64| v.abs() <= limit))
                .collect();
                let direct = riesz_apply(&f, 1.0, &points)?;
                let semigroup = fractional_integral_at_points(&f, 1.0, &points, TimeQuadrature::POINTS)?;
                let mut worst = 0.0f64;
                for ((x, d), s) in points.iter().zip(&direct).zip(&semigroup) {
                    let oracle = riesz_gaussian_radial(x.iter().map(|v| v * v).sum::<f64>().sqrt())?;
                    worst = worst.max(((d - oracle) / oracle).abs()).max(((s - oracle) / oracle).abs());
                }
                let origin = CheckReport::equality(
                    "riesz-gaussian-origin",
                    anchor_of("riesz-gaussian-origin"),
                    semigroup[0],
                    (2.0 / PI).sqrt(),
                    1e-3,
                )
                .with_metric("direct_kernel_value", direct[0])
                .with_metric("two_over_pi", 2.0 / PI)
                .with_note("the exact value is sqrt(2/pi); 2/pi is not the value of this integral");
                let agreement = CheckReport::at_most("riesz-semigroup-agreement", anchor_of("riesz-semigroup-agreement"), worst, 0.0, 1e-3)
                    .with_metric("points", points.len() as f64);
                let agreement = if points.len() < 5 {
                    agreement.inconclusive("grid too small for five interior points")
                } else {
                    agreement
                };
                Ok(vec![agreement, origin])
            }),
        ),
        (
            "riesz-orders",
            Box::new(move || {
                let f = spec.gaussian(1.0)?;
                let points = vec![vec![0.0, 0.2, 0.1], vec![0.8, -0.3, 0.4], vec![-1.1, 0.0, 1.3]];
                let mut reports = Vec::new();
                for &alpha in &config.alpha {
                    let direct = riesz_apply(&f, alpha, &points)?;
                    let semigroup = fractional_integral_at_points(&f, alpha, &points, TimeQuadrature::POINTS)?;
                    let worst = direct
                        .iter()
                        .zip(&semigroup)
                        .fold(0.0f64, |m, (d, s)| m.max(((d - s) / s).abs()));
                    reports.push(CheckReport::at_most(
                        format!("riesz-orders-alpha{}", fmt_param(alpha)),
                        anchor_of("riesz-orders"),
                        worst,
                        0.0,
                        1e-3,
                    ));
                }
                Ok(reports)
            }),
        ),
        (
            "varopoulos-slope",
            Box::new(move || {
                let f = spec.gaussian(1.0)?;
                [1.0, 2.0].iter().map(|&p| varopoulos_slope(&f, p, (0.04, 0.64), 7)).collect()
            }),
        ),
        (
            "poisson-dimension",
            Box::new(move || {
                let f = spec.gaussian(1.0)?;
                [1.0, 2.0].iter().map(|&p| poisson_dimension_check(&f, p, (0.2, 0.8), 5)).collect()
            }),
        ),
        (
            "hls-ratio",
            Box::new(move || {
                let mut reports = Vec::new();
                for &alpha in &config.alpha {
                    for &p in &config.p {
                        reports.extend(hls_ratio_check(&spec, alpha, p)?);
                    }
                }
                Ok(reports)
            }),
        ),
        (
            "hls-gfunction",
            Box::new(move || {
                let mut reports = Vec::new();
                for &alpha in &config.alpha {
                    for &p in &config.p {
                        reports.extend(hls_gfunction_check(&spec, alpha, p)?);
                    }
                }
                Ok(reports)
            }),
        ),
    ]
}

fn functionals_checks<'a>(config: &'a RunConfig, dec: &'a SpectralDecomposition) -> Runs<'a> {
    let seed = config.seed;
    vec![
        (
            "g1-l2-identity",
            Box::new(move || {
                let family = random_family(50, 16, seed + 300)?;
                let mut worst_g1 = 0.0f64;
                let mut worst_galpha = 0.0f64;
                let mut lp_ratios = [0.0f64; 2];
                for (i, d) in family.iter().enumerate() {
                    let f = test_function(d, seed + 400 + i as u64, true)?;
                    let hs = HalfSpaceField::with_default_rule(d, &f, 1, &[])?;
                    let g1 = g_function(&hs, 1)?;
                    let half = 0.5 * d.norm(&f, 2.0);
                    worst_g1 = worst_g1.max(((d.norm(&g1, 2.0) - half) / half).abs());
                    for (slot, p) in [1.5, 3.0].iter().enumerate() {
                        lp_ratios[slot] = lp_ratios[slot].max(d.norm(&g1, *p) / d.norm(&f, *p));
                    }
                    for &alpha in &config.alpha {
                        let lhs = d.norm(&frac_g_function(&hs, alpha)?, 2.0);
                        let rhs = gamma(2.0 * alpha + 2.0).sqrt() / 2f64.powf(alpha + 1.0)
                            * d.norm(&d.fractional_integral(alpha, &f)?, 2.0);
                        worst_galpha = worst_galpha.max(((lhs - rhs) / rhs).abs());
                    }
                }
                let g1 = CheckReport::at_most("g1-l2-identity", anchor_of("g1-l2-identity"), worst_g1, 0.0, 1e-6)
                    .with_metric("functions", family.len() as f64);
                let galpha = CheckReport::at_most("galpha-l2-identity", anchor_of("galpha-l2-identity"), worst_galpha, 0.0, 1e-6);
                let lp = CheckReport::skipped(
                    "gfunction-lp-ratio",
                    anchor_of("gfunction-lp-ratio"),
                    "no constant is asserted; the largest ratios are recorded",
                )
                .with_metric("max_ratio_p1.5", lp_ratios[0])
                .with_metric("max_ratio_p3", lp_ratios[1]);
                Ok(vec![g1, galpha, lp])
            }),
        ),
        (
            "stein-maximal",
            Box::new(move || {
                let mut family = random_family(20, 16, seed + 500)?;
                family.push(dec.clone());
                let mut reports = Vec::new();
                for p in [1.5, 2.0, 3.0] {
                    let mut worst: Option<CheckReport> = None;
                    for (i, d) in family.iter().enumerate() {
                        let f = test_function(d, seed + 600 + i as u64, false)?;
                        let hs = HalfSpaceField::with_default_rule(d, &f, 0, &[])?;
                        let report = stein_check(&hs, p)?;
                        if worst.as_ref().is_none_or(|w| report.value > w.value) {
                            worst = Some(report);
                        }
                    }
                    reports.push(worst.expect("family is non-empty").with_metric("functions", family.len() as f64));
                }
                Ok(reports)
            }),
        ),
        (
            "hedberg-split",
            Box::new(|| {
                let input = HedbergInput {
                    m: 0.3,
                    f: 2.0,
                    alpha: 0.5,
                    p: 1.5,
                    d: 3.0,
                };
                let split = hedberg_split(&input)?;
                // Golden-section search in ln(delta) as the oracle.
                let (mut a, mut b) = (-30.0f64, 30.0f64);
                let r = 0.5 * (5f64.sqrt() - 1.0);
                while b - a > 1e-10 {
                    let c = b - r * (b - a);
                    let e = a + r * (b - a);
                    if input.objective(c.exp()) < input.objective(e.exp()) {
                        b = e;
                    } else {
                        a = c;
                    }
                }
                let delta = (0.5 * (a + b)).exp();
                let scaled = hedberg_split(&HedbergInput { m: 4.0 * input.m, ..input })?;
                let law = scaled.bound / split.bound / 4f64.powf(1.0 - input.alpha * input.p / input.d);
                one(
                    CheckReport::equality("hedberg-split", anchor_of("hedberg-split"), split.delta_star, delta, 1e-6 * delta)
                        .with_metric("bound", split.bound)
                        .with_metric("scaling_law_ratio", law),
                )
            }),
        ),
        (
            "pairing-spectral-limit",
            Box::new(move || {
                let f = test_function(dec, seed, true)?;
                let h = test_function(dec, seed + 1, true)?;
                let mut worst = 0.0f64;
                for &alpha in &config.alpha {
                    let quad = pairing_for_chain(dec, &f, &h, &PairingParams::new(alpha, f64::INFINITY, f64::INFINITY))?;
                    worst = worst.max((quad - pairing_spectral_limit(dec, &f, &h, alpha)?).abs());
                }
                one(CheckReport::at_most("pairing-spectral-limit", anchor_of("pairing-spectral-limit"), worst, 0.0, 1e-8))
            }),
        ),
        (
            "pairing-monotone",
            Box::new(move || {
                let f = test_function(dec, seed, true)?;
                let mut drops = 0.0f64;
                let mut previous = 0.0;
                for s in [0.1, 0.5, 1.0, 2.0, 5.0, 20.0, f64::INFINITY] {
                    let v = pairing_for_chain(dec, &f, &f, &PairingParams::new(config.alpha[0], s, f64::INFINITY))?;
                    drops = drops.max(previous - v);
                    previous = v;
                }
                one(CheckReport::at_most("pairing-monotone", anchor_of("pairing-monotone"), drops.max(0.0), 0.0, 1e-12))
            }),
        ),
        (
            "cauchy-schwarz-chain",
            Box::new(move || {
                let f = test_function(dec, seed, true)?;
                let h = test_function(dec, seed + 1, true)?;
                let hs_f = HalfSpaceField::with_default_rule(dec, &f, 1, &[config.s[0]])?;
                let hs_h = HalfSpaceField::new(dec, &h, hs_f.rule().clone(), 1)?;
                let chain = cauchy_schwarz_chain(&hs_f, &hs_h, config.alpha[0], config.s[0], 2.0)?;
                let excess = (chain.half_pairing - chain.pointwise).max(chain.pointwise - chain.holder);
                one(
                    CheckReport::at_most("cauchy-schwarz-chain", anchor_of("cauchy-schwarz-chain"), excess, 0.0, 1e-10)
                        .with_metric("half_pairing", chain.half_pairing)
                        .with_metric("pointwise", chain.pointwise)
                        .with_metric("holder", chain.holder),
                )
            }),
        ),
        (
            "limit-constant",
            Box::new(move || {
                let f = test_function(dec, seed, true)?;
                let s = [1.0, 2.0, 5.0, 10.0, 20.0];
                [0.5, 1.0]
                    .iter()
                    .map(|&alpha| Ok(limit_constant(dec, &f, &f, alpha, &s)?.report()))
                    .collect()
            }),
        ),
    ]
}

fn mc_checks<'a>(config: &'a RunConfig, dec: &'a SpectralDecomposition) -> Runs<'a> {
    let paths = config.paths;
    let alpha = config.alpha[0];
    vec![
        (
            "exit-identity",
            Box::new(move || {
                let cfg = config.process(1.0);
                let bundle = terminal_states(dec, &cfg, paths)?;
                let mut h = vec![0.0; dec.n()];
                h[0] = 1.0;
                Ok(vec![exit_identity_report(dec, &bundle, &h)?, occupation_check(dec, &bundle)?])
            }),
        ),
        (
            "green-formula",
            Box::new(move || {
                let cfg = config.process(1.0);
                Ok(vec![
                    green_formula_check(dec, &cfg, GreenIntegrand::Indicator { level: 1.0 }, paths)?,
                    green_formula_check(dec, &cfg, GreenIntegrand::PowerExp { alpha: 1.0 }, paths)?,
                ])
            }),
        ),
        (
            "martingale-transform",
            Box::new(move || {
                let f = slow_mode(dec)?;
                let cfg = config.process(config.s[0]);
                let mt = martingale_transform(dec, &cfg, &f, alpha, paths)?;
                Ok(vec![mt.report(), mt.ito_report(dec, &f, &cfg)?])
            }),
        ),
        (
            "pairing-mc",
            Box::new(move || {
                let f = slow_mode(dec)?;
                let cfg = config.process(config.s[0]);
                let run = pairing_mc(dec, &cfg, &f, &f, alpha, paths)?;
                let halving = dt_halving_report(&[
                    ("projection", run.fine_shift_projection, run.projection.standard_error),
                    ("time_integral", run.fine_shift_time, run.time_integral.standard_error),
                ]);
                Ok(vec![run.report(), halving])
            }),
        ),
        (
            "clock-calibration",
            Box::new(move || {
                let f = slow_mode(dec)?;
                let count = (paths / 5).max(1000);
                let drifts = clock_calibration(dec, &f, 0.5, config.dt.min(0.004), &[0.1, 0.25, 0.5], count, config.seed)?;
                one(clock_calibration_report(&drifts))
            }),
        ),
        (
            "limit-constant-mc",
            Box::new(move || {
                let f = slow_mode(dec)?;
                let cfg = config.process(1.0);
                one(limit_constant_mc(dec, &cfg, &f, &f, alpha, &[1.0, 2.0, 5.0, 10.0, 20.0], (paths / 5).max(1000))?)
            }),
        ),
    ]
}

/// Static description of a check family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckInfo {
    pub name: &'static str,
    pub suite: Suite,
    pub anchor: &'static str,
    pub oracle: &'static str,
    pub tolerance: &'static str,
}

pub const CATALOG: &[CheckInfo] = &[
    CheckInfo {
        name: "decomposition-reconstruction",
        suite: Suite::Spectral,
        anchor: "-L = sum_i lambda_i phi_i phi_i^* m",
        oracle: "the generator the chain was built from",
        tolerance: "relative max-entry error 1e-10",
    },
    CheckInfo {
        name: "semigroup-law",
        suite: Suite::Spectral,
        anchor: "T_{t+s} = T_t T_s",
        oracle: "composition of two spectral flows",
        tolerance: "max-norm 1e-10",
    },
    CheckInfo {
        name: "semigroup-symmetry",
        suite: Suite::Spectral,
        anchor: "<T_t f, g> = <f, T_t g>",
        oracle: "the adjoint pairing",
        tolerance: "1e-10",
    },
    CheckInfo {
        name: "semigroup-markov",
        suite: Suite::Spectral,
        anchor: "T_t 1 = 1 and f >= 0 implies T_t f >= 0",
        oracle: "conservation and positivity",
        tolerance: "1e-10 (negativity measured beyond -1e-12)",
    },
    CheckInfo {
        name: "lp-contraction",
        suite: Suite::Spectral,
        anchor: "||T_t f||_p <= ||f||_p",
        oracle: "ratio bound 1 for p in {1, 1.5, 2, 3, inf}",
        tolerance: "1e-10",
    },
    CheckInfo {
        name: "fractional-integral-quadrature",
        suite: Suite::Spectral,
        anchor: "I_alpha f = (1/Gamma(alpha/2)) int_0^inf t^{alpha/2 - 1} T_t f dt",
        oracle: "spectral values lambda^{-alpha/2} <f, phi> phi",
        tolerance: "relative L2 error 1e-7",
    },
    CheckInfo {
        name: "subordinator-laplace",
        suite: Suite::Subordination,
        anchor: "int_0^inf e^{-lambda s} mu_y(ds) = e^{-y sqrt(lambda)}",
        oracle: "unit mass and the value e^{-2} at y = 1, lambda = 4",
        tolerance: "1e-8",
    },
    CheckInfo {
        name: "poisson-subordination",
        suite: Suite::Subordination,
        anchor: "P_y f = int_0^inf T_s f mu_y(ds), mu_y(ds) = y e^{-y^2/4s} / (2 sqrt(pi) s^{3/2}) ds",
        oracle: "spectral Poisson semigroup e^{-y sqrt(lambda)} on 20 random chains and the selected chain",
        tolerance: "max-norm 1e-6",
    },
    CheckInfo {
        name: "dy-subordination",
        suite: Suite::Subordination,
        anchor: "du_f/dy = int_0^inf T_s f d/dy mu_y(ds)",
        oracle: "spectral -sqrt(lambda) e^{-y sqrt(lambda)}",
        tolerance: "max-norm 1e-6",
    },
    CheckInfo {
        name: "derivative-bound-constant",
        suite: Suite::Subordination,
        anchor: "c1 = sup_z |1 - z/2| e^{-z/8}",
        oracle: "4 e^{-5/4} = 1.14601 at z = 10",
        tolerance: "1e-9",
    },
    CheckInfo {
        name: "derivative-bound",
        suite: Suite::Subordination,
        anchor: "|y du_f/dy (x, y)| <= c1 u_|f|(x, y/sqrt 2)",
        oracle: "c1 = 4 e^{-5/4}",
        tolerance: "1e-3 above c1",
    },
    CheckInfo {
        name: "heat-gaussian",
        suite: Suite::Continuum,
        anchor: "T_t e^{-|x|^2/2} = (1 + 2t)^{-d/2} e^{-|x|^2 / 2(1 + 2t)}",
        oracle: "closed-form Gaussian",
        tolerance: "max-norm 1e-6",
    },
    CheckInfo {
        name: "riesz-semigroup-agreement",
        suite: Suite::Continuum,
        anchor: "I_alpha f(x) = c(d, alpha) int f(y) |x - y|^{alpha - d} dy",
        oracle: "radial reduction of I_1 e^{-|x|^2/2} in d = 3",
        tolerance: "relative 1e-3 for both the kernel and the semigroup quadratures",
    },
    CheckInfo {
        name: "riesz-gaussian-origin",
        suite: Suite::Continuum,
        anchor: "I_1 e^{-|x|^2/2} (0) in d = 3",
        oracle: "sqrt(2/pi) = 0.797885 (2/pi = 0.63662 is recorded as a metric)",
        tolerance: "1e-3",
    },
    CheckInfo {
        name: "riesz-orders",
        suite: Suite::Continuum,
        anchor: "I_alpha f(x) = c(d, alpha) int f(y) |x - y|^{alpha - d} dy",
        oracle: "semigroup quadrature at the same points",
        tolerance: "relative 1e-3",
    },
    CheckInfo {
        name: "varopoulos-slope",
        suite: Suite::Continuum,
        anchor: "||T_t f||_inf <= c t^{-d/2p} ||f||_p",
        oracle: "log-log slope -d/(2p)",
        tolerance: "5% with R^2 >= 0.99",
    },
    CheckInfo {
        name: "poisson-dimension",
        suite: Suite::Continuum,
        anchor: "||P_y f||_inf <= c y^{-d/p} ||f||_p",
        oracle: "log-log slope -d/p",
        tolerance: "5% with R^2 >= 0.99",
    },
    CheckInfo {
        name: "hls-ratio",
        suite: Suite::Continuum,
        anchor: "|<I_alpha f, h>| <= C ||f||_p ||h||_{q'}, 1/q = 1/p - alpha/d",
        oracle: "the same ratio on a halved grid and on dilated Gaussians",
        tolerance: "2% under refinement, 3% across dilations",
    },
    CheckInfo {
        name: "hls-gfunction",
        suite: Suite::Continuum,
        anchor: "||G_alpha f||_q <= C ||f||_p",
        oracle: "the same ratio on a halved grid and on dilated Gaussians",
        tolerance: "5%",
    },
    CheckInfo {
        name: "g1-l2-identity",
        suite: Suite::Functionals,
        anchor: "||g_1 f||_2 = (1/2) ||f||_2",
        oracle: "half the L2 norm, 50 random zero-mean functions",
        tolerance: "relative 1e-6",
    },
    CheckInfo {
        name: "galpha-l2-identity",
        suite: Suite::Functionals,
        anchor: "||G_alpha f||_2 = (sqrt(Gamma(2 alpha + 2)) / 2^{alpha+1}) ||I_alpha f||_2",
        oracle: "spectral fractional integral",
        tolerance: "relative 1e-6",
    },
    CheckInfo {
        name: "gfunction-lp-ratio",
        suite: Suite::Functionals,
        anchor: "||g_k f||_p <= C_{p,k} ||f||_p",
        oracle: "none: the constant is unspecified, ratios are recorded",
        tolerance: "not applicable (always skipped)",
    },
    CheckInfo {
        name: "stein-maximal",
        suite: Suite::Functionals,
        anchor: "||sup_y |u_f(., y)| ||_p <= p/(p-1) ||f||_p",
        oracle: "p/(p-1)",
        tolerance: "1e-9",
    },
    CheckInfo {
        name: "hedberg-split",
        suite: Suite::Functionals,
        anchor: "min_delta M delta^alpha + F delta^{alpha - d/p}",
        oracle: "golden-section minimum in ln(delta)",
        tolerance: "relative 1e-6",
    },
    CheckInfo {
        name: "pairing-spectral-limit",
        suite: Suite::Functionals,
        anchor: "2 int_S int_0^inf y^{alpha+1} du_f/dy du_h/dy dy dx = 2 Gamma(alpha+2) 2^{-(alpha+2)} sum lambda^{-alpha/2} f^ h^",
        oracle: "closed-form spectral sum",
        tolerance: "1e-8",
    },
    CheckInfo {
        name: "pairing-monotone",
        suite: Suite::Functionals,
        anchor: "s -> 2 int int (y ^ s) y^alpha |du_f/dy|^2 is nondecreasing",
        oracle: "pointwise monotonicity of (y ^ s)",
        tolerance: "1e-12",
    },
    CheckInfo {
        name: "cauchy-schwarz-chain",
        suite: Suite::Functionals,
        anchor: "(1/2) pairing <= <G_alpha f, g_1 h> <= ||G_alpha f||_q ||g_1 h||_{q'}",
        oracle: "each inequality",
        tolerance: "1e-10",
    },
    CheckInfo {
        name: "limit-constant",
        suite: Suite::Functionals,
        anchor: "lim_{s -> inf} <T_alpha^s f, h> / <I_alpha f, h>",
        oracle: "both candidates Gamma(alpha+2)/2^{alpha+2} and Gamma(alpha+2)/2^{alpha+1}; the report names the one the data selects",
        tolerance: "relative 5e-3 to the selected candidate; a non-monotone s-sequence is inconclusive",
    },
    CheckInfo {
        name: "exit-identity",
        suite: Suite::Mc,
        anchor: "E[h(X_tau)] = int_S h(x) dx",
        oracle: "sum_x h_x m_x",
        tolerance: "3 standard errors; inconclusive above 1% censoring",
    },
    CheckInfo {
        name: "occupation-chi-square",
        suite: Suite::Mc,
        anchor: "X_tau has law m / sum(m)",
        oracle: "chi-square quantile at level 0.99",
        tolerance: "p-value above 0.01",
    },
    CheckInfo {
        name: "green-formula",
        suite: Suite::Mc,
        anchor: "E[int_0^tau F(Z_t) dt] = 2 ∫∫ (y∧s) f(x,y) dx dy",
        oracle: "closed form or adaptive quadrature of 2 int_0^inf int_S (y ^ s) F(x, y) dx dy",
        tolerance: "3 standard errors and relative error below 1%; inconclusive when 3 standard errors exceed 1%",
    },
    CheckInfo {
        name: "martingale-transform",
        suite: Suite::Mc,
        anchor: "T_alpha^{s,N} f(x) = E[int_0^tau (Y_t^alpha ^ N) du_f/dy(Z_t) dY_t | X_tau = x]",
        oracle: "pairing quadrature against point masses, divided by m_x",
        tolerance: "3 standard errors in every terminal-state bin; bins under 100 paths are inconclusive",
    },
    CheckInfo {
        name: "ito-isometry",
        suite: Suite::Mc,
        anchor: "E[(int_0^tau A dY)^2] = E[int_0^tau A^2 dt]",
        oracle: "pairing quadrature with weight (y^{2 alpha} ^ N^2)",
        tolerance: "3 standard errors",
    },
    CheckInfo {
        name: "pairing-mc",
        suite: Suite::Mc,
        anchor: "E[h(X_tau) int_0^tau (Y^alpha ^ N) du_f/dy dY] = E[int_0^tau (Y^alpha ^ N) du_f/dy du_h/dy dt]",
        oracle: "pairing quadrature with the same (s, N); the three values must agree pairwise",
        tolerance: "3 standard errors pairwise",
    },
    CheckInfo {
        name: "dt-halving",
        suite: Suite::Mc,
        anchor: "plumbing",
        oracle: "the same paths integrated on the half-step grid",
        tolerance: "1 standard error",
    },
    CheckInfo {
        name: "clock-calibration",
        suite: Suite::Mc,
        anchor: "(kappa A + (1/2) d^2/dy^2) u_f = 0 exactly when kappa = 1/2",
        oracle: "kappa = 1/2 is the only drift-free clock ratio among 1/4, 1/2, 1, 2",
        tolerance: "3 standard errors at every checkpoint",
    },
    CheckInfo {
        name: "limit-constant-mc",
        suite: Suite::Mc,
        anchor: "<T_alpha^{s,N} f, h> / <I_alpha f, h> along s in {1, 2, 5, 10, 20}",
        oracle: "the quadrature ratio at each s (candidates Gamma(alpha+2)/2^{alpha+2} and Gamma(alpha+2)/2^{alpha+1} in the limit)",
        tolerance: "3 standard errors at every s",
    },
];

/// Catalogue entry for a check name: exact, or the longest family prefix
/// (`stein-maximal-p2` belongs to `stein-maximal`).
pub fn lookup(name: &str) -> Option<&'static CheckInfo> {
    CATALOG
        .iter()
        .filter(|c| name == c.name || name.strip_prefix(c.name).is_some_and(|rest| rest.starts_with('-')))
        .max_by_key(|c| c.name.len())
}

fn anchor_of(name: &str) -> &'static str {
    lookup(name).map_or("plumbing", |c| c.anchor)
}

/// Human-readable description, or `None` for unknown names.
pub fn describe(name: &str) -> Option<String> {
    lookup(name).map(|c| {
        format!(
            "{}\n  suite:     {}\n  statement: {}\n  oracle:    {}\n  tolerance: {}\n",
            c.name,
            c.suite.as_str(),
            c.anchor,
            c.oracle,
            c.tolerance
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_prefers_the_longest_family() {
        assert_eq!(lookup("limit-constant-mc-alpha1").unwrap().name, "limit-constant-mc");
        assert_eq!(lookup("limit-constant-alpha0.5").unwrap().name, "limit-constant");
        assert_eq!(lookup("stein-maximal-p2").unwrap().name, "stein-maximal");
        assert!(lookup("stein").is_none());
        assert!(describe("bogus").is_none());
    }

    #[test]
    fn catalog_names_are_unique() {
        let mut names: Vec<_> = CATALOG.iter().map(|c| c.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), CATALOG.len());
    }

    #[test]
    fn config_validation_names_the_field() {
        let bad = RunConfig {
            alpha: vec![],
            ..RunConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("`alpha`"));
        let bad = RunConfig {
            alpha: vec![2.0],
            p: vec![2.0],
            ..RunConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("alpha/p"));
        let bad = RunConfig {
            chain: "missing.json".into(),
            ..RunConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("`chain`"));
        assert!(RunConfig::from_json(r#"{"paths": 10, "bogus": 1}"#).is_err());
        let parsed = RunConfig::from_json(r#"{"paths": 10, "suite": "mc"}"#).unwrap();
        assert_eq!((parsed.paths, parsed.suite), (10, Suite::Mc));
    }
}
