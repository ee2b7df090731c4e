//! Acceptance criteria AC1-AC12, one printed line each. Oracles are computed
//! here, independently of the library code paths they check.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use semigroup_hls::continuum::{
    fractional_integral_at_points, hls_gfunction_check, hls_ratio_check, poisson_dimension_check, riesz_apply,
    varopoulos_slope, GridSpec, TimeQuadrature,
};
use semigroup_hls::functionals::{frac_g_function, g_function, limit_constant, stein_check, HalfSpaceField};
use semigroup_hls::spectral::{ChainModel, SpectralDecomposition};
use semigroup_hls::stochastic::{
    clock_calibration, clock_calibration_report, exit_identity_check, green_formula_check, pairing_mc,
    GreenIntegrand, ProcessConfig,
};
use semigroup_hls::subordination::{derivative_bound_check, poisson_via_subordination, SubordinationOptions};
use semigroup_hls::suites::{run_suite, RunConfig, Suite};

/// Written straight to stdout so the lines survive test output capture.
fn line(tag: &str, ok: bool, detail: String) -> bool {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{tag:<5} {verdict}  {detail}").unwrap();
    out.flush().unwrap();
    ok
}

/// Dense oracle: `-L` symmetrised by the weights, diagonalised by nalgebra.
struct Dense {
    sqrt_m: DVector<f64>,
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl Dense {
    fn new(model: &ChainModel) -> Self {
        let n = model.n();
        let sqrt_m = DVector::from_iterator(n, model.weights().iter().map(|m| m.sqrt()));
        let a = DMatrix::from_fn(n, n, |i, j| -model.generator()[i * n + j] * sqrt_m[i] / sqrt_m[j]);
        let sym = (&a + a.transpose()) * 0.5;
        Self {
            sqrt_m,
            eig: SymmetricEigen::new(sym),
        }
    }

    fn apply(&self, f: &[f64], multiplier: impl Fn(f64) -> f64) -> Vec<f64> {
        let g = DVector::from_iterator(f.len(), f.iter().zip(self.sqrt_m.iter()).map(|(a, b)| a * b));
        let coef = self.eig.eigenvectors.transpose() * g;
        let scaled = DVector::from_iterator(
            coef.len(),
            coef.iter().zip(self.eig.eigenvalues.iter()).map(|(c, l)| c * multiplier(l.max(0.0))),
        );
        let back = &self.eig.eigenvectors * scaled;
        back.iter().zip(self.sqrt_m.iter()).map(|(a, b)| a / b).collect()
    }

    fn fractional(&self, alpha: f64, f: &[f64]) -> Vec<f64> {
        self.apply(f, |l| if l > 1e-10 { l.powf(-alpha / 2.0) } else { 0.0 })
    }
}

fn random_chains(count: usize, seed: u64) -> Vec<(ChainModel, SpectralDecomposition)> {
    (0..count)
        .map(|i| {
            let model = ChainModel::random(2 + i % 15, seed + i as u64).unwrap();
            let dec = model.decompose().unwrap();
            (model, dec)
        })
        .collect()
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn weighted_norm2(m: &[f64], f: &[f64]) -> f64 {
    f.iter().zip(m).map(|(v, w)| v * v * w).sum::<f64>().sqrt()
}

fn ac1() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for (model, dec) in random_chains(20, 1000) {
        let dense = Dense::new(&model);
        let f = random_vector(model.n(), &mut rng);
        let opts = SubordinationOptions::for_chain(&dec, &f, 1e-10).unwrap();
        for y in [0.01, 0.3, 1.0, 4.0, 15.0] {
            let sub = poisson_via_subordination(|s| dec.apply_semigroup(s, &f), y, &opts).unwrap().values;
            let want = dense.apply(&f, |l| (-y * l.sqrt()).exp());
            worst = sub.iter().zip(&want).fold(worst, |w, (a, b)| w.max((a - b).abs()));
        }
    }
    line("AC1", worst < 1e-6, format!("subordinated vs dense Poisson, 20 chains, max error {worst:.2e} (< 1e-6)"))
}

fn ac2() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for (model, dec) in random_chains(10, 2000) {
        let dense = Dense::new(&model);
        let f = dec.project_out_null(&random_vector(model.n(), &mut rng)).unwrap();
        for alpha in [0.5, 1.0, 1.5] {
            let (quad, _) = dec.fractional_integral_quadrature(alpha, &f, 1e-12).unwrap();
            let want = dense.fractional(alpha, &f);
            let diff: Vec<f64> = quad.iter().zip(&want).map(|(a, b)| a - b).collect();
            worst = worst.max(weighted_norm2(model.weights(), &diff) / weighted_norm2(model.weights(), &want));
        }
    }
    line("AC2", worst < 1e-7, format!("time quadrature of I_alpha, alpha in {{0.5, 1, 1.5}}, max relative error {worst:.2e} (< 1e-7)"))
}

fn ac3() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let (mut worst_g1, mut worst_ga) = (0.0f64, 0.0f64);
    for (model, dec) in random_chains(50, 3000) {
        let dense = Dense::new(&model);
        let f = dec.project_out_null(&random_vector(model.n(), &mut rng)).unwrap();
        let m = model.weights();
        let hs = HalfSpaceField::with_default_rule(&dec, &f, 1, &[]).unwrap();
        let g1 = weighted_norm2(m, &g_function(&hs, 1).unwrap());
        worst_g1 = worst_g1.max((g1 / (0.5 * weighted_norm2(m, &f)) - 1.0).abs());
        for alpha in [0.5, 1.0, 1.5] {
            let lhs = weighted_norm2(m, &frac_g_function(&hs, alpha).unwrap());
            let rhs = gamma(2.0 * alpha + 2.0).sqrt() / 2f64.powf(alpha + 1.0)
                * weighted_norm2(m, &dense.fractional(alpha, &f));
            worst_ga = worst_ga.max((lhs / rhs - 1.0).abs());
        }
    }
    let worst = worst_g1.max(worst_ga);
    line(
        "AC3",
        worst < 1e-6,
        format!("L2 identities over 50 functions: g_1 {worst_g1:.2e}, G_alpha {worst_ga:.2e} (< 1e-6)"),
    )
}

fn ac4() -> bool {
    // sup_z |1 - z/2| e^{-z/8} by a fine scan.
    let c1 = (0..=2_000_000).map(|k| k as f64 * 1e-5).fold(0.0f64, |m, z| m.max((1.0 - z / 2.0).abs() * (-z / 8.0).exp()));
    let ys: Vec<f64> = (0..80).map(|k| 10f64.powf(-3.0 + 5.0 * k as f64 / 79.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst = 0.0f64;
    for (model, dec) in random_chains(20, 4000) {
        let f: Vec<f64> = random_vector(model.n(), &mut rng).iter().map(|v| v.abs()).collect();
        worst = worst.max(derivative_bound_check(&dec, &f, &ys, 1e-3).unwrap().value);
    }
    line(
        "AC4",
        worst <= c1 + 1e-3,
        format!("largest derivative ratio {worst:.6} vs c1 = {c1:.6} (+1e-3)"),
    )
}

fn ac5() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut excess = f64::NEG_INFINITY;
    let chains = random_chains(20, 5000);
    for p in [1.5, 2.0, 3.0] {
        for (model, dec) in &chains {
            let f = random_vector(model.n(), &mut rng);
            let hs = HalfSpaceField::with_default_rule(dec, &f, 0, &[]).unwrap();
            excess = excess.max(stein_check(&hs, p).unwrap().value - p / (p - 1.0));
        }
    }
    line("AC5", excess <= 1e-9, format!("maximal ratio minus p/(p-1), worst {excess:.3e} (<= 1e-9)"))
}

/// `I_1 e^{-|x|^2/2}` at radius `r` in three dimensions:
/// `pi^{-1/2} int_0^inf t^{-1/2} (1+2t)^{-3/2} e^{-r^2/(2(1+2t))} dt`, with
/// `t = e^u` and the trapezoid rule on the line.
fn riesz_gaussian_oracle(r: f64) -> f64 {
    let h = 1e-3;
    let sum: f64 = (-60_000..=60_000)
        .map(|k| {
            let t = (k as f64 * h).exp();
            t.sqrt() * (1.0 + 2.0 * t).powf(-1.5) * (-r * r / (2.0 * (1.0 + 2.0 * t))).exp()
        })
        .sum();
    sum * h / PI.sqrt()
}

fn ac6() -> (bool, bool) {
    let spec = GridSpec::default();
    let f = spec.gaussian(1.0).unwrap();
    let points: Vec<Vec<f64>> = vec![
        vec![0.0, 0.0, 0.0],
        vec![0.5, 0.0, 0.0],
        vec![0.3, -0.4, 0.6],
        vec![1.2, 0.7, -0.3],
        vec![-2.0, 1.0, 0.5],
        vec![0.1, 2.5, -1.7],
    ];
    let semigroup = fractional_integral_at_points(&f, 1.0, &points, TimeQuadrature::POINTS).unwrap();
    let kernel = riesz_apply(&f, 1.0, &points).unwrap();
    let mut worst = 0.0f64;
    for ((x, s), k) in points.iter().zip(&semigroup).zip(&kernel) {
        let want = riesz_gaussian_oracle(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        worst = worst.max((s / want - 1.0).abs()).max((k / want - 1.0).abs());
    }
    let origin = semigroup[0];
    let exact = riesz_gaussian_oracle(0.0);
    let ok = worst < 1e-3 && (origin - exact).abs() < 1e-3 && (exact - (2.0 / PI).sqrt()).abs() < 1e-9;
    line(
        "AC6",
        ok,
        format!(
            "semigroup and kernel I_1 at {} points, max relative error {worst:.2e} (< 1e-3); I_1(0) = {origin:.6}, sqrt(2/pi) = {:.6}",
            points.len(),
            (2.0 / PI).sqrt()
        ),
    );
    // The criterion as written compares with 2/pi; the integral equals sqrt(2/pi).
    let literal = (origin - 2.0 / PI).abs() < 1e-3;
    line("AC6*", literal, format!("I_1(0) = {origin:.6} against the literal target 2/pi = {:.6} (+-1e-3)", 2.0 / PI));
    (ok, literal)
}

fn ac7() -> bool {
    let f = GridSpec::default().gaussian(1.0).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [1.0, 2.0] {
        for (report, want) in [
            (varopoulos_slope(&f, p, (0.04, 0.64), 7).unwrap(), -3.0 / (2.0 * p)),
            (poisson_dimension_check(&f, p, (0.2, 0.8), 5).unwrap(), -3.0 / p),
        ] {
            let r2 = report.metrics["r_squared"];
            ok &= (report.value / want - 1.0).abs() <= 0.05 && r2 >= 0.99;
            parts.push(format!("{} {:.4}/{:.4} R2 {:.5}", report.name, report.value, want, r2));
        }
    }
    line("AC7", ok, parts.join("; "))
}

fn ac8() -> bool {
    let dec = ChainModel::two_state().decompose().unwrap();
    let cfg = ProcessConfig::new(1.0, 0.004).with_seed(2024);
    let indicator = GreenIntegrand::Indicator { level: 1.0 };
    let small = green_formula_check(&dec, &cfg, indicator, 100_000).unwrap();
    let small_ok = (small.value - 2.0).abs() <= 3.0 * small.standard_error.unwrap();
    // |S| * 2 (int_0^1 y^2 e^{-y} dy + int_1^inf y e^{-y} dy) = 2 (4 - 6/e)
    let power = green_formula_check(&dec, &cfg, GreenIntegrand::PowerExp { alpha: 1.0 }, 100_000).unwrap();
    let power_want = 2.0 * (4.0 - 6.0 / std::f64::consts::E);
    let power_ok = (power.value - power_want).abs() <= 3.0 * power.standard_error.unwrap();
    let h = [1.0, 0.0];
    let exit = exit_identity_check(&dec, &cfg, &h, 100_000).unwrap();
    let exit_ok = (exit.value - 1.0).abs() <= 3.0 * exit.standard_error.unwrap();
    let big = green_formula_check(&dec, &cfg.clone().with_seed(7), indicator, 1_000_000).unwrap();
    let rel = (big.value / 2.0 - 1.0).abs();
    line(
        "AC8",
        small_ok && power_ok && exit_ok && rel < 0.01,
        format!(
            "1e5 paths: indicator {:.4}+-{:.4} (2), power {:.4}+-{:.4} ({power_want:.4}), exit {:.4}+-{:.4} (1); 1e6 paths: {:.5}, relative error {rel:.2e} (< 1%)",
            small.value,
            small.standard_error.unwrap(),
            power.value,
            power.standard_error.unwrap(),
            exit.value,
            exit.standard_error.unwrap(),
            big.value
        ),
    )
}

/// `2 lambda |f|^2 int_0^inf (y ^ s) y^alpha e^{-2 sqrt(lambda) y} dy` for an
/// eigenfunction, divided by `<I_alpha f, f> = lambda^{-alpha/2} |f|^2`.
fn eigen_ratio(lambda: f64, alpha: f64, s: f64) -> f64 {
    let c = 2.0 * lambda.sqrt();
    let head = if s.is_infinite() {
        gamma(alpha + 2.0) / c.powf(alpha + 2.0)
    } else {
        gamma(alpha + 2.0) * gamma_lr(alpha + 2.0, c * s) / c.powf(alpha + 2.0)
            + s * gamma(alpha + 1.0) * gamma_ur(alpha + 1.0, c * s) / c.powf(alpha + 1.0)
    };
    2.0 * lambda * head * lambda.powf(alpha / 2.0)
}

fn ac9() -> bool {
    let dec = ChainModel::two_state().decompose().unwrap();
    let f = [1.0, -1.0];
    // lambda = 2, |f|^2 = 2, <I_1 f, f> = sqrt 2.
    let oracle = eigen_ratio(2.0, 1.0, 5.0) * 2f64.sqrt();
    let cfg = ProcessConfig::new(5.0, 0.008).with_seed(99).with_kappa(0.5).with_truncation(1e3);
    let run = pairing_mc(&dec, &cfg, &f, &f, 1.0, 1_000_000).unwrap();
    let (a, b) = (run.projection, run.time_integral);
    let z_ac = (a.mean - oracle).abs() / a.standard_error;
    let z_bc = (b.mean - oracle).abs() / b.standard_error;
    let z_ab = run.difference.mean.abs() / run.difference.standard_error;
    let quad_ok = (run.quadrature - oracle).abs() < 1e-8;
    let drifts = clock_calibration(&dec, &f, 0.5, 0.002, &[0.1, 0.25, 0.5], 20_000, 17).unwrap();
    let clock = clock_calibration_report(&drifts);
    let clock_ok = clock.passed() && clock.value == 0.5;
    line(
        "AC9",
        z_ac <= 3.0 && z_bc <= 3.0 && z_ab <= 3.0 && quad_ok && clock_ok,
        format!(
            "a = {:.5}+-{:.5}, b = {:.5}+-{:.5}, c = {oracle:.5}; z(a,c) {z_ac:.2}, z(b,c) {z_bc:.2}, z(a,b) {z_ab:.2}; clock selects kappa = {}",
            a.mean, a.standard_error, b.mean, b.standard_error, clock.value
        ),
    )
}

fn ac10() -> bool {
    let dec = ChainModel::two_state().decompose().unwrap();
    let f = [1.0, -1.0];
    let s_values = [1.0, 2.0, 5.0, 10.0, 20.0];
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 1.0] {
        let lc = limit_constant(&dec, &f, &f, alpha, &s_values).unwrap();
        let want: Vec<f64> = s_values.iter().map(|&s| eigen_ratio(2.0, alpha, s)).collect();
        let track = lc.ratios.iter().zip(&want).all(|(a, b)| (a / b - 1.0).abs() < 1e-8);
        let monotone = lc.ratios.windows(2).all(|w| w[1] >= w[0]) && lc.limit_ratio >= lc.ratios[4];
        let full = gamma(alpha + 2.0) / 2f64.powf(alpha + 1.0);
        let rel = (lc.limit_ratio / full - 1.0).abs();
        ok &= track && monotone && rel < 5e-3 && lc.selected_exponent_offset == 1;
        parts.push(format!(
            "alpha {alpha}: limit {:.6} = Gamma(alpha+2)/2^(alpha+1) = {full:.6} (rel {rel:.1e}), monotone {monotone}",
            lc.limit_ratio
        ));
    }
    line("AC10", ok, parts.join("; "))
}

fn ac11() -> bool {
    let spec = GridSpec::default();
    let mut reports = hls_ratio_check(&spec, 1.0, 2.0).unwrap();
    reports.extend(hls_gfunction_check(&spec, 1.0, 2.0).unwrap());
    let worst = reports.iter().fold(0.0f64, |m, r| m.max(r.value));
    let detail = reports.iter().map(|r| format!("{} {:.2e}", r.name, r.value)).collect::<Vec<_>>().join(", ");
    line("AC11", worst < 0.05, format!("{detail} (< 5%)"))
}

fn ac12() -> bool {
    let cfg = RunConfig {
        suite: Suite::Mc,
        paths: 20_000,
        ..RunConfig::default()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let reports = pool.install(|| run_suite(&cfg).unwrap());
        serde_json::to_vec_pretty(&reports).unwrap()
    };
    let sequential = run(1);
    let parallel = run(4);
    line(
        "AC12",
        sequential == parallel,
        format!("mc suite report, 1 thread vs 4 threads: {} bytes, identical {}", sequential.len(), sequential == parallel),
    )
}

#[test]
fn acceptance_criteria() {
    writeln!(std::io::stdout()).unwrap();
    let mut failed = Vec::new();
    let mut record = |tag: &str, ok: bool| {
        if !ok {
            failed.push(tag.to_string());
        }
    };
    record("AC1", ac1());
    record("AC2", ac2());
    record("AC3", ac3());
    record("AC4", ac4());
    record("AC5", ac5());
    let (ac6_ok, _literal) = ac6();
    record("AC6", ac6_ok);
    record("AC7", ac7());
    record("AC8", ac8());
    record("AC9", ac9());
    record("AC10", ac10());
    record("AC11", ac11());
    record("AC12", ac12());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
