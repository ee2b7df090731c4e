use semigroup_hls::functionals::{pairing_for_chain, PairingParams};
use semigroup_hls::report::Status;
use semigroup_hls::spectral::ChainModel;
use semigroup_hls::stochastic::{
    clock_calibration, clock_calibration_report, dt_halving_report, exit_identity_check, green_formula_check,
    limit_constant_mc, martingale_transform, occupation_check, pairing_mc, path_rng, sample_paths, terminal_states,
    GreenIntegrand, HarmonicDerivative, Integrands, McEstimate, Multiplier, ProcessConfig, StartLaw,
    WeightedDerivative,
};
use rand::Rng;

fn two_state() -> semigroup_hls::spectral::SpectralDecomposition {
    ChainModel::two_state().decompose().unwrap()
}

#[test]
fn runs_are_reproducible_and_thread_independent() {
    let dec = ChainModel::random(4, 11).unwrap().decompose().unwrap();
    let cfg = ProcessConfig::new(1.5, 0.01).with_seed(42);
    let table = HarmonicDerivative::new(&dec, &[1.0, -0.5, 0.3, 0.8]).unwrap();
    let a = WeightedDerivative::new(&table, 1.0, 1e3).unwrap();
    let b = |x: usize, y: f64| a.value(x, y) * y;
    let integrands = Integrands {
        time: Some(&b),
        stochastic: Some(&a),
        support_level: 20.0,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_paths(&dec, &cfg, 500, &integrands).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
    let other = sample_paths(&dec, &cfg.clone().with_seed(43), 500, &integrands).unwrap();
    assert_ne!(one, other);
    assert!(one.to_csv().lines().count() == 501);
    // Streams of one seed are distinct.
    let x: f64 = path_rng(1, 0).random();
    let y: f64 = path_rng(1, 1).random();
    assert_ne!(x, y);
}

#[test]
fn green_formula_indicator_and_power() {
    let dec = two_state();
    let cfg = ProcessConfig::new(1.0, 0.004).with_seed(3);
    let indicator = GreenIntegrand::Indicator { level: 1.0 };
    assert!((indicator.green_integral(1.0).unwrap() - 1.0).abs() < 1e-15);
    let report = green_formula_check(&dec, &cfg, indicator, 100_000).unwrap();
    assert_eq!(report.name, "green-formula");
    assert!((report.oracle - 2.0).abs() < 1e-15);
    assert!(report.passed(), "{report:?}");

    let power = GreenIntegrand::PowerExp { alpha: 1.0 };
    // 2 (int_0^1 y^2 e^{-y} dy + int_1^inf y e^{-y} dy) = 2 (2 - 5/e + 2/e) = 4 - 6/e
    let want = 4.0 - 6.0 / std::f64::consts::E;
    assert!((power.green_integral(1.0).unwrap() - want).abs() < 1e-11);
    let report = green_formula_check(&dec, &cfg, power, 50_000).unwrap();
    assert!(report.passed(), "{report:?}");

    let zero = green_formula_check(&dec, &cfg, GreenIntegrand::Zero, 1000).unwrap();
    assert_eq!((zero.value, zero.oracle), (0.0, 0.0));
    assert!(GreenIntegrand::Indicator { level: -1.0 }.validate().is_err());
}

#[test]
fn exit_law_is_the_normalised_measure() {
    let dec = ChainModel::random(5, 7).unwrap().decompose().unwrap();
    let cfg = ProcessConfig::new(0.8, 0.005).with_seed(9);
    let h = [0.5, -1.0, 2.0, 0.3, 1.1];
    let report = exit_identity_check(&dec, &cfg, &h, 100_000).unwrap();
    assert!(report.passed(), "{report:?}");
    assert!(exit_identity_check(&dec, &cfg, &h[..3], 10).is_err());

    let bundle = terminal_states(&dec, &cfg, 50_000).unwrap();
    let chi = occupation_check(&dec, &bundle).unwrap();
    assert!(chi.passed(), "{chi:?}");
    assert!(chi.metrics["p_value"] > 0.01);

    // A fixed start state does not change the exit law.
    let fixed = terminal_states(&dec, &cfg.clone().with_start(StartLaw::Fixed(4)), 10).unwrap();
    assert!(fixed.paths.iter().all(|p| p.initial_state != 4 || !p.censored));
    let pinned = sample_paths(&dec, &cfg.clone().with_start(StartLaw::Fixed(2)), 50, &Integrands::none(1.0)).unwrap();
    assert!(pinned.paths.iter().all(|p| p.initial_state == 2));
    assert!(sample_paths(&dec, &cfg.clone().with_start(StartLaw::Fixed(5)), 1, &Integrands::none(1.0)).is_err());
}

#[test]
fn pairing_three_ways_on_a_random_chain() {
    let dec = ChainModel::random(3, 5).unwrap().decompose().unwrap();
    let f = [1.0, -0.6, 0.2];
    let h = [0.3, 0.9, -1.0];
    let cfg = ProcessConfig::new(2.0, 0.008).with_seed(21);
    let run = pairing_mc(&dec, &cfg, &f, &h, 1.0, 100_000).unwrap();
    let report = run.report();
    assert!(report.passed(), "{report:?}");
    let halving = dt_halving_report(&[
        ("projection", run.fine_shift_projection, run.projection.standard_error),
        ("time", run.fine_shift_time, run.time_integral.standard_error),
    ]);
    assert!(halving.passed(), "{halving:?}");
}

#[test]
fn martingale_transform_bins_and_ito_isometry() {
    let dec = two_state();
    let f = [1.0, -1.0];
    let cfg = ProcessConfig::new(2.0, 0.008).with_seed(5);
    let mt = martingale_transform(&dec, &cfg, &f, 0.5, 100_000).unwrap();
    // The transform of an eigenfunction is a multiple of it.
    assert!((mt.oracle[0] + mt.oracle[1]).abs() < 1e-12);
    assert!(mt.oracle[0] > 0.0);
    let report = mt.report();
    assert!(report.passed(), "{report:?}");
    let ito = mt.ito_report(&dec, &f, &cfg).unwrap();
    assert!(ito.passed(), "{ito:?}");
    let want = pairing_for_chain(&dec, &f, &f, &PairingParams::new(1.0, 2.0, 1e6)).unwrap();
    assert!((ito.oracle - want).abs() < 1e-12);

    let zero = martingale_transform(&dec, &cfg, &[0.0, 0.0], 1.0, 100).unwrap();
    assert!(zero.bins.iter().all(|b| b.mean == 0.0));
    assert_eq!(zero.report().status, Status::Pass);
    let constant = martingale_transform(&dec, &cfg, &[1.0, 1.0], 1.0, 100).unwrap();
    assert!(constant.oracle.iter().all(|v| *v == 0.0));
}

#[test]
fn sparse_bins_are_flagged() {
    let dec = ChainModel::random(6, 1).unwrap().decompose().unwrap();
    let cfg = ProcessConfig::new(1.0, 0.02).with_seed(2);
    let mt = martingale_transform(&dec, &cfg, &[1.0, 0.0, -1.0, 0.5, 0.0, 0.2], 1.0, 300).unwrap();
    assert!(!mt.low_confidence.is_empty());
    assert_eq!(mt.report().status, Status::Inconclusive);
}

#[test]
fn only_the_half_clock_is_drift_free() {
    let dec = two_state();
    let drifts = clock_calibration(&dec, &[1.0, -1.0], 0.5, 0.002, &[0.1, 0.25, 0.5], 20_000, 17).unwrap();
    let report = clock_calibration_report(&drifts);
    assert!(report.passed(), "{report:?}");
    assert!((report.value - 0.5).abs() < 1e-15);
    let slow = &drifts[0];
    assert!(slow.kappa == 0.25 && slow.matches_prediction());

    let flat = clock_calibration(&dec, &[2.0, 2.0], 0.5, 0.01, &[0.1], 200, 1).unwrap();
    assert_eq!(clock_calibration_report(&flat).status, Status::Inconclusive);
    assert!(clock_calibration(&dec, &[1.0, -1.0], 0.5, 0.01, &[0.2, 0.1], 10, 1).is_err());
}

#[test]
fn monte_carlo_ratios_follow_the_quadrature_in_s() {
    let dec = two_state();
    let f = [1.0, -1.0];
    let cfg = ProcessConfig::new(1.0, 0.01).with_seed(8);
    let report = limit_constant_mc(&dec, &cfg, &f, &f, 1.0, &[1.0, 3.0], 20_000).unwrap();
    assert!(report.name.starts_with("limit-constant-mc"));
    assert!(report.passed(), "{report:?}");
    // At s = 1 the ratio is pairing(s = 1) / <I_1 f, f>.
    let want = pairing_for_chain(&dec, &f, &f, &PairingParams::new(1.0, 1.0, 1e3)).unwrap() / 2f64.sqrt();
    assert!((report.metrics["ratio_quadrature_s1"] - want).abs() < 1e-12);
}

#[test]
fn monte_carlo_estimate_edge_cases() {
    let one = McEstimate::from_samples([3.0]);
    assert_eq!(one.mean, 3.0);
    assert!(one.standard_error.is_infinite());
    let none = McEstimate::from_samples(std::iter::empty());
    assert_eq!(none.count, 0);
    let dec = two_state();
    assert!(sample_paths(&dec, &ProcessConfig::new(-1.0, 0.01), 1, &Integrands::none(1.0)).is_err());
    assert!(sample_paths(&dec, &ProcessConfig::new(1.0, 0.0), 1, &Integrands::none(1.0)).is_err());
}

#[test]
fn censoring_marks_long_paths() {
    let dec = two_state();
    let mut cfg = ProcessConfig::new(1.0, 0.001);
    cfg.max_steps = 3;
    let bundle = sample_paths(&dec, &cfg, 200, &Integrands::none(10.0)).unwrap();
    assert!(bundle.censored() > 0);
    let report = exit_identity_check(&dec, &cfg, &[1.0, 1.0], 200).unwrap();
    assert_eq!(report.status, Status::Inconclusive);
}
