//! Python bindings for the chain model, its spectral calculus and the suite runner.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ::semigroup_hls::error::Error;
use ::semigroup_hls::functionals::{pairing_for_chain, pairing_spectral_limit, PairingParams};
use ::semigroup_hls::spectral::{ChainModel, SpectralDecomposition};
use ::semigroup_hls::stochastic::{green_formula_check, GreenIntegrand, ProcessConfig};
use ::semigroup_hls::{subordination, suites};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Reversible continuous-time Markov chain: generator `L` (row-major) and weights `m`.
#[pyclass(name = "Chain", module = "semigroup_hls", frozen)]
struct PyChain {
    model: ChainModel,
    dec: SpectralDecomposition,
}

impl PyChain {
    fn wrap(model: ChainModel) -> PyResult<Self> {
        let dec = model.decompose().map_err(py_err)?;
        Ok(Self { model, dec })
    }
}

#[pymethods]
impl PyChain {
    #[new]
    fn new(generator: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        Self::wrap(ChainModel::new(weights.len(), generator, weights).map_err(py_err)?)
    }

    /// `two-state`, `three-cycle`, `path-<n>` or `random-<n>[-<seed>]`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Self::wrap(ChainModel::builtin(name).map_err(py_err)?)
    }

    #[staticmethod]
    fn random(n: usize, seed: u64) -> PyResult<Self> {
        Self::wrap(ChainModel::random(n, seed).map_err(py_err)?)
    }

    #[getter]
    fn n(&self) -> usize {
        self.model.n()
    }

    #[getter]
    fn generator(&self) -> Vec<f64> {
        self.model.generator().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.model.weights().to_vec()
    }

    /// Eigenvalues of `-L`, ascending.
    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.dec.lambdas().to_vec()
    }

    #[getter]
    fn eigenvectors(&self) -> Vec<Vec<f64>> {
        self.dec.vectors().to_vec()
    }

    fn heat(&self, t: f64, f: Vec<f64>) -> PyResult<Vec<f64>> {
        self.dec.apply_semigroup(t, &f).map_err(py_err)
    }

    fn poisson(&self, y: f64, f: Vec<f64>) -> PyResult<Vec<f64>> {
        self.dec.apply_poisson(y, &f).map_err(py_err)
    }

    /// `k`-th derivative in `y` of the Poisson extension.
    #[pyo3(signature = (y, f, k = 1))]
    fn dy_harmonic(&self, y: f64, f: Vec<f64>, k: u32) -> PyResult<Vec<f64>> {
        self.dec.dy_harmonic(y, &f, k).map_err(py_err)
    }

    fn fractional_integral(&self, alpha: f64, f: Vec<f64>) -> PyResult<Vec<f64>> {
        self.dec.fractional_integral(alpha, &f).map_err(py_err)
    }

    fn project_out_null(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        self.dec.project_out_null(&f).map_err(py_err)
    }

    fn inner(&self, f: Vec<f64>, g: Vec<f64>) -> f64 {
        self.dec.inner(&f, &g)
    }

    fn norm(&self, f: Vec<f64>, p: f64) -> f64 {
        self.dec.norm(&f, p)
    }

    /// Truncated pairing at height `s` and cap `truncation` (both may be `inf`).
    #[pyo3(signature = (f, h, alpha, s = f64::INFINITY, truncation = f64::INFINITY))]
    fn pairing(&self, f: Vec<f64>, h: Vec<f64>, alpha: f64, s: f64, truncation: f64) -> PyResult<f64> {
        pairing_for_chain(&self.dec, &f, &h, &PairingParams::new(alpha, s, truncation)).map_err(py_err)
    }

    fn pairing_limit(&self, f: Vec<f64>, h: Vec<f64>, alpha: f64) -> PyResult<f64> {
        pairing_spectral_limit(&self.dec, &f, &h, alpha).map_err(py_err)
    }

    /// Monte Carlo estimate of the expected occupation of `{y <= level}`;
    /// returns `(estimate, standard_error, oracle)`.
    #[pyo3(signature = (level, s, paths, dt = 0.004, seed = 7))]
    fn green_indicator(&self, level: f64, s: f64, paths: usize, dt: f64, seed: u64) -> PyResult<(f64, f64, f64)> {
        let cfg = ProcessConfig::new(s, dt).with_seed(seed);
        let report = green_formula_check(&self.dec, &cfg, GreenIntegrand::Indicator { level }, paths).map_err(py_err)?;
        Ok((report.value, report.standard_error.unwrap_or(f64::NAN), report.oracle))
    }

    fn __repr__(&self) -> String {
        format!("Chain(n={})", self.model.n())
    }
}

/// Density of the half-stable subordinator at time `t`, point `s`.
#[pyfunction]
fn subordinator_density(t: f64, s: f64) -> PyResult<f64> {
    subordination::density(t, s).map_err(py_err)
}

/// Runs a suite from a JSON configuration; returns the reports as JSON.
#[pyfunction]
#[pyo3(signature = (config_json = "{}"))]
fn run_suite(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = suites::RunConfig::from_json(config_json).map_err(py_err)?;
    let reports = py.detach(|| suites::run_suite(&cfg)).map_err(py_err)?;
    serde_json::to_string(&reports).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn describe(name: &str) -> Option<String> {
    suites::describe(name)
}

#[pymodule(name = "semigroup_hls")]
fn semigroup_hls_module(module: &Bound<'_, PyModule>) -> PyResult<()> {
    module.add_class::<PyChain>()?;
    module.add_function(wrap_pyfunction!(subordinator_density, module)?)?;
    module.add_function(wrap_pyfunction!(run_suite, module)?)?;
    module.add_function(wrap_pyfunction!(describe, module)?)?;
    Ok(())
}
