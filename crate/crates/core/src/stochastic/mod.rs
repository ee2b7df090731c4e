//! Monte Carlo simulation of the killed space-time process `Z_t = (X_t, Y_t)`:
//! `X` is the chain run with generator `kappa L`, `Y` is a standard Brownian
//! motion started at `s` and killed when it reaches 0.
//!
//! `X` is simulated exactly in continuous time. `Y` is sampled on an adaptive
//! grid and, by Brownian-bridge splitting, at every jump time of `X`; the exact
//! bridge probability decides whether it hit 0 in between. Time integrals use
//! the trapezoid rule. A stochastic integral `int A dY` is evaluated pathwise
//! through Ito's formula for `W(x, y) = -int_y^inf A(x, eta) d eta`:
//!
//! `int_0^tau A dY = W(Z_tau) - W(Z_0) - (1/2) int_0^tau dA/dy dt - sum_jumps [W(X_t, Y_t) - W(X_t-, Y_t)]`,
//!
//! so its only discretization is the trapezoid rule on the `dt` term. Every
//! time integral is accumulated on the coarse grid and on its halves, both
//! driven by the same path.

mod checks;

pub use checks::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, InverseGaussian, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::spectral::{positive, SpectralDecomposition};

/// Where paths start in the chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartLaw {
    /// `X_0` drawn from `m / sum(m)`.
    Stationary,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessConfig {
    /// Start height of `Y`.
    pub s: f64,
    /// Coarse Euler step at heights below `1/sqrt(lambda_max)`.
    pub dt: f64,
    /// Speed of `X` relative to the Brownian clock.
    pub kappa: f64,
    /// `N` in `(Y^alpha ^ N)`.
    pub truncation: f64,
    pub seed: u64,
    /// Paths still alive after this many steps are censored.
    pub max_steps: u64,
    pub start: StartLaw,
}

impl ProcessConfig {
    pub fn new(s: f64, dt: f64) -> Self {
        Self {
            s,
            dt,
            kappa: 0.5,
            truncation: 1e3,
            seed: 0,
            max_steps: 5_000_000,
            start: StartLaw::Stationary,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_truncation(mut self, truncation: f64) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn with_start(mut self, start: StartLaw) -> Self {
        self.start = start;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        positive("s", self.s)?;
        positive("dt", self.dt)?;
        positive("kappa", self.kappa)?;
        positive("truncation", self.truncation)?;
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be positive".into()));
        }
        if let StartLaw::Fixed(x) = self.start {
            if x >= n {
                return Err(Error::InvalidInput(format!("start state {x} is outside 0..{n}")));
            }
        }
        Ok(())
    }
}

/// Stochastic multiplier `A(x, y)` together with what the pathwise
/// evaluation of `int A dY` needs.
pub trait Multiplier: Sync {
    fn value(&self, x: usize, y: f64) -> f64;
    /// `W(x, y) = -int_y^inf A(x, eta) d eta`.
    fn primitive(&self, x: usize, y: f64) -> f64;
    /// `dA/dy`.
    fn dy(&self, x: usize, y: f64) -> f64;
}

/// Integrands as functions of `(state, y)`. Both must vanish (or be
/// negligible) above `support_level`, where excursions of `Y` are skipped in
/// one exact jump.
pub struct Integrands<'a> {
    pub time: Option<&'a (dyn Fn(usize, f64) -> f64 + Sync)>,
    pub stochastic: Option<&'a dyn Multiplier>,
    pub support_level: f64,
}

impl Integrands<'_> {
    /// No integrands; excursions above `level` are skipped.
    pub fn none(level: f64) -> Integrands<'static> {
        Integrands {
            time: None,
            stochastic: None,
            support_level: level,
        }
    }
}

/// One simulated path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub initial_state: usize,
    pub terminal_state: usize,
    pub tau: f64,
    pub censored: bool,
    pub steps: u64,
    /// `int A dY` with its `dt` term on the coarse grid.
    pub stochastic: f64,
    /// Trapezoid sum `sum (B(Z_k) + B(Z_{k+1})) dt_k / 2` on the coarse grid.
    pub time: f64,
    /// The same integrals on the half-step grid.
    pub stochastic_fine: f64,
    pub time_fine: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub paths: Vec<PathRecord>,
    /// `sum(m)`, the factor turning averages over the start law into
    /// integrals against `dx`.
    pub total_mass: f64,
}

impl PathBundle {
    pub fn censored(&self) -> usize {
        self.paths.iter().filter(|p| p.censored).count()
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored() as f64 / self.paths.len().max(1) as f64
    }

    /// Estimate of `E[g(path)]` over uncensored paths.
    pub fn estimate(&self, g: impl Fn(&PathRecord) -> f64) -> McEstimate {
        McEstimate::from_samples(self.paths.iter().filter(|p| !p.censored).map(g))
    }

    /// Diagnostic CSV: one row per path.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,initial_state,terminal_state,tau,censored,steps,stochastic,time\n");
        for (i, p) in self.paths.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{},{},{},{},{},{}\n",
                p.initial_state,
                p.terminal_state,
                p.tau,
                u8::from(p.censored),
                p.steps,
                p.stochastic,
                p.time
            ));
        }
        out
    }
}

/// Mean with standard error `sample std / sqrt(count)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub count: usize,
}

impl McEstimate {
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Self {
        // Welford keeps the sum stable for 10^6 samples.
        let (mut count, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
        for x in samples {
            count += 1;
            let delta = x - mean;
            mean += delta / count as f64;
            m2 += delta * (x - mean);
        }
        let standard_error = if count > 1 {
            (m2 / (count - 1) as f64 / count as f64).sqrt()
        } else {
            f64::INFINITY
        };
        Self {
            mean: if count > 0 { mean } else { 0.0 },
            standard_error,
            count,
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            mean: self.mean * c,
            standard_error: self.standard_error * c.abs(),
            count: self.count,
        }
    }
}

/// The per-path random stream: one ChaCha8 stream per path index.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Exact continuous-time simulation of `X` under `kappa L`.
pub(crate) struct ChainSampler<'a> {
    dec: &'a SpectralDecomposition,
    kappa: f64,
    /// Exit rates `-kappa L_ii`.
    exit: Vec<f64>,
    /// Cumulative jump probabilities per row.
    jumps: Vec<Vec<(usize, f64)>>,
}

impl<'a> ChainSampler<'a> {
    pub(crate) fn new(dec: &'a SpectralDecomposition, kappa: f64) -> Self {
        let l = dec.reconstruct_negative_generator();
        let n = dec.n();
        let scale = (0..n).fold(0.0f64, |a, i| a.max(l[i * n + i].abs()));
        let mut exit = Vec::with_capacity(n);
        let mut jumps = Vec::with_capacity(n);
        for i in 0..n {
            // reconstruct gives -L; off-diagonal rates are its negated entries.
            let rates: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, (-l[i * n + j]).max(0.0)))
                .filter(|(_, r)| *r > 1e-12 * scale)
                .collect();
            let total: f64 = rates.iter().map(|(_, r)| r).sum();
            let mut acc = 0.0;
            let cumulative = rates
                .iter()
                .map(|(j, r)| {
                    acc += r / total;
                    (*j, acc)
                })
                .collect();
            exit.push(kappa * total);
            jumps.push(cumulative);
        }
        Self { dec, kappa, exit, jumps }
    }

    pub(crate) fn holding(&self, x: usize, rng: &mut ChaCha8Rng) -> f64 {
        if self.exit[x] > 0.0 {
            let e: f64 = rng.sample(Exp1);
            e / self.exit[x]
        } else {
            f64::INFINITY
        }
    }

    pub(crate) fn jump(&self, x: usize, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let row = &self.jumps[x];
        row.iter().find(|(_, c)| u < *c).map_or(row[row.len() - 1].0, |(j, _)| *j)
    }

    /// Draws `X_{t+T}` given `X_t = x` from the transition kernel
    /// `m_j sum_k e^{-kappa lambda_k T} phi_k(x) phi_k(j)`.
    pub(crate) fn transition(&self, x: usize, duration: f64, rng: &mut ChaCha8Rng) -> usize {
        let m = self.dec.weights();
        let n = m.len();
        let mut probs = vec![0.0; n];
        for (lambda, phi) in self.dec.lambdas().iter().zip(self.dec.vectors()) {
            let decay = (-self.kappa * lambda * duration).exp();
            if decay == 0.0 {
                continue;
            }
            for j in 0..n {
                probs[j] += decay * phi[x] * phi[j];
            }
        }
        let mut total = 0.0;
        for j in 0..n {
            probs[j] = (probs[j] * m[j]).max(0.0);
            total += probs[j];
        }
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (j, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        n - 1
    }

    pub(crate) fn stationary_draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let m = self.dec.weights();
        let u: f64 = rng.random::<f64>() * self.dec.total_mass();
        let mut acc = 0.0;
        for (j, w) in m.iter().enumerate() {
            acc += w;
            if u < acc {
                return j;
            }
        }
        m.len() - 1
    }
}

/// `X` with its pending jump time.
pub(crate) struct ChainState {
    pub x: usize,
    pub next_jump: f64,
}

impl ChainState {
    pub(crate) fn advance(&mut self, sampler: &ChainSampler, until: f64, rng: &mut ChaCha8Rng) {
        while self.next_jump <= until {
            self.x = sampler.jump(self.x, rng);
            self.next_jump += sampler.holding(self.x, rng);
        }
    }
}

/// Probability that a Brownian bridge from `a > 0` to `b` over time `h`
/// touches 0.
pub(crate) fn bridge_kill_probability(a: f64, b: f64, h: f64) -> f64 {
    if b <= 0.0 {
        1.0
    } else {
        (-2.0 * a * b / h).exp()
    }
}

/// Fraction of a step of length `h` at which a Brownian bridge from `a > 0`
/// to `b`, known to touch 0, first does so. With `u = t / (h - t)` the hitting
/// time has the inverse Gaussian law with mean `a / |b|` and shape `a^2 / h`.
pub(crate) fn kill_fraction(a: f64, b: f64, h: f64, rng: &mut ChaCha8Rng) -> f64 {
    let c = b.abs();
    if a <= 0.0 {
        return 0.0;
    }
    if c <= 1e-300 {
        return 1.0;
    }
    match InverseGaussian::new(a / c, a * a / h) {
        Ok(law) => {
            let u: f64 = rng.sample(law);
            if u.is_finite() {
                u / (1.0 + u)
            } else {
                1.0
            }
        }
        Err(_) => a / (a + c),
    }
}

#[derive(Default)]
struct Accumulators {
    time: f64,
    time_fine: f64,
    /// `(1/2) int dA/dy dt`.
    drift: f64,
    drift_fine: f64,
    /// `sum_jumps [W(X_t, Y_t) - W(X_t-, Y_t)]`.
    jumps: f64,
}

impl Accumulators {
    fn add(&mut self, coarse: (f64, f64), fine: (f64, f64)) {
        self.time += coarse.0;
        self.drift += coarse.1;
        self.time_fine += fine.0;
        self.drift_fine += fine.1;
    }
}

struct PathSim<'s, 'a> {
    sampler: &'s ChainSampler<'s>,
    integrands: &'s Integrands<'a>,
    chain: ChainState,
    rng: ChaCha8Rng,
    acc: Accumulators,
}

impl PathSim<'_, '_> {
    fn primitive(&self, x: usize, y: f64) -> f64 {
        self.integrands.stochastic.map_or(0.0, |m| m.primitive(x, y))
    }

    /// Time integrand and Ito drift at the current state and height `y`.
    fn rates(&self, y: f64) -> (f64, f64) {
        let x = self.chain.x;
        let b = self.integrands.time.map_or(0.0, |g| g(x, y));
        let c = self.integrands.stochastic.map_or(0.0, |m| 0.5 * m.dy(x, y));
        (b, c)
    }

    /// Rates at the killing point; a singular `dA/dy` at 0 falls back to the
    /// left value.
    fn rates_at_zero(&self, left: (f64, f64)) -> (f64, f64) {
        let (b, c) = self.rates(0.0);
        (
            if b.is_finite() { b } else { left.0 },
            if c.is_finite() { c } else { left.1 },
        )
    }

    fn hits_zero(&mut self, a: f64, b: f64, h: f64) -> Option<f64> {
        let u: f64 = self.rng.random();
        (u < bridge_kill_probability(a, b, h)).then(|| kill_fraction(a, b, h, &mut self.rng) * h)
    }

    /// Moves `Y` from `(t0, y0)` to `(t1, y1)` along a Brownian bridge,
    /// applying the jumps of `X` on the way. Returns the killing time if the
    /// bridge reaches 0.
    fn bridge(&mut self, t0: f64, y0: f64, t1: f64, y1: f64) -> Option<f64> {
        let (mut tc, mut yc) = (t0, y0);
        while self.chain.next_jump <= t1 {
            let tj = self.chain.next_jump;
            let span = t1 - tc;
            let (mean, var) = if span > 0.0 {
                let w = (tj - tc) / span;
                (yc + w * (y1 - yc), (tj - tc) * (t1 - tj) / span)
            } else {
                (y1, 0.0)
            };
            let z: f64 = self.rng.sample(StandardNormal);
            let yj = mean + var.max(0.0).sqrt() * z;
            if let Some(dt) = self.hits_zero(yc, yj, tj - tc) {
                return Some(tc + dt);
            }
            let from = self.chain.x;
            let to = self.sampler.jump(from, &mut self.rng);
            self.acc.jumps += self.primitive(to, yj) - self.primitive(from, yj);
            self.chain.x = to;
            self.chain.next_jump = tj + self.sampler.holding(to, &mut self.rng);
            tc = tj;
            yc = yj;
        }
        self.hits_zero(yc, y1, t1 - tc).map(|dt| tc + dt)
    }
}

fn simulate_path(
    cfg: &ProcessConfig,
    sampler: &ChainSampler,
    integrands: &Integrands,
    length_scale: f64,
    index: u64,
) -> PathRecord {
    let mut rng = path_rng(cfg.seed, index);
    let x0 = match cfg.start {
        StartLaw::Stationary => sampler.stationary_draw(&mut rng),
        StartLaw::Fixed(x) => x,
    };
    let chain = ChainState {
        x: x0,
        next_jump: sampler.holding(x0, &mut rng),
    };
    let mut sim = PathSim {
        sampler,
        integrands,
        chain,
        rng,
        acc: Accumulators::default(),
    };
    let level = integrands.support_level;
    let w0 = sim.primitive(x0, cfg.s);
    let finish = |sim: PathSim, tau: f64, y: f64, censored: bool, steps: u64| {
        let acc = &sim.acc;
        let x = sim.chain.x;
        let boundary = sim.primitive(x, y) - w0 - acc.jumps;
        PathRecord {
            initial_state: x0,
            terminal_state: x,
            tau,
            censored,
            steps,
            stochastic: boundary - acc.drift,
            time: acc.time,
            stochastic_fine: boundary - acc.drift_fine,
            time_fine: acc.time_fine,
        }
    };
    let mut t = 0.0;
    let mut y = cfg.s;
    let mut steps = 0u64;
    // Rates at the current point, reused as the next left values.
    let mut carried: Option<(f64, f64)> = None;
    while steps < cfg.max_steps {
        steps += 1;
        if y > level {
            // First passage of Brownian motion from y down to the level:
            // (y - level)^2 / Z^2 with Z standard normal. Jumps of X up there
            // move W by a negligible amount.
            let z: f64 = sim.rng.sample(StandardNormal);
            let duration = ((y - level) / z).powi(2);
            sim.chain.x = sampler.transition(sim.chain.x, duration, &mut sim.rng);
            t += duration;
            sim.chain.next_jump = t + sampler.holding(sim.chain.x, &mut sim.rng);
            y = level;
            carried = None;
            continue;
        }
        let step = cfg.dt * (y / length_scale).powi(2).max(1.0);
        let half = 0.5 * step;
        let r0 = carried.take().unwrap_or_else(|| sim.rates(y));
        let trapezoid = |l: (f64, f64), r: (f64, f64), h: f64| (0.5 * (l.0 + r.0) * h, 0.5 * (l.1 + r.1) * h);

        let z1: f64 = sim.rng.sample(StandardNormal);
        let y1 = y + half.sqrt() * z1;
        if let Some(tau) = sim.bridge(t, y, t + half, y1) {
            let part = trapezoid(r0, sim.rates_at_zero(r0), tau - t);
            sim.acc.add(part, part);
            return finish(sim, tau, 0.0, false, steps);
        }
        let r1 = sim.rates(y1);
        let first = trapezoid(r0, r1, half);

        let z2: f64 = sim.rng.sample(StandardNormal);
        let y2 = y1 + half.sqrt() * z2;
        if let Some(tau) = sim.bridge(t + half, y1, t + step, y2) {
            let rk = sim.rates_at_zero(r0);
            let second = trapezoid(r1, rk, tau - t - half);
            sim.acc
                .add(trapezoid(r0, rk, tau - t), (first.0 + second.0, first.1 + second.1));
            return finish(sim, tau, 0.0, false, steps);
        }
        let r2 = sim.rates(y2);
        let second = trapezoid(r1, r2, half);
        sim.acc.add(trapezoid(r0, r2, step), (first.0 + second.0, first.1 + second.1));
        t += step;
        y = y2;
        carried = Some(r2);
    }
    finish(sim, t, y, true, steps)
}

/// Simulates `count` independent paths. Path `i` uses stream `i` of the
/// seed, so the result does not depend on the thread count.
pub fn sample_paths(
    dec: &SpectralDecomposition,
    cfg: &ProcessConfig,
    count: usize,
    integrands: &Integrands,
) -> Result<PathBundle> {
    cfg.validate(dec.n())?;
    positive("support level", integrands.support_level)?;
    let lambda_max = dec.lambda_max();
    let length_scale = if lambda_max > 0.0 { lambda_max.sqrt().recip() } else { 1.0 };
    let sampler = ChainSampler::new(dec, cfg.kappa);
    let paths: Vec<PathRecord> = (0..count as u64)
        .into_par_iter()
        .map(|i| simulate_path(cfg, &sampler, integrands, length_scale, i))
        .collect();
    Ok(PathBundle {
        paths,
        total_mass: dec.total_mass(),
    })
}

/// `du_f/dy (x, y) = sum_k -sqrt(lambda_k) e^{-sqrt(lambda_k) y} <f, phi_k> phi_k(x)`,
/// tabulated per state for fast evaluation along paths.
#[derive(Clone, Debug)]
pub struct HarmonicDerivative {
    roots: Vec<f64>,
    /// `coefficients[x][k] = -sqrt(lambda_k) <f, phi_k> phi_k(x)`.
    coefficients: Vec<Vec<f64>>,
}

impl HarmonicDerivative {
    pub fn new(dec: &SpectralDecomposition, f: &[f64]) -> Result<Self> {
        let coef = dec.coefficients(f)?;
        let modes: Vec<usize> = (0..dec.n()).filter(|&k| dec.lambdas()[k] > 0.0 && coef[k] != 0.0).collect();
        let roots: Vec<f64> = modes.iter().map(|&k| dec.lambdas()[k].sqrt()).collect();
        let coefficients = (0..dec.n())
            .map(|x| modes.iter().map(|&k| -dec.lambdas()[k].sqrt() * coef[k] * dec.vectors()[k][x]).collect())
            .collect();
        Ok(Self { roots, coefficients })
    }

    pub fn eval(&self, x: usize, y: f64) -> f64 {
        self.roots
            .iter()
            .zip(&self.coefficients[x])
            .map(|(r, c)| c * (-r * y).exp())
            .sum()
    }

    /// `u_f(x, y) - u_f(x, inf)`: the non-constant part of the extension.
    pub fn extension(&self, x: usize, y: f64) -> f64 {
        self.roots
            .iter()
            .zip(&self.coefficients[x])
            .map(|(r, c)| -c / r * (-r * y).exp())
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.roots.is_empty()
    }

    /// Smallest decay rate present, if any.
    pub fn slowest_root(&self) -> Option<f64> {
        self.roots.iter().copied().reduce(f64::min)
    }
}

/// `A(x, y) = (y^alpha ^ N) du_f/dy (x, y)`, the multiplier of the
/// martingale transform.
#[derive(Clone, Debug)]
pub struct WeightedDerivative<'a> {
    table: &'a HarmonicDerivative,
    alpha: f64,
    truncation: f64,
    /// `y_N = N^{1/alpha}`, where the weight stops growing.
    knee: f64,
    /// Per mode: `Gamma(alpha + 1) / r^{alpha + 1}`, `Q(alpha + 1, r y_N)` and
    /// `N e^{-r y_N} / r`.
    modes: Vec<(f64, f64, f64)>,
}

impl<'a> WeightedDerivative<'a> {
    pub fn new(table: &'a HarmonicDerivative, alpha: f64, truncation: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("truncation", truncation)?;
        let knee = truncation.powf(1.0 / alpha);
        let modes = table
            .roots
            .iter()
            .map(|&r| {
                let scale = gamma(alpha + 1.0) / r.powf(alpha + 1.0);
                let upper = upper_gamma(alpha + 1.0, r * knee);
                let flat = if knee.is_finite() { truncation * (-r * knee).exp() / r } else { 0.0 };
                (scale, upper, flat)
            })
            .collect();
        Ok(Self {
            table,
            alpha,
            truncation,
            knee,
            modes,
        })
    }

    fn weight(&self, y: f64) -> (f64, f64) {
        if y >= self.knee {
            (self.truncation, 0.0)
        } else {
            (y.powf(self.alpha), self.alpha * y.powf(self.alpha - 1.0))
        }
    }
}

fn upper_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma_ur(a, x)
    }
}

impl Multiplier for WeightedDerivative<'_> {
    fn value(&self, x: usize, y: f64) -> f64 {
        self.weight(y).0 * self.table.eval(x, y)
    }

    fn primitive(&self, x: usize, y: f64) -> f64 {
        let mut total = 0.0;
        for ((&r, &c), &(scale, upper, flat)) in self.table.roots.iter().zip(&self.table.coefficients[x]).zip(&self.modes) {
            // int_y^inf (eta^alpha ^ N) e^{-r eta} d eta
            let tail = if y >= self.knee {
                self.truncation * (-r * y).exp() / r
            } else {
                scale * (upper_gamma(self.alpha + 1.0, r * y) - upper) + flat
            };
            total -= c * tail;
        }
        total
    }

    fn dy(&self, x: usize, y: f64) -> f64 {
        let (w, dw) = self.weight(y);
        self.table
            .roots
            .iter()
            .zip(&self.table.coefficients[x])
            .map(|(r, c)| c * (-r * y).exp() * (dw - r * w))
            .sum()
    }
}
