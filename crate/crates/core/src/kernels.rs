//! Random-walk Metropolis and Metropolis-adjusted Langevin kernels on a
//! product target.
//!
//! Both kernels use Gaussian proposals whose variance shrinks with the
//! dimension: `ℓ²/(d-1)` for RWM and `ℓ² d^{-1/3}` for MALA. Run for
//! `⌊d t⌋` (resp. `⌊d^{1/3} t⌋`) iterations, the first coordinate behaves
//! like a Langevin diffusion observed at time `t`.
//!
//! Each step consumes `d` normals for the proposal and one exponential for
//! the acceptance test, whatever the outcome, so two chains sharing a
//! stream stay coupled.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::kr::EmpiricalMeasure1D;
use crate::math::{abs, cbrt, floor, round, sqrt};
use crate::rng::{domain, stream, StreamRng};
use crate::target::ProductTarget;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Rwm,
    Mala,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Rwm => "rwm",
            Algorithm::Mala => "mala",
        }
    }

    /// `σ²_d` for scale `ell` in dimension `d`.
    pub fn proposal_variance(&self, ell: f64, d: usize) -> f64 {
        match self {
            Algorithm::Rwm => ell * ell / (d as f64 - 1.0),
            Algorithm::Mala => ell * ell / cbrt(d as f64),
        }
    }

    /// Iterations per unit of diffusion time: `d` or `d^{1/3}`.
    pub fn speedup_factor(&self, d: usize) -> f64 {
        match self {
            Algorithm::Rwm => d as f64,
            Algorithm::Mala => cbrt(d as f64),
        }
    }
}

impl core::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rwm" | "RWM" => Ok(Algorithm::Rwm),
            "mala" | "MALA" => Ok(Algorithm::Mala),
            _ => Err(Error::invalid("algo", alloc::format!("expected rwm or mala, got {s:?}"))),
        }
    }
}

/// Floor of `x`, snapping values within rounding error of an integer to it
/// so that e.g. `1000^{1/3} · 2` lands on 20 rather than 19.
fn floor_snapped(x: f64) -> f64 {
    let r = round(x);
    if abs(x - r) <= 1e-9 * x.max(1.0) {
        r
    } else {
        floor(x)
    }
}

/// Raw iteration reached at diffusion time `t`.
pub fn speedup_index(algorithm: Algorithm, d: usize, t: f64) -> Result<u64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", "diffusion time must be finite and non-negative"));
    }
    Ok(floor_snapped(algorithm.speedup_factor(d) * t) as u64)
}

/// How a chain's initial state is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Explicit(Vec<f64>),
    /// Every coordinate drawn independently from `h`.
    FromPi,
    /// First coordinate fixed, the rest drawn from `h`.
    Mixed { first: f64 },
}

impl Start {
    pub fn draw<R: Rng + ?Sized>(&self, target: &ProductTarget, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Start::Explicit(x) => {
                if x.len() != target.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: target.dim(),
                        found: x.len(),
                    });
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("start"));
                }
                Ok(x.clone())
            }
            Start::FromPi => Ok(target.sample(rng)),
            Start::Mixed { first } => {
                if !first.is_finite() {
                    return Err(Error::NonFinite("start"));
                }
                let mut x = target.sample(rng);
                x[0] = *first;
                Ok(x)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub algorithm: Algorithm,
    pub ell: f64,
    pub target: ProductTarget,
    pub seed: u64,
    pub start: Start,
}

impl ChainSpec {
    pub fn new(algorithm: Algorithm, target: ProductTarget, ell: f64, seed: u64, start: Start) -> Result<Self> {
        if target.dim() < 2 {
            return Err(Error::invalid("dim", "chains need d >= 2"));
        }
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::invalid("ell", "must be finite and positive"));
        }
        Ok(ChainSpec {
            algorithm,
            ell,
            target,
            seed,
            start,
        })
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn proposal_variance(&self) -> f64 {
        self.algorithm.proposal_variance(self.ell, self.dim())
    }

    /// The same spec with a different scale.
    pub fn with_ell(&self, ell: f64) -> Result<Self> {
        ChainSpec::new(self.algorithm, self.target.clone(), ell, self.seed, self.start.clone())
    }
}

/// Current position plus cached `log π` (and gradient, for MALA).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub position: Vec<f64>,
    pub iteration: u64,
    pub accept_count: u64,
    pub cached_log_pi: f64,
    /// Empty for RWM.
    pub cached_grad: Vec<f64>,
}

impl ChainState {
    pub fn new(spec: &ChainSpec, position: Vec<f64>) -> Result<Self> {
        let cached_log_pi = spec.target.log_density(&position)?;
        if !cached_log_pi.is_finite() {
            return Err(Error::NonFinite("log density at start"));
        }
        let cached_grad = match spec.algorithm {
            Algorithm::Rwm => Vec::new(),
            Algorithm::Mala => spec.target.grad_log_density(&position)?,
        };
        Ok(ChainState {
            position,
            iteration: 0,
            accept_count: 0,
            cached_log_pi,
            cached_grad,
        })
    }

    pub fn first_coordinate(&self) -> f64 {
        self.position[0]
    }
}

/// `log π(y) - log π(z)`, the RWM log acceptance ratio.
pub fn rwm_log_ratio(target: &ProductTarget, z: &[f64], y: &[f64]) -> Result<f64> {
    Ok(target.log_density(y)? - target.log_density(z)?)
}

/// `log q(a → b)` for the Langevin proposal with gradient `grad_a` at `a`,
/// up to the constant shared by both directions.
pub fn log_proposal_density(a: &[f64], grad_a: &[f64], b: &[f64], variance: f64) -> f64 {
    let half = 0.5 * variance;
    let mut ss = 0.0;
    for ((&ai, &gi), &bi) in a.iter().zip(grad_a).zip(b) {
        let r = bi - ai - half * gi;
        ss += r * r;
    }
    -ss / (2.0 * variance)
}

/// Full MALA log acceptance ratio for moving from `z` to `y`.
pub fn mala_log_ratio(target: &ProductTarget, z: &[f64], y: &[f64], variance: f64) -> Result<f64> {
    let gz = target.grad_log_density(z)?;
    let gy = target.grad_log_density(y)?;
    let forward = log_proposal_density(z, &gz, y, variance);
    let backward = log_proposal_density(y, &gy, z, variance);
    Ok(target.log_density(y)? - target.log_density(z)? + backward - forward)
}

#[inline]
fn accept(log_ratio: f64, log_u: f64) -> bool {
    log_ratio.is_finite() && (log_ratio >= 0.0 || log_u < log_ratio)
}

/// Reusable proposal buffers.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    proposal: Vec<f64>,
    grad: Vec<f64>,
}

impl Scratch {
    fn ensure(&mut self, d: usize) {
        self.proposal.resize(d, 0.0);
        self.grad.resize(d, 0.0);
    }
}

/// One RWM transition.
pub fn rwm_step<R: Rng + ?Sized>(state: &mut ChainState, spec: &ChainSpec, rng: &mut R, scratch: &mut Scratch) {
    let d = spec.dim();
    scratch.ensure(d);
    let sigma = sqrt(spec.proposal_variance());
    for (y, &z) in scratch.proposal.iter_mut().zip(&state.position) {
        let xi: f64 = rng.sample(StandardNormal);
        *y = z + sigma * xi;
    }
    let log_u = -rng.sample::<f64, _>(Exp1);
    let lp = spec.target.log_density_unchecked(&scratch.proposal);
    if accept(lp - state.cached_log_pi, log_u) {
        core::mem::swap(&mut state.position, &mut scratch.proposal);
        state.cached_log_pi = lp;
        state.accept_count += 1;
    }
    state.iteration += 1;
}

/// One MALA transition.
pub fn mala_step<R: Rng + ?Sized>(state: &mut ChainState, spec: &ChainSpec, rng: &mut R, scratch: &mut Scratch) {
    let d = spec.dim();
    scratch.ensure(d);
    let var = spec.proposal_variance();
    let sigma = sqrt(var);
    let half = 0.5 * var;
    let mut forward = 0.0;
    for ((y, &z), &g) in scratch.proposal.iter_mut().zip(&state.position).zip(&state.cached_grad) {
        let xi: f64 = rng.sample(StandardNormal);
        *y = z + half * g + sigma * xi;
        forward += xi * xi;
    }
    // log q(z -> y) = -|σξ|² / (2σ²)
    forward *= -0.5;
    let log_u = -rng.sample::<f64, _>(Exp1);
    let lp = spec.target.log_density_unchecked(&scratch.proposal);
    spec.target.grad_into(&scratch.proposal, &mut scratch.grad);
    let backward = log_proposal_density(&scratch.proposal, &scratch.grad, &state.position, var);
    if accept(lp - state.cached_log_pi + backward - forward, log_u) {
        core::mem::swap(&mut state.position, &mut scratch.proposal);
        core::mem::swap(&mut state.cached_grad, &mut scratch.grad);
        state.cached_log_pi = lp;
        state.accept_count += 1;
    }
    state.iteration += 1;
}

/// A chain bundled with its stream and buffers.
#[derive(Debug, Clone)]
pub struct Chain<'a> {
    spec: &'a ChainSpec,
    state: ChainState,
    rng: StreamRng,
    scratch: Scratch,
}

impl<'a> Chain<'a> {
    pub fn new(spec: &'a ChainSpec, position: Vec<f64>, rng: StreamRng) -> Result<Self> {
        Ok(Chain {
            spec,
            state: ChainState::new(spec, position)?,
            rng,
            scratch: Scratch::default(),
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn step(&mut self) {
        match self.spec.algorithm {
            Algorithm::Rwm => rwm_step(&mut self.state, self.spec, &mut self.rng, &mut self.scratch),
            Algorithm::Mala => mala_step(&mut self.state, self.spec, &mut self.rng, &mut self.scratch),
        }
    }

    /// Advances to raw iteration `n` (no-op if already there).
    pub fn advance_to(&mut self, n: u64) {
        while self.state.iteration < n {
            self.step();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    /// `(iteration, first coordinate)` at each recorded iteration.
    pub trace: Vec<(u64, f64)>,
    pub iterations: u64,
    pub accepted: u64,
}

impl ChainRun {
    /// `accepted / iterations`, or `None` for an empty run.
    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.iterations > 0).then(|| self.accepted as f64 / self.iterations as f64)
    }
}

fn sorted_checkpoints(record: &[u64], n_iters: u64) -> Result<Vec<u64>> {
    let mut points = record.to_vec();
    points.sort_unstable();
    points.dedup();
    if let Some(&last) = points.last() {
        if last > n_iters {
            return Err(Error::invalid("record", "recorded iteration beyond n_iters"));
        }
    }
    Ok(points)
}

/// Runs a single chain for `n_iters` steps, recording the first coordinate
/// at the iterations in `record` (the final state if `record` is empty).
///
/// The start is drawn from the stream `(seed, START, 0)` and the chain uses
/// `(seed, CHAIN, 0, 0)`, matching start 0, replica 0 of an ensemble.
pub fn run_chain(spec: &ChainSpec, n_iters: u64, record: &[u64]) -> Result<ChainRun> {
    let mut points = sorted_checkpoints(record, n_iters)?;
    if points.is_empty() {
        points.push(n_iters);
    }
    let start = spec.start.draw(&spec.target, &mut stream(spec.seed, &[domain::START, 0]))?;
    let mut chain = Chain::new(spec, start, stream(spec.seed, &[domain::CHAIN, 0, 0]))?;
    let mut trace = Vec::with_capacity(points.len());
    for &p in &points {
        chain.advance_to(p);
        trace.push((p, chain.state.first_coordinate()));
    }
    chain.advance_to(n_iters);
    Ok(ChainRun {
        trace,
        iterations: chain.state.iteration,
        accepted: chain.state.accept_count,
    })
}

/// Draws start `k` for an ensemble from the stream `(seed, START, k)`.
pub fn draw_start(spec: &ChainSpec, k: usize) -> Result<Vec<f64>> {
    spec.start.draw(&spec.target, &mut stream(spec.seed, &[domain::START, k as u64]))
}

/// First coordinate of replica `r` of start `k` at each of the ascending
/// raw iterations in `checkpoints`, plus the accept count over the run.
pub fn replica_trajectory(
    spec: &ChainSpec,
    start: &[f64],
    k: usize,
    r: usize,
    checkpoints: &[u64],
) -> Result<(Vec<f64>, u64)> {
    let rng = stream(spec.seed, &[domain::CHAIN, k as u64, r as u64]);
    let mut chain = Chain::new(spec, start.to_vec(), rng)?;
    let mut out = Vec::with_capacity(checkpoints.len());
    for &p in checkpoints {
        chain.advance_to(p);
        out.push(chain.state.first_coordinate());
    }
    Ok((out, chain.state.accept_count))
}

/// Per-start, per-time empirical laws of the first coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub times: Vec<f64>,
    pub iterations: Vec<u64>,
    /// `measures[k][j]`: the `R` replicas of start `k` at `times[j]`.
    pub measures: Vec<Vec<EmpiricalMeasure1D>>,
    pub accepted: u64,
    pub proposals: u64,
}

/// Raw iterations for a grid of diffusion times.
pub fn grid_iterations(algorithm: Algorithm, d: usize, t_grid: &[f64]) -> Result<Vec<u64>> {
    if t_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::invalid("t_grid", "times must be ascending"));
    }
    t_grid.iter().map(|&t| speedup_index(algorithm, d, t)).collect()
}

/// Runs `replicas` independent chains from each start and collects the
/// first coordinate at each grid time. Sequential; the std crate runs the
/// same per-replica unit in parallel.
pub fn ensemble_run(spec: &ChainSpec, starts: &[Vec<f64>], replicas: usize, t_grid: &[f64]) -> Result<Ensemble> {
    if starts.is_empty() {
        return Err(Error::Empty("starts"));
    }
    if replicas < 2 {
        return Err(Error::invalid("replicas", "need at least 2 per start"));
    }
    if t_grid.is_empty() {
        return Err(Error::Empty("t_grid"));
    }
    let iterations = grid_iterations(spec.algorithm, spec.dim(), t_grid)?;
    let mut measures = Vec::with_capacity(starts.len());
    let mut accepted = 0;
    let mut proposals = 0;
    for (k, start) in starts.iter().enumerate() {
        let mut cols = vec![Vec::with_capacity(replicas); iterations.len()];
        for r in 0..replicas {
            let (vals, acc) = replica_trajectory(spec, start, k, r, &iterations)?;
            for (c, v) in cols.iter_mut().zip(vals) {
                c.push(v);
            }
            accepted += acc;
            proposals += iterations.last().copied().unwrap_or(0);
        }
        measures.push(cols.into_iter().map(EmpiricalMeasure1D::new).collect::<Result<Vec<_>>>()?);
    }
    Ok(Ensemble {
        times: t_grid.to_vec(),
        iterations,
        measures,
        accepted,
        proposals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::registry;

    fn spec(algorithm: Algorithm, d: usize, ell: f64) -> ChainSpec {
        let t = ProductTarget::new(registry("std_normal").unwrap(), d).unwrap();
        ChainSpec::new(algorithm, t, ell, 7, Start::FromPi).unwrap()
    }

    #[test]
    fn speedup_examples() {
        assert_eq!(speedup_index(Algorithm::Rwm, 100, 1.5).unwrap(), 150);
        assert_eq!(speedup_index(Algorithm::Mala, 1000, 2.0).unwrap(), 20);
        assert_eq!(speedup_index(Algorithm::Rwm, 7, 0.0).unwrap(), 0);
        assert!(speedup_index(Algorithm::Rwm, 7, -1.0).is_err());
    }

    #[test]
    fn empty_run_has_no_rate() {
        let run = run_chain(&spec(Algorithm::Rwm, 3, 1.0), 0, &[]).unwrap();
        assert_eq!(run.trace.len(), 1);
        assert_eq!(run.trace[0].0, 0);
        assert_eq!(run.acceptance_rate(), None);
    }

    #[test]
    fn record_beyond_run_is_rejected() {
        assert!(run_chain(&spec(Algorithm::Rwm, 3, 1.0), 5, &[6]).is_err());
    }

    #[test]
    fn spec_validation() {
        let t = ProductTarget::new(registry("std_normal").unwrap(), 1).unwrap();
        assert!(ChainSpec::new(Algorithm::Rwm, t.clone(), 1.0, 0, Start::FromPi).is_err());
        let t = ProductTarget::new(registry("std_normal").unwrap(), 2).unwrap();
        assert!(ChainSpec::new(Algorithm::Rwm, t.clone(), 0.0, 0, Start::FromPi).is_err());
        let s = ChainSpec::new(Algorithm::Rwm, t, 1.0, 0, Start::Explicit(vec![0.0])).unwrap();
        assert!(run_chain(&s, 1, &[]).is_err());
    }

    #[test]
    fn mala_state_caches_stay_consistent() {
        let s = spec(Algorithm::Mala, 5, 1.2);
        let start = draw_start(&s, 0).unwrap();
        let mut chain = Chain::new(&s, start, stream(1, &[])).unwrap();
        for _ in 0..200 {
            chain.step();
        }
        let st = chain.state();
        assert_eq!(st.cached_log_pi, s.target.log_density(&st.position).unwrap());
        assert_eq!(st.cached_grad, s.target.grad_log_density(&st.position).unwrap());
        assert!(st.accept_count <= st.iteration);
    }
}
