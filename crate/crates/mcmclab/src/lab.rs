//! Experiments: π-averaged distance-to-stationarity curves, convergence
//! times and their growth with dimension, acceptance sweeps, and
//! comparisons against the diffusion limit.
//!
//! Work fans out over `(start, replica)` pairs with rayon. Every random
//! quantity comes from a stream addressed by indices, results are
//! collected in index order, and all reductions run sequentially, so the
//! output depends only on the inputs and the master seed, not on the
//! number of threads.

use mcmclab_core::diffusion::{optimize_ell, rwm_speed, simulate_path, DiffusionSpec};
use mcmclab_core::kernels::{
    draw_start, grid_iterations, replica_trajectory, speedup_index, Algorithm, Chain, ChainSpec, Start,
};
use mcmclab_core::kr::{kr_distance_monotone, resample_to, EmpiricalMeasure1D};
use mcmclab_core::rng::{domain, hash64, stream};
use mcmclab_core::stats::{mean, ols, percentile_interval, std_dev};
use mcmclab_core::target::{ProductTarget, TargetModel1D};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Monte Carlo sizes: `starts` (K) draws of `X₀ ~ π`, `replicas` (R)
/// chains per start, a `reference` pool of M draws from `h`, and the
/// iteration and path counts used by sampling, sweeps and diffusion runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub starts: usize,
    pub replicas: usize,
    pub reference: usize,
    pub iters: u64,
    pub paths: usize,
}

impl Budget {
    pub const SMALL: Budget = Budget {
        starts: 8,
        replicas: 256,
        reference: 4096,
        iters: 10_000,
        paths: 2048,
    };
    pub const MEDIUM: Budget = Budget {
        starts: 32,
        replicas: 1024,
        reference: 16_384,
        iters: 100_000,
        paths: 8192,
    };
    pub const PAPER: Budget = Budget {
        starts: 64,
        replicas: 8192,
        reference: 65_536,
        iters: 1_000_000,
        paths: 32_768,
    };

    pub fn preset(name: &str) -> Result<Budget> {
        match name {
            "small" => Ok(Budget::SMALL),
            "medium" => Ok(Budget::MEDIUM),
            "paper" => Ok(Budget::PAPER),
            other => Err(Error::usage(format!("unknown budget {other:?} (small, medium, paper)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 || self.reference == 0 || self.iters == 0 || self.paths == 0 {
            return Err(Error::usage("budgets must be at least 1"));
        }
        if self.replicas < 2 {
            return Err(Error::usage("replicas must be at least 2"));
        }
        Ok(())
    }
}

/// Geometric grid of diffusion times.
pub const DEFAULT_T_GRID: [f64; 8] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
pub const DEFAULT_EPSILON: f64 = 0.2;
/// Replicates behind a noise-floor estimate.
pub const NOISE_REPLICATES: usize = 32;
/// Bootstrap replicates (over starts) behind curve bands and fit intervals.
pub const BAND_REPLICATES: usize = 200;
/// Acceptance rate MALA scales are calibrated to.
pub const MALA_TARGET_ACCEPTANCE: f64 = 0.574;
pub const CALIBRATION_TOLERANCE: f64 = 0.01;

fn par_collect<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

fn measure(atoms: Vec<f64>) -> Result<EmpiricalMeasure1D> {
    Ok(EmpiricalMeasure1D::new(atoms)?)
}

/// Exact KR distance between equal-size samples.
pub fn kr(a: &EmpiricalMeasure1D, b: &EmpiricalMeasure1D) -> Result<f64> {
    Ok(kr_distance_monotone(a, b)?)
}

/// Spread of the KR estimator when both samples come from `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFloor {
    pub mean: f64,
    pub sd: f64,
    /// Mean and standard deviation of `ln KR`; `None` if a replicate was
    /// exactly zero.
    pub log_moments: Option<(f64, f64)>,
}

impl NoiseFloor {
    fn from_replicates(d: &[f64]) -> Self {
        let log_moments = d.iter().all(|&x| x > 0.0).then(|| {
            let logs: Vec<f64> = d.iter().map(|x| x.ln()).collect();
            (mean(&logs), std_dev(&logs))
        });
        NoiseFloor {
            mean: mean(d),
            sd: std_dev(d),
            log_moments,
        }
    }

    /// Three standard deviations above the mean on the log scale, where the
    /// right-skewed null distribution of KR is close to normal; falls back
    /// to `mean + 3 sd` when a replicate was zero. Distances below this are
    /// indistinguishable from zero.
    pub fn level(&self) -> f64 {
        match self.log_moments {
            Some((m, s)) => (m + 3.0 * s).exp(),
            None => self.mean + 3.0 * self.sd,
        }
    }
}

/// Distribution of KR between `n` draws taken from `pool` (or fresh from
/// `h` when `pool` is `None`) and `n` fresh draws from `h`.
pub fn noise_floor(component: &TargetModel1D, pool: Option<&EmpiricalMeasure1D>, n: usize, seed: u64) -> Result<NoiseFloor> {
    let d = par_collect(NOISE_REPLICATES, |b| {
        let b = b as u64;
        let a = match pool {
            Some(p) => resample_to(p, n, &mut stream(seed, &[domain::NOISE, b, 0]))?,
            None => measure(component.sample(&mut stream(seed, &[domain::NOISE, b, 0]), n))?,
        };
        let c = measure(component.sample(&mut stream(seed, &[domain::NOISE, b, 1]), n))?;
        kr(&a, &c)
    })?;
    Ok(NoiseFloor::from_replicates(&d))
}

/// Noise floor for two user-supplied samples: KR between two resamples of
/// their pooled atoms.
pub fn pooled_noise_floor(a: &EmpiricalMeasure1D, b: &EmpiricalMeasure1D, seed: u64) -> Result<NoiseFloor> {
    let n = a.len().min(b.len());
    let pooled = measure(a.atoms().iter().chain(b.atoms()).copied().collect())?;
    let d = par_collect(NOISE_REPLICATES, |r| {
        let r = r as u64;
        let x = resample_to(&pooled, n, &mut stream(seed, &[domain::NOISE, r, 0]))?;
        let y = resample_to(&pooled, n, &mut stream(seed, &[domain::NOISE, r, 1]))?;
        kr(&x, &y)
    })?;
    Ok(NoiseFloor::from_replicates(&d))
}

/// The π-averaged distance to stationarity of the first coordinate,
/// sampled on a grid of diffusion times.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCurve {
    pub algorithm: Algorithm,
    pub dim: usize,
    pub ell: f64,
    pub times: Vec<f64>,
    pub iterations: Vec<u64>,
    pub dist_hat: Vec<f64>,
    /// Half-width of the 95% bootstrap interval of `dist_hat`.
    pub band: Vec<f64>,
    pub noise_floor: NoiseFloor,
    /// `per_start[k][j]`: KR estimate for start `k` at `times[j]`.
    pub per_start: Vec<Vec<f64>>,
    /// `bootstrap[b][j]`: `dist_hat` recomputed on resampled starts.
    pub bootstrap: Vec<Vec<f64>>,
    /// Acceptance rate over all chains, `None` if no steps were taken.
    pub acceptance_rate: Option<f64>,
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::usage("t_grid is empty"));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::usage("t_grid times must be finite and non-negative"));
    }
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::usage("t_grid must be strictly increasing"));
    }
    Ok(())
}

fn bootstrap_over_starts(per_start: &[Vec<f64>], seed: u64) -> Vec<Vec<f64>> {
    let k = per_start.len();
    let t = per_start.first().map_or(0, Vec::len);
    let mut rng = stream(seed, &[domain::BOOTSTRAP]);
    (0..BAND_REPLICATES)
        .map(|_| {
            let mut acc = vec![0.0; t];
            for _ in 0..k {
                let row = &per_start[rng.random_range(0..k)];
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
            acc.iter().map(|a| a / k as f64).collect()
        })
        .collect()
}

/// Runs `budget.starts × budget.replicas` chains and measures, at each
/// grid time, the KR distance between each start's replica cloud and a
/// reference sample from `h`, averaged over starts.
///
/// Starts come from `spec.start` (normally [`Start::FromPi`]); the master
/// seed is `spec.seed`.
pub fn distance_curve(spec: &ChainSpec, t_grid: &[f64], budget: &Budget) -> Result<DistanceCurve> {
    budget.validate()?;
    check_grid(t_grid)?;
    let (k_n, r_n) = (budget.starts, budget.replicas);
    let iterations = grid_iterations(spec.algorithm, spec.dim(), t_grid)?;
    let starts = par_collect(k_n, |k| Ok(draw_start(spec, k)?))?;
    let traces = par_collect(k_n * r_n, |idx| {
        let (k, r) = (idx / r_n, idx % r_n);
        Ok(replica_trajectory(spec, &starts[k], k, r, &iterations)?)
    })?;

    let component = spec.target.component();
    let pool = measure(component.sample(&mut stream(spec.seed, &[domain::REFERENCE]), budget.reference))?;
    let per_start = par_collect(k_n, |k| {
        let reference = resample_to(&pool, r_n, &mut stream(spec.seed, &[domain::RESAMPLE, k as u64]))?;
        (0..iterations.len())
            .map(|j| {
                let atoms = (0..r_n).map(|r| traces[k * r_n + r].0[j]).collect();
                kr(&measure(atoms)?, &reference)
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let dist_hat: Vec<f64> = (0..iterations.len())
        .map(|j| per_start.iter().map(|row| row[j]).sum::<f64>() / k_n as f64)
        .collect();
    let bootstrap = bootstrap_over_starts(&per_start, spec.seed);
    let band = (0..iterations.len())
        .map(|j| {
            let col: Vec<f64> = bootstrap.iter().map(|row| row[j]).collect();
            let (lo, hi) = percentile_interval(&col, 0.95);
            0.5 * (hi - lo)
        })
        .collect();
    let noise_floor = noise_floor(component, Some(&pool), r_n, spec.seed)?;
    let accepted: u64 = traces.iter().map(|t| t.1).sum();
    let last = iterations.last().copied().unwrap_or(0);
    let acceptance_rate = (last > 0).then(|| accepted as f64 / (last as f64 * (k_n * r_n) as f64));
    Ok(DistanceCurve {
        algorithm: spec.algorithm,
        dim: spec.dim(),
        ell: spec.ell,
        times: t_grid.to_vec(),
        iterations,
        dist_hat,
        band,
        noise_floor,
        per_start,
        bootstrap,
        acceptance_rate,
    })
}

/// Grid indices `j` where `dist_hat[j+1] > dist_hat[j] + band[j] + band[j+1]`.
pub fn monotonicity_violations(curve: &DistanceCurve) -> Vec<usize> {
    (0..curve.dist_hat.len().saturating_sub(1))
        .filter(|&j| curve.dist_hat[j + 1] > curve.dist_hat[j] + curve.band[j] + curve.band[j + 1])
        .collect()
}

/// First (interpolated) raw iteration at which `values` drops below
/// `epsilon`; `None` if it never does.
///
/// If the first grid value is already below, that grid point's iteration
/// is returned. Otherwise the crossing is linearly interpolated between the
/// bracketing grid points, in raw-iteration units.
pub fn crossing_time(iterations: &[u64], values: &[f64], epsilon: f64) -> Option<f64> {
    let j = values.iter().position(|&v| v < epsilon)?;
    if j == 0 {
        return Some(iterations[0] as f64);
    }
    let (v0, v1) = (values[j - 1], values[j]);
    let (i0, i1) = (iterations[j - 1] as f64, iterations[j] as f64);
    Some(i0 + (i1 - i0) * (v0 - epsilon) / (v0 - v1))
}

/// `T_ε`: first time `dist_hat + band < ε`, in raw iterations.
pub fn convergence_time(curve: &DistanceCurve, epsilon: f64) -> Option<f64> {
    let upper: Vec<f64> = curve.dist_hat.iter().zip(&curve.band).map(|(d, b)| d + b).collect();
    crossing_time(&curve.iterations, &upper, epsilon)
}

/// How the proposal scale is chosen for each dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EllRule {
    Fixed(f64),
    /// Tune `ℓ` so that the acceptance rate hits the given value.
    Calibrate(f64),
    /// RWM: maximiser of the limiting speed for the component's Fisher
    /// moment. MALA: calibrate to acceptance 0.574.
    Auto,
}

impl EllRule {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::usage(format!("malformed ell_rule {s:?} (fixed:L, calibrate:A or auto)"));
        if s == "auto" {
            return Ok(EllRule::Auto);
        }
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let v: f64 = value.trim().parse().map_err(|_| bad())?;
        match kind.trim() {
            "fixed" if v > 0.0 && v.is_finite() => Ok(EllRule::Fixed(v)),
            "calibrate" if v > 0.0 && v < 1.0 => Ok(EllRule::Calibrate(v)),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for EllRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EllRule::Fixed(v) => write!(f, "fixed:{v}"),
            EllRule::Calibrate(a) => write!(f, "calibrate:{a}"),
            EllRule::Auto => write!(f, "auto"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub ell: f64,
    pub acceptance: f64,
}

const CALIBRATION_CHAINS: usize = 8;
const CALIBRATION_ITERS: u64 = 4000;

fn calibration_acceptance(algorithm: Algorithm, target: &ProductTarget, ell: f64, seed: u64) -> Result<f64> {
    let spec = ChainSpec::new(algorithm, target.clone(), ell, seed, Start::FromPi)?;
    let accepted = par_collect(CALIBRATION_CHAINS, |c| {
        // same streams for every ell, so the estimate moves smoothly with ell
        let mut rng = stream(seed, &[domain::CALIBRATION, c as u64]);
        let start = target.sample(&mut rng);
        let mut chain = Chain::new(&spec, start, rng)?;
        chain.advance_to(CALIBRATION_ITERS);
        Ok(chain.state().accept_count)
    })?;
    Ok(accepted.iter().sum::<u64>() as f64 / (CALIBRATION_ITERS as f64 * CALIBRATION_CHAINS as f64))
}

/// Finds `ℓ` whose acceptance rate (from π starts) is `target_acceptance`
/// by bisection in `log ℓ`.
pub fn calibrate_ell(algorithm: Algorithm, target: &ProductTarget, target_acceptance: f64, seed: u64) -> Result<Calibration> {
    let (mut lo, mut hi) = (0.01f64, 20.0f64);
    let acc_lo = calibration_acceptance(algorithm, target, lo, seed)?;
    let acc_hi = calibration_acceptance(algorithm, target, hi, seed)?;
    if !(acc_lo > target_acceptance && acc_hi < target_acceptance) {
        return Err(Error::Numeric(format!(
            "cannot bracket acceptance {target_acceptance}: {acc_lo:.3} at ell={lo}, {acc_hi:.3} at ell={hi}"
        )));
    }
    let mut best = Calibration {
        ell: lo,
        acceptance: acc_lo,
    };
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        let acc = calibration_acceptance(algorithm, target, mid, seed)?;
        if (acc - target_acceptance).abs() < (best.acceptance - target_acceptance).abs() {
            best = Calibration { ell: mid, acceptance: acc };
        }
        if (acc - target_acceptance).abs() <= 0.002 || hi / lo < 1.0 + 1e-4 {
            break;
        }
        if acc > target_acceptance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (best.acceptance - target_acceptance).abs() > CALIBRATION_TOLERANCE {
        return Err(Error::Numeric(format!(
            "calibration reached acceptance {:.4}, outside {target_acceptance} ± {CALIBRATION_TOLERANCE}",
            best.acceptance
        )));
    }
    Ok(best)
}

/// `ℓ` for dimension `d` under `rule`, plus the calibrated acceptance if
/// one was measured.
pub fn resolve_ell(rule: EllRule, algorithm: Algorithm, target: &ProductTarget, seed: u64) -> Result<(f64, Option<f64>)> {
    match (rule, algorithm) {
        (EllRule::Fixed(l), _) => Ok((l, None)),
        (EllRule::Calibrate(_), _) | (EllRule::Auto, Algorithm::Mala) => {
            let a = if let EllRule::Calibrate(a) = rule { a } else { MALA_TARGET_ACCEPTANCE };
            let c = calibrate_ell(algorithm, target, a, hash64(&[seed, domain::CALIBRATION]))?;
            Ok((c.ell, Some(c.acceptance)))
        }
        (EllRule::Auto, Algorithm::Rwm) => {
            let i = target.component().fisher_i();
            let (l, _) = optimize_ell(|l| rwm_speed(l, i), (0.05, 20.0 / i.sqrt().max(1e-3)))?;
            Ok((l, None))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub dim: usize,
    pub ell: f64,
    pub calibrated_acceptance: Option<f64>,
    pub t_eps: f64,
    pub curve: DistanceCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub intercept: f64,
    /// 95% percentile interval of the slope over bootstrap replicates.
    pub slope_ci: (f64, f64),
    /// Bootstrap replicates in which every dimension reached ε.
    pub ci_replicates: usize,
    pub warnings: Vec<String>,
}

/// Least-squares line through `(ln d, ln T)`: `(slope, intercept)`.
pub fn fit_power_law(dims: &[usize], t_eps: &[f64]) -> Option<(f64, f64)> {
    if t_eps.iter().any(|&t| !(t > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = dims.iter().map(|&d| (d as f64).ln()).collect();
    let ys: Vec<f64> = t_eps.iter().map(|t| t.ln()).collect();
    ols(&xs, &ys)
}

/// Per-dimension seed, so adding a dimension does not perturb the others.
pub fn dim_seed(seed: u64, d: usize) -> u64 {
    hash64(&[seed, d as u64])
}

/// Measures `T_ε(d)` for each dimension and fits `ln T_ε = a + b ln d`.
/// The slope interval comes from recomputing every curve on the same
/// bootstrap resamples of its starts.
#[allow(clippy::too_many_arguments)]
pub fn scaling_fit(
    algorithm: Algorithm,
    component: &TargetModel1D,
    dims: &[usize],
    rule: EllRule,
    epsilon: f64,
    budget: &Budget,
    t_grid: &[f64],
    seed: u64,
) -> Result<ScalingFit> {
    let mut sorted = dims.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(Error::usage("a scaling fit needs at least two distinct dims"));
    }
    if !(epsilon > 0.0 && epsilon < 2.0) {
        return Err(Error::usage(format!("epsilon must lie in (0, 2), got {epsilon}")));
    }
    let mut warnings = Vec::new();
    if sorted.len() < 4 {
        warnings.push(format!("only {} dims; at least 4 are recommended for a slope", sorted.len()));
    }
    let mut points = Vec::with_capacity(dims.len());
    for &d in dims {
        let target = ProductTarget::new(component.clone(), d)?;
        let s = dim_seed(seed, d);
        let (ell, calibrated_acceptance) = resolve_ell(rule, algorithm, &target, s)?;
        let spec = ChainSpec::new(algorithm, target, ell, s, Start::FromPi)?;
        let curve = distance_curve(&spec, t_grid, budget)?;
        if curve.noise_floor.level() > epsilon / 4.0 {
            warnings.push(format!(
                "d={d}: noise floor {:.4} exceeds epsilon/4 = {:.4}",
                curve.noise_floor.level(),
                epsilon / 4.0
            ));
        }
        let t_eps = convergence_time(&curve, epsilon).ok_or_else(|| Error::Unbounded {
            dim: d,
            epsilon,
            last: curve.dist_hat.last().copied().unwrap_or(f64::NAN),
            noise_floor: curve.noise_floor.level(),
        })?;
        if !(t_eps > 0.0) {
            return Err(Error::Numeric(format!(
                "d={d}: convergence time is zero; start the t_grid later than 0"
            )));
        }
        points.push(ScalingPoint {
            dim: d,
            ell,
            calibrated_acceptance,
            t_eps,
            curve,
        });
    }
    let ds: Vec<usize> = points.iter().map(|p| p.dim).collect();
    let ts: Vec<f64> = points.iter().map(|p| p.t_eps).collect();
    let (slope, intercept) =
        fit_power_law(&ds, &ts).ok_or_else(|| Error::Numeric("degenerate scaling regression".into()))?;

    let mut slopes = Vec::with_capacity(BAND_REPLICATES);
    for b in 0..BAND_REPLICATES {
        let tb: Option<Vec<f64>> = points
            .iter()
            .map(|p| {
                let upper: Vec<f64> = p.curve.bootstrap[b].iter().zip(&p.curve.band).map(|(d, w)| d + w).collect();
                crossing_time(&p.curve.iterations, &upper, epsilon)
            })
            .collect();
        if let Some((s, _)) = tb.and_then(|tb| fit_power_law(&ds, &tb)) {
            slopes.push(s);
        }
    }
    let slope_ci = if slopes.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        percentile_interval(&slopes, 0.95)
    };
    if slopes.len() < BAND_REPLICATES {
        warnings.push(format!(
            "{} of {BAND_REPLICATES} bootstrap replicates did not reach epsilon in every dimension",
            BAND_REPLICATES - slopes.len()
        ));
    }
    Ok(ScalingFit {
        algorithm,
        epsilon,
        points,
        slope,
        intercept,
        slope_ci,
        ci_replicates: slopes.len(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub ell: f64,
    pub acceptance: f64,
    /// Mean squared jump per coordinate per iteration.
    pub esjd: f64,
    /// `esjd` times iterations per unit diffusion time.
    pub proxy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub argmax: usize,
    pub warnings: Vec<String>,
}

/// Minimum number of scales in a sweep.
pub const MIN_SWEEP_POINTS: usize = 8;

/// Runs one chain from π per scale in `ell_grid`, all sharing the same
/// start and random stream, and reports acceptance and jump distance.
pub fn acceptance_sweep(spec: &ChainSpec, ell_grid: &[f64], iters: u64) -> Result<Sweep> {
    if ell_grid.len() < MIN_SWEEP_POINTS {
        return Err(Error::usage(format!(
            "a sweep needs at least {MIN_SWEEP_POINTS} scales, got {}",
            ell_grid.len()
        )));
    }
    if iters == 0 {
        return Err(Error::usage("sweep needs iters >= 1"));
    }
    let start = draw_start(spec, 0)?;
    let factor = spec.algorithm.speedup_factor(spec.dim());
    let rows = par_collect(ell_grid.len(), |i| {
        let s = spec.with_ell(ell_grid[i])?;
        let mut chain = Chain::new(&s, start.clone(), stream(spec.seed, &[domain::SWEEP]))?;
        let mut prev = chain.state().position.clone();
        let mut sq = 0.0;
        for _ in 0..iters {
            let before = chain.state().accept_count;
            chain.step();
            if chain.state().accept_count != before {
                let x = &chain.state().position;
                sq += x.iter().zip(&prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                prev.copy_from_slice(x);
            }
        }
        // coordinates are exchangeable, so averaging over them estimates
        // the first coordinate's jump distance with far less noise
        let esjd = sq / (iters as f64 * spec.dim() as f64);
        Ok(SweepRow {
            ell: ell_grid[i],
            acceptance: chain.state().accept_count as f64 / iters as f64,
            esjd,
            proxy: esjd * factor,
        })
    })?;
    let argmax = rows
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| if r.proxy > rows[best].proxy { i } else { best });
    let mut warnings = Vec::new();
    let lo = rows.iter().map(|r| r.acceptance).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.acceptance).fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.05 || hi < 0.95 {
        warnings.push(format!(
            "acceptance rates span [{lo:.3}, {hi:.3}], not the recommended 0.05-0.95"
        ));
    }
    Ok(Sweep { rows, argmax, warnings })
}

/// Terminal values of `paths` Euler–Maruyama paths, in path order. Same
/// streams as the sequential simulator in the core crate.
pub fn diffusion_sample(spec: &DiffusionSpec, u0: f64, paths: usize, seed: u64) -> Result<Vec<f64>> {
    if !u0.is_finite() {
        return Err(Error::usage("u0 must be finite"));
    }
    par_collect(paths, |p| Ok(simulate_path(spec, u0, &mut stream(seed, &[domain::DIFFUSION, p as u64]))?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow {
    pub dim: usize,
    pub iterations: u64,
    pub kr: f64,
    /// 1.96 bootstrap standard deviations of `kr`.
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitCheck {
    pub speed: f64,
    pub rows: Vec<LimitRow>,
    pub noise_floor: NoiseFloor,
}

/// Compares the law of the sped-up first coordinate at time `t`, started
/// at `u0` with the other coordinates drawn from `h`, against the
/// diffusion law at `t` from `u0`, for each dimension.
///
/// For RWM the diffusion speed defaults to `rwm_speed(ℓ, I)`; MALA needs
/// an explicit `speed`.
#[allow(clippy::too_many_arguments)]
pub fn weak_limit_comparison(
    algorithm: Algorithm,
    component: &TargetModel1D,
    dims: &[usize],
    ell: f64,
    t: f64,
    u0: f64,
    speed: Option<f64>,
    paths: usize,
    seed: u64,
) -> Result<LimitCheck> {
    if paths < 2 {
        return Err(Error::usage("limit-check needs paths >= 2"));
    }
    let speed = match (speed, algorithm) {
        (Some(s), _) => s,
        (None, Algorithm::Rwm) => rwm_speed(ell, component.fisher_i()),
        (None, Algorithm::Mala) => {
            return Err(Error::usage("limit-check for MALA needs an explicit diffusion speed"));
        }
    };
    let dspec = DiffusionSpec::new(component.clone(), speed, t)?;
    let limit = measure(diffusion_sample(&dspec, u0, paths, seed)?)?;
    let mut rows = Vec::with_capacity(dims.len());
    for &d in dims {
        let s = dim_seed(seed, d);
        let target = ProductTarget::new(component.clone(), d)?;
        let spec = ChainSpec::new(algorithm, target, ell, s, Start::Mixed { first: u0 })?;
        let it = speedup_index(algorithm, d, t)?;
        let atoms = par_collect(paths, |i| {
            let start = draw_start(&spec, i)?;
            Ok(replica_trajectory(&spec, &start, i, 0, &[it])?.0[0])
        })?;
        let chain = measure(atoms)?;
        let value = kr(&chain, &limit)?;
        let boot = par_collect(NOISE_REPLICATES, |b| {
            let b = b as u64;
            let x = resample_to(&chain, paths, &mut stream(s, &[domain::BOOTSTRAP, b, 0]))?;
            let y = resample_to(&limit, paths, &mut stream(s, &[domain::BOOTSTRAP, b, 1]))?;
            kr(&x, &y)
        })?;
        rows.push(LimitRow {
            dim: d,
            iterations: it,
            kr: value,
            band: 1.96 * std_dev(&boot),
        });
    }
    Ok(LimitCheck {
        speed,
        rows,
        noise_floor: noise_floor(component, None, paths, seed)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub iteration: u64,
    pub kr: f64,
    pub noise_floor: f64,
}

impl ProbeRow {
    pub fn within_floor(&self) -> bool {
        self.kr <= self.noise_floor
    }
}

/// Runs `n_chains` chains from π (one replica each, so the pooled first
/// coordinates are independent) and compares their law at each probe
/// iteration with a fresh sample from `h`.
pub fn stationarity_check(spec: &ChainSpec, n_chains: usize, probes: &[u64]) -> Result<Vec<ProbeRow>> {
    if n_chains < 2 {
        return Err(Error::usage("stationarity check needs at least 2 chains"));
    }
    let mut sorted = probes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let traces = par_collect(n_chains, |i| {
        let start = draw_start(spec, i)?;
        Ok(replica_trajectory(spec, &start, i, 0, &sorted)?.0)
    })?;
    let component = spec.target.component();
    let floor = noise_floor(component, None, n_chains, spec.seed)?.level();
    sorted
        .iter()
        .enumerate()
        .map(|(j, &it)| {
            let pooled = measure(traces.iter().map(|tr| tr[j]).collect())?;
            let reference = measure(component.sample(&mut stream(spec.seed, &[domain::REFERENCE, j as u64]), n_chains))?;
            Ok(ProbeRow {
                iteration: it,
                kr: kr(&pooled, &reference)?,
                noise_floor: floor,
            })
        })
        .collect()
}

/// First-coordinate traces for `starts × replicas` chains, recorded every
/// `thin` iterations (and at the last one).
pub struct SampleRun {
    /// `(start, replica, iteration, coord1)`.
    pub rows: Vec<(usize, usize, u64, f64)>,
    pub acceptance_rate: Option<f64>,
}

pub fn sample_ensemble(spec: &ChainSpec, starts: usize, replicas: usize, iters: u64, thin: u64) -> Result<SampleRun> {
    if starts == 0 || replicas == 0 {
        return Err(Error::usage("starts and replicas must be at least 1"));
    }
    let thin = thin.max(1);
    let mut checkpoints: Vec<u64> = (0..=iters).step_by(thin as usize).collect();
    if checkpoints.last() != Some(&iters) {
        checkpoints.push(iters);
    }
    let start_points = par_collect(starts, |k| Ok(draw_start(spec, k)?))?;
    let traces = par_collect(starts * replicas, |idx| {
        let (k, r) = (idx / replicas, idx % replicas);
        Ok(replica_trajectory(spec, &start_points[k], k, r, &checkpoints)?)
    })?;
    let mut rows = Vec::with_capacity(traces.len() * checkpoints.len());
    let mut accepted = 0;
    for (idx, (vals, acc)) in traces.iter().enumerate() {
        accepted += acc;
        for (&it, &v) in checkpoints.iter().zip(vals) {
            rows.push((idx / replicas, idx % replicas, it, v));
        }
    }
    let acceptance_rate = (iters > 0).then(|| accepted as f64 / (iters as f64 * (starts * replicas) as f64));
    Ok(SampleRun { rows, acceptance_rate })
}
