//! The limiting Langevin diffusion `dU = √s dB + (s/2)(log h)'(U) dt` and
//! the random-walk speed and acceptance functions.
//!
//! For RWM with scale `ℓ` on a component with Fisher moment `I`, the
//! speed is `2ℓ²Φ(-ℓ√I/2)` and the limiting acceptance rate is
//! `2Φ(-ℓ√I/2)`. The speed peaks where the acceptance rate is about 0.234.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::kr::EmpiricalMeasure1D;
use crate::math::{abs, normal_cdf, sqrt};
use crate::rng::{domain, stream};
use crate::target::TargetModel1D;
use crate::{Error, Result};

/// Paths leaving `[-DIVERGENCE_BOUND, DIVERGENCE_BOUND]` abort the run.
pub const DIVERGENCE_BOUND: f64 = 1e8;

/// Default Euler–Maruyama step for speed `s`.
pub fn default_dt(speed: f64) -> f64 {
    1e-3 / speed
}

#[derive(Debug, Clone)]
pub struct DiffusionSpec {
    pub component: TargetModel1D,
    pub speed: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl DiffusionSpec {
    /// A spec with the default step. `t_end = 0` is allowed and means no
    /// steps are taken.
    pub fn new(component: TargetModel1D, speed: f64, t_end: f64) -> Result<Self> {
        Self::with_dt(component, speed, default_dt(speed), t_end)
    }

    pub fn with_dt(component: TargetModel1D, speed: f64, dt: f64, t_end: f64) -> Result<Self> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::invalid("speed", "must be finite and positive"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", "must be finite and positive"));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::invalid("t_end", "must be finite and non-negative"));
        }
        if t_end > 0.0 && dt > t_end {
            return Err(Error::invalid("dt", "step exceeds the horizon"));
        }
        Ok(DiffusionSpec {
            component,
            speed,
            dt,
            t_end,
        })
    }

    /// Number of steps; the last one is shortened to land on `t_end`.
    pub fn steps(&self) -> u64 {
        let n = self.t_end / self.dt;
        let r = crate::math::round(n);
        if abs(n - r) <= 1e-9 * n.max(1.0) {
            r as u64
        } else {
            crate::math::floor(n) as u64 + 1
        }
    }
}

/// Terminal value of one Euler–Maruyama path started at `u0`.
pub fn simulate_path<R: Rng + ?Sized>(spec: &DiffusionSpec, u0: f64, rng: &mut R) -> Result<f64> {
    let n = spec.steps();
    let s = spec.speed;
    let mut u = u0;
    let mut t = 0.0;
    for step in 0..n {
        let dt = if step + 1 == n { spec.t_end - t } else { spec.dt };
        let xi: f64 = rng.sample(StandardNormal);
        u += 0.5 * s * spec.component.dlog_h(u) * dt + sqrt(s * dt) * xi;
        t += spec.dt;
        if !(abs(u) <= DIVERGENCE_BOUND) {
            return Err(Error::Diverged { step: step + 1, value: u });
        }
    }
    Ok(u)
}

/// Terminal values of `n_paths` paths; path `p` uses the stream
/// `(seed, DIFFUSION, p)`.
pub fn simulate_diffusion(spec: &DiffusionSpec, u0: f64, seed: u64, n_paths: usize) -> Result<EmpiricalMeasure1D> {
    if !u0.is_finite() {
        return Err(Error::NonFinite("u0"));
    }
    if n_paths == 0 {
        return Err(Error::Empty("paths"));
    }
    let mut out = vec![0.0; n_paths];
    for (p, v) in out.iter_mut().enumerate() {
        *v = simulate_path(spec, u0, &mut stream(seed, &[domain::DIFFUSION, p as u64]))?;
    }
    EmpiricalMeasure1D::new(out)
}

/// `2ℓ²Φ(-ℓ√I/2)`.
pub fn rwm_speed(ell: f64, fisher_i: f64) -> f64 {
    2.0 * ell * ell * normal_cdf(-0.5 * ell * sqrt(fisher_i))
}

/// `2Φ(-ℓ√I/2)`.
pub fn rwm_asymptotic_acceptance(ell: f64, fisher_i: f64) -> f64 {
    2.0 * normal_cdf(-0.5 * ell * sqrt(fisher_i))
}

/// Points in the unimodality scan that precedes the golden-section search.
pub const SCAN_POINTS: usize = 64;

/// Tolerance in `ℓ` for [`optimize_ell`].
pub const ELL_TOLERANCE: f64 = 1e-6;

/// Maximises `speed` over `bracket` by golden-section search.
///
/// A grid scan first checks that the sampled values rise then fall (ties
/// allowed); otherwise the grid is returned in the error.
pub fn optimize_ell<F: Fn(f64) -> f64>(speed: F, bracket: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid("bracket", "need finite lo < hi"));
    }
    let grid: Vec<(f64, f64)> = (0..SCAN_POINTS)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / (SCAN_POINTS - 1) as f64;
            (x, speed(x))
        })
        .collect();
    if grid.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::NotUnimodal { grid });
    }
    let mut falling = false;
    for w in grid.windows(2) {
        if w[1].1 < w[0].1 {
            falling = true;
        } else if falling && w[1].1 > w[0].1 {
            return Err(Error::NotUnimodal { grid });
        }
    }

    let inv_phi = 0.5 * (sqrt(5.0) - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (speed(c), speed(d));
    while b - a > ELL_TOLERANCE {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = speed(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = speed(d);
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, speed(x)))
}
