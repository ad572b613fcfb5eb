//! Component densities `h` on the real line and the product target
//! `π_d(x) = ∏ h(x_i)`.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::math::{abs, exp, floor, ln, log1p, normal_log_pdf, sqrt, tanh, LN_SQRT_2PI};
use crate::quadrature::{self, gauss_legendre_cell, Tolerance};
use crate::{Error, Result};

/// A log-density on the real line together with its derivative.
///
/// Implementations may be unnormalised; [`TargetModel1D`] measures and
/// removes the normalising constant. The batch methods exist so that a
/// product target pays one dynamic dispatch per sweep rather than one per
/// coordinate.
pub trait LogDensity1D: Send + Sync + fmt::Debug {
    fn log_density(&self, x: f64) -> f64;

    /// `(log h)'(x)`.
    fn dlog_density(&self, x: f64) -> f64;

    fn sum_log_density(&self, xs: &[f64]) -> f64 {
        let mut s = 0.0;
        for &x in xs {
            s += self.log_density(x);
        }
        s
    }

    fn grad_into(&self, xs: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = self.dlog_density(x);
        }
    }
}

/// Centred normal with standard deviation `sd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    pub sd: f64,
}

impl LogDensity1D for Normal {
    fn log_density(&self, x: f64) -> f64 {
        normal_log_pdf(x, self.sd)
    }

    fn dlog_density(&self, x: f64) -> f64 {
        -x / (self.sd * self.sd)
    }

    fn sum_log_density(&self, xs: &[f64]) -> f64 {
        let mut ss = 0.0;
        for &x in xs {
            ss += x * x;
        }
        let n = xs.len() as f64;
        -0.5 * ss / (self.sd * self.sd) - n * (ln(self.sd) + LN_SQRT_2PI)
    }

    fn grad_into(&self, xs: &[f64], out: &mut [f64]) {
        let prec = 1.0 / (self.sd * self.sd);
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = -x * prec;
        }
    }
}

/// Standard logistic density `e^{-x} / (1 + e^{-x})^2`.
///
/// Its score `-tanh(x/2)` is bounded and `1/2`-Lipschitz, and `I = 1/3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Logistic;

impl LogDensity1D for Logistic {
    fn log_density(&self, x: f64) -> f64 {
        let a = abs(x);
        -a - 2.0 * log1p(exp(-a))
    }

    fn dlog_density(&self, x: f64) -> f64 {
        -tanh(0.5 * x)
    }
}

/// Equal-weight mixture `½N(-μ, 1) + ½N(μ, 1)`; bimodal for `μ > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalMixture {
    pub shift: f64,
}

impl LogDensity1D for NormalMixture {
    fn log_density(&self, x: f64) -> f64 {
        let mu = self.shift;
        let z = abs(mu * x);
        let ln_cosh = z + log1p(exp(-2.0 * z)) - core::f64::consts::LN_2;
        -0.5 * (x * x + mu * mu) - LN_SQRT_2PI + ln_cosh
    }

    fn dlog_density(&self, x: f64) -> f64 {
        -x + self.shift * tanh(self.shift * x)
    }
}

/// Closed-form samplers for the built-in densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactSampler {
    Normal { sd: f64 },
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Exact,
    InverseCdfTable,
}

#[derive(Debug, Clone)]
enum Sampler {
    Exact(ExactSampler),
    Table(Arc<InverseCdfTable>),
}

/// Number of equal-probability intervals in an inverse-CDF table.
pub const QUANTILE_KNOTS: usize = 1 << 14;

/// Numeric CDF on an equispaced grid, interpolated by cubic Hermite
/// segments that use the exact density as the derivative at each node.
#[derive(Debug, Clone)]
pub struct NumericCdf {
    lo: f64,
    step: f64,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl NumericCdf {
    /// Tabulates `∫_lo^x h` for the (possibly unnormalised) density `h` on
    /// `cells` equal cells; the result is rescaled to total mass one.
    pub fn build<F: Fn(f64) -> f64>(h: F, lo: f64, hi: f64, cells: usize) -> Self {
        let step = (hi - lo) / cells as f64;
        let mut cdf = Vec::with_capacity(cells + 1);
        let mut pdf = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        pdf.push(h(lo));
        for j in 0..cells {
            let a = lo + j as f64 * step;
            acc += gauss_legendre_cell(&h, a, step);
            cdf.push(acc);
            pdf.push(h(a + step));
        }
        let total = acc;
        for v in cdf.iter_mut() {
            *v /= total;
        }
        for v in pdf.iter_mut() {
            *v /= total;
        }
        NumericCdf { lo, step, cdf, pdf }
    }

    fn cell(&self, x: f64) -> (usize, f64) {
        let cells = self.cdf.len() - 1;
        let s = (x - self.lo) / self.step;
        let j = if s <= 0.0 {
            0
        } else {
            (floor(s) as usize).min(cells - 1)
        };
        (j, (s - j as f64).clamp(0.0, 1.0))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let hi = self.lo + self.step * (self.cdf.len() - 1) as f64;
        if x <= self.lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let (j, t) = self.cell(x);
        let (t2, t3) = (t * t, t * t * t);
        let h = self.step;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.cdf[j]
            + (t3 - 2.0 * t2 + t) * h * self.pdf[j]
            + (-2.0 * t3 + 3.0 * t2) * self.cdf[j + 1]
            + (t3 - t2) * h * self.pdf[j + 1]
    }

    pub fn density(&self, x: f64) -> f64 {
        let hi = self.lo + self.step * (self.cdf.len() - 1) as f64;
        if x < self.lo || x > hi {
            return 0.0;
        }
        let (j, t) = self.cell(x);
        let t2 = t * t;
        let h = self.step;
        ((6.0 * t2 - 6.0 * t) * self.cdf[j]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.pdf[j]
            + (-6.0 * t2 + 6.0 * t) * self.cdf[j + 1]
            + (3.0 * t2 - 2.0 * t) * h * self.pdf[j + 1])
            / h
    }

    /// Solves `F(x) = p` inside `[lo, hi]` by safeguarded Newton steps.
    fn solve(&self, p: f64, mut lo: f64, mut hi: f64, mut x: f64, iters: usize) -> f64 {
        for _ in 0..iters {
            let r = self.eval(x) - p;
            if r == 0.0 {
                return x;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.density(x);
            let newton = if d > 0.0 { x - r / d } else { f64::NAN };
            if newton == x {
                return x;
            }
            // the bracket is closed: a converged step may land on an end
            x = if newton >= lo && newton <= hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }
}

/// Quantile function tabulated at `QUANTILE_KNOTS + 1` equispaced
/// probabilities and interpolated by a monotone (Fritsch–Carlson limited)
/// cubic, then polished against the numeric CDF.
#[derive(Debug, Clone)]
pub struct InverseCdfTable {
    knots: Vec<f64>,
    slopes: Vec<f64>,
    cdf: NumericCdf,
}

impl InverseCdfTable {
    pub fn build<F: Fn(f64) -> f64>(h: F, lo: f64, hi: f64) -> Self {
        let n = QUANTILE_KNOTS;
        let cdf = NumericCdf::build(&h, lo, hi, n);
        let mut knots = Vec::with_capacity(n + 1);
        knots.push(lo);
        let mut j = 0usize;
        for k in 1..n {
            let p = k as f64 / n as f64;
            while j + 1 < n && cdf.cdf[j + 1] < p {
                j += 1;
            }
            let a = lo + j as f64 * cdf.step;
            let b = a + cdf.step;
            knots.push(cdf.solve(p, a, b, 0.5 * (a + b), 60));
        }
        knots.push(hi);

        let mut slopes: Vec<f64> = knots
            .iter()
            .map(|&x| {
                let d = cdf.density(x);
                if d > 0.0 {
                    1.0 / d
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let hp = 1.0 / n as f64;
        for k in 0..n {
            let secant = (knots[k + 1] - knots[k]) / hp;
            if secant <= 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let a = (slopes[k] / secant).min(3.0);
            let b = (slopes[k + 1] / secant).min(3.0);
            let s = a * a + b * b;
            let tau = if s > 9.0 { 3.0 / sqrt(s) } else { 1.0 };
            slopes[k] = tau * a * secant;
            slopes[k + 1] = tau * b * secant;
        }
        InverseCdfTable { knots, slopes, cdf }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let n = QUANTILE_KNOTS;
        let s = u.clamp(0.0, 1.0) * n as f64;
        let k = (floor(s) as usize).min(n - 1);
        let t = s - k as f64;
        let hp = 1.0 / n as f64;
        let (t2, t3) = (t * t, t * t * t);
        let (x0, x1) = (self.knots[k], self.knots[k + 1]);
        let x = (2.0 * t3 - 3.0 * t2 + 1.0) * x0
            + (t3 - 2.0 * t2 + t) * hp * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * x1
            + (t3 - t2) * hp * self.slopes[k + 1];
        self.cdf.solve(u, x0, x1, x.clamp(x0, x1), 3)
    }

    pub fn cdf(&self) -> &NumericCdf {
        &self.cdf
    }
}

/// A normalised one-dimensional component density with everything the
/// samplers and the diffusion limit need. Cheap to clone and safe to share.
#[derive(Clone)]
pub struct TargetModel1D {
    name: String,
    density: Arc<dyn LogDensity1D>,
    log_norm: f64,
    support: (f64, f64),
    fisher_i: f64,
    sampler: Sampler,
}

impl fmt::Debug for TargetModel1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetModel1D")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("fisher_i", &self.fisher_i)
            .field("sampler", &self.sampler_kind())
            .finish()
    }
}

pub struct TargetModelBuilder {
    name: String,
    density: Arc<dyn LogDensity1D>,
    support: Option<(f64, f64)>,
    normalized: bool,
    exact: Option<ExactSampler>,
}

impl TargetModelBuilder {
    /// Declared support `[lo, hi]`; the density's mass outside it is
    /// treated as zero for normalisation, moments and tabulated sampling.
    pub fn support(mut self, lo: f64, hi: f64) -> Self {
        self.support = Some((lo, hi));
        self
    }

    /// Skip quadrature normalisation for densities already normalised in
    /// closed form.
    pub fn normalized(mut self) -> Self {
        self.normalized = true;
        self
    }

    pub fn exact_sampler(mut self, sampler: ExactSampler) -> Self {
        self.exact = Some(sampler);
        self
    }

    pub fn build(self) -> Result<TargetModel1D> {
        let (lo, hi) = self
            .support
            .ok_or_else(|| Error::invalid("support", "a support interval must be declared"))?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("support", "need finite lo < hi"));
        }
        let density = self.density;
        let log_norm = if self.normalized {
            0.0
        } else {
            // shift by the grid maximum so the integrand stays in range
            let shift = (0..=2000)
                .map(|k| density.log_density(lo + (hi - lo) * k as f64 / 2000.0))
                .filter(|v| v.is_finite())
                .fold(f64::NEG_INFINITY, f64::max);
            if !shift.is_finite() {
                return Err(Error::NonFinite("log density on the support"));
            }
            let mass = quadrature::integrate(
                |x| exp(density.log_density(x) - shift),
                lo,
                hi,
                Tolerance::default(),
            )
            .map_err(|r| Error::Quadrature {
                density: self.name.clone(),
                estimate: r.value,
                error: r.error,
            })?;
            shift + ln(mass.value)
        };
        let mut model = TargetModel1D {
            name: self.name,
            density,
            log_norm,
            support: (lo, hi),
            fisher_i: f64::NAN,
            sampler: Sampler::Exact(ExactSampler::Logistic),
        };
        model.fisher_i = fisher_moment(&model)?;
        model.sampler = match self.exact {
            Some(s) => Sampler::Exact(s),
            None => Sampler::Table(Arc::new(InverseCdfTable::build(|x| model.h(x), lo, hi))),
        };
        Ok(model)
    }
}

impl TargetModel1D {
    pub fn builder(name: impl Into<String>, density: impl LogDensity1D + 'static) -> TargetModelBuilder {
        TargetModelBuilder {
            name: name.into(),
            density: Arc::new(density),
            support: None,
            normalized: false,
            exact: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// `I = E_h[((log h)')²]`, measured at construction.
    pub fn fisher_i(&self) -> f64 {
        self.fisher_i
    }

    pub fn sampler_kind(&self) -> SamplerKind {
        match self.sampler {
            Sampler::Exact(_) => SamplerKind::Exact,
            Sampler::Table(_) => SamplerKind::InverseCdfTable,
        }
    }

    pub fn inverse_cdf_table(&self) -> Option<&InverseCdfTable> {
        match &self.sampler {
            Sampler::Table(t) => Some(t),
            Sampler::Exact(_) => None,
        }
    }

    pub fn log_h(&self, x: f64) -> f64 {
        self.density.log_density(x) - self.log_norm
    }

    pub fn dlog_h(&self, x: f64) -> f64 {
        self.density.dlog_density(x)
    }

    /// `(log h)''` by a central difference of the score.
    pub fn d2log_h(&self, x: f64) -> f64 {
        let e = fd_step(x);
        (self.dlog_h(x + e) - self.dlog_h(x - e)) / (2.0 * e)
    }

    pub fn h(&self, x: f64) -> f64 {
        exp(self.log_h(x))
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.sampler {
            Sampler::Exact(ExactSampler::Normal { sd }) => sd * rng.sample::<f64, _>(StandardNormal),
            Sampler::Exact(ExactSampler::Logistic) => {
                let u: f64 = rng.sample(Open01);
                ln(u) - ln(1.0 - u)
            }
            Sampler::Table(t) => t.quantile(rng.random::<f64>()),
        }
    }

    /// `n` i.i.d. draws from `h`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    pub fn fill_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = self.sample_one(rng);
        }
    }

    pub(crate) fn sum_log_h(&self, xs: &[f64]) -> f64 {
        self.density.sum_log_density(xs) - xs.len() as f64 * self.log_norm
    }

    pub(crate) fn grad_into(&self, xs: &[f64], out: &mut [f64]) {
        self.density.grad_into(xs, out)
    }
}

/// Finite-difference step `max(1e-5, 1e-5 |x|)`.
pub fn fd_step(x: f64) -> f64 {
    (1e-5 * abs(x)).max(1e-5)
}

/// `I = ∫ ((log h)')² h` by adaptive quadrature over the declared support.
pub fn fisher_moment(model: &TargetModel1D) -> Result<f64> {
    let (lo, hi) = model.support;
    quadrature::integrate(
        |x| {
            let h = model.h(x);
            if h == 0.0 {
                0.0
            } else {
                let s = model.dlog_h(x);
                s * s * h
            }
        },
        lo,
        hi,
        Tolerance::default(),
    )
    .map(|r| r.value)
    .map_err(|r| Error::Quadrature {
        density: model.name.clone(),
        estimate: r.value,
        error: r.error,
    })
}

/// Fisher moment by a fixed composite rule with `panels` panels; used to
/// check stability under node doubling.
pub fn fisher_moment_fixed(model: &TargetModel1D, panels: usize) -> f64 {
    let (lo, hi) = model.support;
    quadrature::gauss_legendre(
        |x| {
            let s = model.dlog_h(x);
            s * s * model.h(x)
        },
        lo,
        hi,
        panels,
    )
}

/// The integrability conditions used by the random-walk diffusion limit:
/// `∫ (h'/h)^8 h` and `∫ (h''/h)^4 h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentConditions {
    pub score_eighth: f64,
    pub curvature_fourth: f64,
}

impl MomentConditions {
    pub fn finite(&self) -> bool {
        self.score_eighth.is_finite() && self.curvature_fourth.is_finite()
    }
}

pub fn moment_conditions(model: &TargetModel1D) -> Result<MomentConditions> {
    let (lo, hi) = model.support;
    let fail = |r: quadrature::Integral| Error::Quadrature {
        density: model.name.clone(),
        estimate: r.value,
        error: r.error,
    };
    let tol = Tolerance {
        abs: 1e-10,
        rel: 1e-8,
        max_intervals: 4096,
    };
    let score_eighth = quadrature::integrate(
        |x| {
            let s2 = model.dlog_h(x) * model.dlog_h(x);
            s2 * s2 * s2 * s2 * model.h(x)
        },
        lo,
        hi,
        tol,
    )
    .map_err(fail)?
    .value;
    let curvature_fourth = quadrature::integrate(
        |x| {
            let s = model.dlog_h(x);
            let c = model.d2log_h(x) + s * s;
            c * c * c * c * model.h(x)
        },
        lo,
        hi,
        tol,
    )
    .map_err(fail)?
    .value;
    Ok(MomentConditions {
        score_eighth,
        curvature_fourth,
    })
}

/// Largest difference quotient of the score on an `n`-point grid over the
/// support: a numeric Lipschitz constant for `h'/h`.
pub fn score_lipschitz(model: &TargetModel1D, n: usize) -> f64 {
    let (lo, hi) = model.support;
    let step = (hi - lo) / (n.max(2) - 1) as f64;
    let mut prev = model.dlog_h(lo);
    let mut best: f64 = 0.0;
    for k in 1..n.max(2) {
        let s = model.dlog_h(lo + k as f64 * step);
        best = best.max(abs(s - prev) / step);
        prev = s;
    }
    best
}

/// The product target `π_d` built from `d` copies of a component.
#[derive(Debug, Clone)]
pub struct ProductTarget {
    component: TargetModel1D,
    dim: usize,
}

impl ProductTarget {
    pub fn new(component: TargetModel1D, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        Ok(ProductTarget { component, dim })
    }

    pub fn component(&self) -> &TargetModel1D {
        &self.component
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("position"));
        }
        Ok(())
    }

    /// `log π_d(x) = Σ log h(x_i)`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.component.sum_log_h(x))
    }

    /// `∇ log π_d(x)`, whose `i`-th entry is `(log h)'(x_i)`.
    pub fn grad_log_density(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut g = vec![0.0; self.dim];
        self.component.grad_into(x, &mut g);
        Ok(g)
    }

    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        self.component.sum_log_h(x)
    }

    pub(crate) fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        self.component.grad_into(x, out)
    }

    /// A point drawn from `π_d`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.component.sample(rng, self.dim)
    }
}

/// Names accepted by [`registry`].
pub const REGISTERED: [&str; 4] = ["std_normal", "scaled_normal", "logistic", "bimodal"];

pub fn normal(name: &str, sd: f64) -> Result<TargetModel1D> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::invalid("sd", "must be positive"));
    }
    TargetModel1D::builder(name, Normal { sd })
        .support(-8.0 * sd, 8.0 * sd)
        .normalized()
        .exact_sampler(ExactSampler::Normal { sd })
        .build()
}

/// Looks up a built-in component density.
///
/// * `std_normal`: `N(0, 1)`, the canonical target.
/// * `scaled_normal`: `N(0, 4)`.
/// * `logistic`: standard logistic, a non-Gaussian density with bounded,
///   Lipschitz score.
/// * `bimodal`: `½N(-2, 1) + ½N(2, 1)`, sampled from an inverse-CDF table.
pub fn registry(name: &str) -> Result<TargetModel1D> {
    match name {
        "std_normal" => normal("std_normal", 1.0),
        "scaled_normal" => normal("scaled_normal", 2.0),
        "logistic" => TargetModel1D::builder("logistic", Logistic)
            .support(-25.0, 25.0)
            .normalized()
            .exact_sampler(ExactSampler::Logistic)
            .build(),
        "bimodal" => TargetModel1D::builder("bimodal", NormalMixture { shift: 2.0 })
            .support(-10.0, 10.0)
            .normalized()
            .build(),
        other => Err(Error::UnknownTarget(other.to_string())),
    }
}
