//! Kantorovich–Rubinstein distance between empirical measures on the line.
//!
//! For probability measures the supremum of `|∫f dμ - ∫f dν|` over
//! functions with Lipschitz constant at most 1 and `|f| <= 1` equals the
//! Wasserstein-1 distance under the truncated metric `min(2, |x - y|)`.
//! Between two equal-weight samples of the same size an optimal coupling
//! can be taken to be a permutation, so the distance is the value of an
//! `n × n` assignment problem.
//!
//! The truncated cost is concave in `|x - y|`, so the sorted coupling is a
//! feasible upper bound but not always optimal.

mod assignment;
mod monotone;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::abs;
use crate::{Error, Result};

/// Threshold of the truncated metric.
pub const TRUNCATION: f64 = 2.0;

#[inline]
pub fn truncated_cost(x: f64, y: f64) -> f64 {
    abs(x - y).min(TRUNCATION)
}

/// Equal-weight sample on the real line, stored ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure1D {
    atoms: Vec<f64>,
}

impl EmpiricalMeasure1D {
    pub fn new(mut atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("empirical measure"));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("empirical measure"));
        }
        atoms.sort_unstable_by(f64::total_cmp);
        Ok(EmpiricalMeasure1D { atoms })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn into_atoms(self) -> Vec<f64> {
        self.atoms
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.atoms)
    }

    /// Average of `f` over the atoms.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|&a| f(a)).sum::<f64>() / self.atoms.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportMethod {
    /// Full assignment solve with a dual certificate.
    ExactAssignment,
    /// Cost of the sorted (monotone) coupling.
    SortedUpperBound,
    /// Best mean gap over a family of admissible test functions.
    DualLowerBound,
    /// Exact value from the banded monotone partial-matching recursion.
    MonotonePartialMatching,
}

impl TransportMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransportMethod::ExactAssignment => "exact-assignment",
            TransportMethod::SortedUpperBound => "sorted-upper-bound",
            TransportMethod::DualLowerBound => "dual-lower-bound",
            TransportMethod::MonotonePartialMatching => "monotone-partial-matching",
        }
    }
}

/// Potentials `u`, `v` with `u_i + v_j <= min(2, |x_i - y_j|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    /// Distance in `[0, 2]`.
    pub distance: f64,
    /// `matching[i] = j` pairs the `i`-th atom of `mu` with the `j`-th atom
    /// of `nu` (both in ascending order).
    pub matching: Vec<usize>,
    pub dual: Option<DualCertificate>,
    pub method: TransportMethod,
}

impl TransportResult {
    /// `|distance - (Σu + Σv)/n|`; zero up to rounding for exact solves.
    pub fn duality_gap(&self) -> Option<f64> {
        let d = self.dual.as_ref()?;
        let n = d.u.len() as f64;
        let dual_value = (d.u.iter().sum::<f64>() + d.v.iter().sum::<f64>()) / n;
        Some(abs(self.distance - dual_value))
    }

    /// Largest violation of `u_i + v_j <= c_ij` over all pairs.
    pub fn max_dual_violation(&self, mu: &EmpiricalMeasure1D, nu: &EmpiricalMeasure1D) -> Option<f64> {
        let d = self.dual.as_ref()?;
        let mut worst: f64 = 0.0;
        for (i, &x) in mu.atoms.iter().enumerate() {
            for (j, &y) in nu.atoms.iter().enumerate() {
                worst = worst.max(d.u[i] + d.v[j] - truncated_cost(x, y));
            }
        }
        Some(worst)
    }
}

fn same_size(mu: &EmpiricalMeasure1D, nu: &EmpiricalMeasure1D) -> Result<usize> {
    if mu.len() != nu.len() {
        return Err(Error::SizeMismatch {
            left: mu.len(),
            right: nu.len(),
        });
    }
    Ok(mu.len())
}

/// Exact distance by solving the assignment problem with cost
/// `min(2, |x_i - y_j|)`, returning the optimal matching and a dual
/// certificate. `O(n³)` in the worst case.
pub fn kr_distance(mu: &EmpiricalMeasure1D, nu: &EmpiricalMeasure1D) -> Result<TransportResult> {
    let n = same_size(mu, nu)?;
    let (x, y) = (&mu.atoms, &nu.atoms);
    let sol = assignment::solve(n, |i, j| truncated_cost(x[i], y[j]));
    let total: f64 = sol
        .row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| truncated_cost(x[i], y[j]))
        .sum();
    Ok(TransportResult {
        distance: total / n as f64,
        matching: sol.row_to_col,
        dual: Some(DualCertificate { u: sol.u, v: sol.v }),
        method: TransportMethod::ExactAssignment,
    })
}

/// Exact distance by the banded monotone partial-matching recursion.
///
/// Same value as [`kr_distance`] without the certificate; runs in
/// `O(n · U)` where `U` is the total sorted-coupling cost, which makes it
/// the workhorse for large, nearby samples.
pub fn kr_distance_monotone(mu: &EmpiricalMeasure1D, nu: &EmpiricalMeasure1D) -> Result<f64> {
    let n = same_size(mu, nu)?;
    Ok(monotone::optimal_total(&mu.atoms, &nu.atoms) / n as f64)
}

/// Cost of the sorted coupling, an upper bound on the distance.
pub fn kr_upper_bound_sorted(mu: &EmpiricalMeasure1D, nu: &EmpiricalMeasure1D) -> Result<f64> {
    let n = same_size(mu, nu)?;
    let total: f64 = mu
        .atoms
        .iter()
        .zip(&nu.atoms)
        .map(|(&a, &b)| truncated_cost(a, b))
        .sum();
    Ok(total / n as f64)
}

/// Piecewise-linear function through `knots`, constant beyond the end
/// knots. Construction checks membership in the 1-Lipschitz, `|f| <= 1`
/// class on the knots, which suffices for a piecewise-linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    knots: Vec<(f64, f64)>,
}

impl TestFunction {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Empty("test function knots"));
        }
        for (k, &(x, v)) in knots.iter().enumerate() {
            if !x.is_finite() || !v.is_finite() {
                return Err(Error::NonFinite("test function knots"));
            }
            if abs(v) > 1.0 + 1e-12 {
                return Err(Error::NotInLipschitzBall { knot: k });
            }
            if k > 0 {
                let (px, pv) = knots[k - 1];
                if x <= px || abs(v - pv) > (x - px) * (1.0 + 1e-12) {
                    return Err(Error::NotInLipschitzBall { knot: k });
                }
            }
        }
        Ok(TestFunction { knots })
    }

    /// `clamp(x - c, -1, 1)`.
    pub fn ramp(c: f64) -> Self {
        TestFunction {
            knots: vec![(c - 1.0, -1.0), (c + 1.0, 1.0)],
        }
    }

    /// `clamp(1 - |x - c|, -1, 1)`.
    pub fn tent(c: f64) -> Self {
        TestFunction {
            knots: vec![(c - 2.0, -1.0), (c, 1.0), (c + 2.0, -1.0)],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0].0 {
            return k[0].1;
        }
        let last = k[k.len() - 1];
        if x >= last.0 {
            return last.1;
        }
        let idx = k.partition_point(|p| p.0 <= x);
        let (x0, v0) = k[idx - 1];
        let (x1, v1) = k[idx];
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }
}

/// Ramps and tents centred on a 64-point quantile grid of the pooled
/// sample.
pub fn default_test_family(mu: &EmpiricalMeasure1D, nu: &EmpiricalMeasure1D) -> Vec<TestFunction> {
    let mut pooled: Vec<f64> = mu.atoms.iter().chain(&nu.atoms).copied().collect();
    pooled.sort_unstable_by(f64::total_cmp);
    let mut family = Vec::with_capacity(128);
    for k in 0..64 {
        let c = crate::stats::quantile_sorted(&pooled, (k as f64 + 0.5) / 64.0);
        family.push(TestFunction::ramp(c));
        family.push(TestFunction::tent(c));
    }
    family
}

/// Largest `|E_mu f - E_nu f|` over the family: a lower bound on the
/// distance.
pub fn kr_lower_bound_dual(
    mu: &EmpiricalMeasure1D,
    nu: &EmpiricalMeasure1D,
    family: &[TestFunction],
) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::Empty("test function family"));
    }
    Ok(family
        .iter()
        .map(|f| abs(mu.expect(|x| f.eval(x)) - nu.expect(|x| f.eval(x))))
        .fold(0.0, f64::max))
}

/// Bootstrap resample of `mu` to `n` atoms, with replacement.
pub fn resample_to<R: Rng + ?Sized>(
    mu: &EmpiricalMeasure1D,
    n: usize,
    rng: &mut R,
) -> Result<EmpiricalMeasure1D> {
    if n == 0 {
        return Err(Error::invalid("n", "resample size must be at least 1"));
    }
    let m = mu.len();
    let atoms = (0..n).map(|_| mu.atoms[rng.random_range(0..m)]).collect();
    EmpiricalMeasure1D::new(atoms)
}

/// Largest size accepted by [`kr_brute_force`].
pub const BRUTE_FORCE_MAX: usize = 8;

/// Minimum over all `n!` permutation couplings (`n <= 8`).
pub fn kr_brute_force(mu: &EmpiricalMeasure1D, nu: &EmpiricalMeasure1D) -> Result<f64> {
    let n = same_size(mu, nu)?;
    if n > BRUTE_FORCE_MAX {
        return Err(Error::invalid("n", "brute force supports at most 8 atoms"));
    }
    let (x, y) = (&mu.atoms, &nu.atoms);
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| -> f64 { p.iter().enumerate().map(|(i, &j)| truncated_cost(x[i], y[j])).sum() };
    let mut best = cost(&perm);
    // Heap's algorithm, iterative form
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: &[f64]) -> EmpiricalMeasure1D {
        EmpiricalMeasure1D::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_measures() {
        assert!(EmpiricalMeasure1D::new(vec![]).is_err());
        assert!(EmpiricalMeasure1D::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn unequal_sizes_are_a_contract_violation() {
        let e = kr_distance(&m(&[0.0]), &m(&[0.0, 1.0])).unwrap_err();
        assert_eq!(e, Error::SizeMismatch { left: 1, right: 2 });
        assert!(kr_distance_monotone(&m(&[0.0]), &m(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn identical_measures() {
        let a = m(&[0.3, -1.0, 4.0]);
        let r = kr_distance(&a, &a).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.matching, vec![0, 1, 2]);
        assert_eq!(kr_upper_bound_sorted(&a, &a).unwrap(), 0.0);
        assert_eq!(kr_distance_monotone(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_atoms() {
        assert!((kr_distance(&m(&[0.0]), &m(&[0.7])).unwrap().distance - 0.7).abs() < 1e-15);
        assert_eq!(kr_distance(&m(&[0.0]), &m(&[5.0])).unwrap().distance, 2.0);
        assert_eq!(kr_brute_force(&m(&[1.0]), &m(&[-0.5])).unwrap(), 1.5);
    }

    #[test]
    fn upper_bound_all_truncated() {
        assert_eq!(kr_upper_bound_sorted(&m(&[0.0, 0.0]), &m(&[3.0, 3.0])).unwrap(), 2.0);
    }

    #[test]
    fn swapped_multiset() {
        assert_eq!(kr_brute_force(&m(&[-1.0, 1.0]), &m(&[1.0, -1.0])).unwrap(), 0.0);
    }

    #[test]
    fn ramp_lower_bound_meets_exact() {
        let f = TestFunction::new(vec![(-1.0, -1.0), (1.0, 1.0)]).unwrap();
        let lb = kr_lower_bound_dual(&m(&[0.0]), &m(&[0.5]), &[f]).unwrap();
        assert!((lb - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_family_is_an_error() {
        assert!(kr_lower_bound_dual(&m(&[0.0]), &m(&[0.5]), &[]).is_err());
    }

    #[test]
    fn test_function_validation() {
        assert!(TestFunction::new(vec![(0.0, 0.0), (0.5, 0.9)]).is_err());
        assert!(TestFunction::new(vec![(0.0, 1.5)]).is_err());
        assert!(TestFunction::new(vec![(0.0, 0.0), (0.0, 0.0)]).is_err());
        let t = TestFunction::tent(1.0);
        assert_eq!(t.eval(1.0), 1.0);
        assert_eq!(t.eval(-5.0), -1.0);
        assert!((t.eval(2.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn brute_force_size_limit() {
        let a = m(&[0.0; 9]);
        assert!(kr_brute_force(&a, &a).is_err());
    }
}
