use mcmclab_core::kernels::{
    draw_start, ensemble_run, log_proposal_density, mala_log_ratio, run_chain, rwm_log_ratio, speedup_index,
    Algorithm, Chain, ChainSpec, Start,
};
use mcmclab_core::kr::{kr_distance_monotone, EmpiricalMeasure1D};
use mcmclab_core::rng::stream;
use mcmclab_core::stats::{mean, std_dev};
use mcmclab_core::target::{registry, ProductTarget};
use proptest::prelude::*;
use rand::Rng;
use std::sync::LazyLock;

// building the bimodal inverse-CDF table is not free; share one copy
static BIMODAL: LazyLock<ProductTarget> = LazyLock::new(|| ProductTarget::new(registry("bimodal").unwrap(), 1).unwrap());

fn normal_target(d: usize) -> ProductTarget {
    ProductTarget::new(registry("std_normal").unwrap(), d).unwrap()
}

fn spec(algorithm: Algorithm, d: usize, ell: f64, seed: u64) -> ChainSpec {
    ChainSpec::new(algorithm, normal_target(d), ell, seed, Start::FromPi).unwrap()
}

// Gaussian log density with every constant kept, independent of the crate.
fn gauss_log(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (x - mean) * (x - mean) / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
}

#[test]
fn rwm_ratio_closed_form() {
    let r = rwm_log_ratio(&normal_target(2), &[0.0, 0.0], &[1.0, 1.0]).unwrap();
    assert!((r + 1.0).abs() < 1e-14);
    assert!((r.exp() - 0.367_879_441_171_442_3).abs() < 1e-14);
}

#[test]
fn langevin_proposal_mean() {
    // the proposal density peaks at z + (σ²/2)(-z) = 0.75 for z = 1, σ² = 0.5
    assert_eq!(log_proposal_density(&[1.0], &[-1.0], &[0.75], 0.5), 0.0);
    assert!(log_proposal_density(&[1.0], &[-1.0], &[0.7], 0.5) < 0.0);
}

#[test]
fn mala_single_example_two_ways() {
    let t = normal_target(1);
    let (z, y, var) = (1.0, 0.5, 0.5);
    let formula = mala_log_ratio(&t, &[z], &[y], var).unwrap();
    let direct = gauss_log(y, 0.0, 1.0) - gauss_log(z, 0.0, 1.0) + gauss_log(z, y - 0.5 * var * y, var)
        - gauss_log(y, z - 0.5 * var * z, var);
    assert!((formula - direct).abs() < 1e-12);
}

#[test]
fn mala_ratio_matches_four_terms_on_random_triples() {
    let t = normal_target(1);
    let mut rng = stream(2024, &[]);
    for _ in 0..1000 {
        let z: f64 = rng.random_range(-4.0..4.0);
        let y: f64 = rng.random_range(-4.0..4.0);
        let var: f64 = rng.random_range(0.01..3.0);
        let formula = mala_log_ratio(&t, &[z], &[y], var).unwrap();
        let direct = gauss_log(y, 0.0, 1.0) - gauss_log(z, 0.0, 1.0) + gauss_log(z, y - 0.5 * var * y, var)
            - gauss_log(y, z - 0.5 * var * z, var);
        assert!((formula - direct).abs() < 1e-12, "{z} {y} {var}");
    }
}

#[test]
fn zero_drift_reduces_to_random_walk() {
    let (a, b) = ([0.3, -1.2], [1.1, 0.4]);
    let f = log_proposal_density(&a, &[0.0, 0.0], &b, 0.7);
    let r = log_proposal_density(&b, &[0.0, 0.0], &a, 0.7);
    assert_eq!(f, r);
}

#[test]
fn runs_are_deterministic() {
    for algo in [Algorithm::Rwm, Algorithm::Mala] {
        let s = spec(algo, 10, 1.5, 99);
        let a = run_chain(&s, 500, &[0, 10, 250, 500]).unwrap();
        let b = run_chain(&s, 500, &[0, 10, 250, 500]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.len(), 4);
    }
}

#[test]
fn rwm_acceptance_near_optimum() {
    let run = run_chain(&spec(Algorithm::Rwm, 50, 2.38, 1), 100_000, &[]).unwrap();
    let a = run.acceptance_rate().unwrap();
    assert!((a - 0.234).abs() < 0.02, "{a}");
}

#[test]
fn mala_scale_with_target_acceptance_exists() {
    let rates: Vec<f64> = [0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0]
        .iter()
        .map(|&l| run_chain(&spec(Algorithm::Mala, 50, l, 3), 20_000, &[]).unwrap().acceptance_rate().unwrap())
        .collect();
    assert!(rates.iter().any(|a| (a - 0.574).abs() < 0.05), "{rates:?}");
}

#[test]
fn rwm_acceptance_decreases_in_ell() {
    let n = 20_000;
    let rates: Vec<f64> = [0.5, 1.0, 2.0, 3.0, 4.0, 6.0]
        .iter()
        .map(|&l| run_chain(&spec(Algorithm::Rwm, 20, l, 5), n, &[]).unwrap().acceptance_rate().unwrap())
        .collect();
    // binomial-style band, generous for chain autocorrelation
    let band = 10.0 * (0.25 / n as f64).sqrt();
    for w in rates.windows(2) {
        assert!(w[1] < w[0] + band, "{rates:?}");
    }
    assert!(rates[0] > rates[5] + 0.3);
}

#[test]
fn time_zero_ensemble_is_the_start() {
    let s = spec(Algorithm::Rwm, 4, 1.0, 8);
    let start = draw_start(&s, 0).unwrap();
    let e = ensemble_run(&s, std::slice::from_ref(&start), 2, &[0.0]).unwrap();
    assert_eq!(e.measures[0][0].atoms(), &[start[0], start[0]]);
    assert_eq!(e, ensemble_run(&s, &[start], 2, &[0.0]).unwrap());
}

#[test]
fn ensemble_preconditions() {
    let s = spec(Algorithm::Rwm, 4, 1.0, 8);
    let start = draw_start(&s, 0).unwrap();
    assert!(ensemble_run(&s, &[], 2, &[0.0]).is_err());
    assert!(ensemble_run(&s, std::slice::from_ref(&start), 1, &[0.0]).is_err());
    assert!(ensemble_run(&s, &[start], 2, &[1.0, 0.5]).is_err());
}

// Two independent reference samples of size n: mean + 3 sd of their distance.
fn reference_noise_floor(n: usize) -> f64 {
    let h = registry("std_normal").unwrap();
    let d: Vec<f64> = (0..32)
        .map(|b| {
            let a = EmpiricalMeasure1D::new(h.sample(&mut stream(77, &[b, 0]), n)).unwrap();
            let c = EmpiricalMeasure1D::new(h.sample(&mut stream(77, &[b, 1]), n)).unwrap();
            kr_distance_monotone(&a, &c).unwrap()
        })
        .collect();
    mean(&d) + 3.0 * std_dev(&d)
}

#[test]
fn chains_started_in_stationarity_stay_there() {
    let n = 1024;
    let floor = reference_noise_floor(n);
    let h = registry("std_normal").unwrap();
    for algo in [Algorithm::Rwm, Algorithm::Mala] {
        let s = spec(algo, 10, 1.5, 41);
        let starts: Vec<Vec<f64>> = (0..n / 2).map(|k| draw_start(&s, k).unwrap()).collect();
        let e = ensemble_run(&s, &starts, 2, &[0.5, 2.0]).unwrap();
        for j in 0..2 {
            let pooled: Vec<f64> = e.measures.iter().flat_map(|m| m[j].atoms().to_vec()).collect();
            let reference = EmpiricalMeasure1D::new(h.sample(&mut stream(13, &[j as u64]), n)).unwrap();
            let d = kr_distance_monotone(&EmpiricalMeasure1D::new(pooled).unwrap(), &reference).unwrap();
            assert!(d <= floor, "{algo:?} t-index {j}: {d} > {floor}");
        }
    }
}

#[test]
fn chain_helper_matches_run_chain() {
    let s = spec(Algorithm::Mala, 6, 1.1, 17);
    let run = run_chain(&s, 300, &[300]).unwrap();
    let mut c = Chain::new(&s, draw_start(&s, 0).unwrap(), stream(17, &[2, 0, 0])).unwrap();
    c.advance_to(300);
    assert_eq!(run.trace[0].1, c.state().first_coordinate());
}

proptest! {
    #[test]
    fn rwm_ratio_is_antisymmetric(z in prop::collection::vec(-5.0..5.0f64, 3), y in prop::collection::vec(-5.0..5.0f64, 3)) {
        let t = ProductTarget::new(registry("logistic").unwrap(), 3).unwrap();
        let f = rwm_log_ratio(&t, &z, &y).unwrap();
        let b = rwm_log_ratio(&t, &y, &z).unwrap();
        prop_assert!((f + b).abs() < 1e-12);
    }

    #[test]
    fn mala_ratio_is_antisymmetric(z in -4.0..4.0f64, y in -4.0..4.0f64, var in 0.05..2.0f64) {
        let f = mala_log_ratio(&BIMODAL, &[z], &[y], var).unwrap();
        let b = mala_log_ratio(&BIMODAL, &[y], &[z], var).unwrap();
        prop_assert!((f + b).abs() < 1e-10);
    }

    #[test]
    fn speedup_index_is_monotone(d in 2usize..5000, t1 in 0.0..50.0f64, t2 in 0.0..50.0f64) {
        for algo in [Algorithm::Rwm, Algorithm::Mala] {
            let (a, b) = (t1.min(t2), t1.max(t2));
            prop_assert!(speedup_index(algo, d, a).unwrap() <= speedup_index(algo, d, b).unwrap());
        }
    }

    #[test]
    fn speedup_index_exact_on_integer_products(d in 2usize..10_000, k in 0u64..1000) {
        prop_assert_eq!(speedup_index(Algorithm::Rwm, d, k as f64).unwrap(), d as u64 * k);
        let c = (d as f64).cbrt().round() as usize;
        if c * c * c == d {
            prop_assert_eq!(speedup_index(Algorithm::Mala, d, k as f64).unwrap(), c as u64 * k);
        }
    }
}
