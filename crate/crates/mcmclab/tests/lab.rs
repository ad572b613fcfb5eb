use mcmclab::lab::{
    acceptance_sweep, calibrate_ell, convergence_time, crossing_time, distance_curve, fit_power_law,
    monotonicity_violations, noise_floor, resolve_ell, stationarity_check, weak_limit_comparison, Budget, EllRule,
    MALA_TARGET_ACCEPTANCE,
};
use mcmclab_core::kernels::{Algorithm, ChainSpec, Start};
use mcmclab_core::target::{registry, ProductTarget};

fn rwm(d: usize, ell: f64, seed: u64) -> ChainSpec {
    let target = ProductTarget::new(registry("std_normal").unwrap(), d).unwrap();
    ChainSpec::new(Algorithm::Rwm, target, ell, seed, Start::FromPi).unwrap()
}

fn budget(starts: usize, replicas: usize, reference: usize) -> Budget {
    Budget {
        starts,
        replicas,
        reference,
        ..Budget::SMALL
    }
}

/// `E min(2, |X - Y|)` for independent standard normals, by Simpson's rule
/// on the density of `|X - Y| = √2 |Z|`.
fn expected_truncated_gap() -> f64 {
    let f = |z: f64| (2f64).min(2f64.sqrt() * z) * 2.0 * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (a, b, n) = (0.0, 12.0, 20_000);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn distance_at_time_zero_matches_closed_form() {
    // with no steps every replica sits on its start, so each start's
    // distance is the mean truncated gap to the reference draws
    let curve = distance_curve(&rwm(2, 1.0, 11), &[0.0, 1.0], &budget(512, 32, 4096)).unwrap();
    assert_eq!(curve.iterations[0], 0);
    let oracle = expected_truncated_gap();
    // closed form 2√2(φ(0) - φ(√2)) + 4(1 - Φ(√2)), with 1 - Φ(√2) = erfc(1)/2
    let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let closed = 2.0 * 2f64.sqrt() * phi0 * (1.0 - (-1f64).exp()) + 2.0 * 0.157_299_207_050_285_13;
    assert!((oracle - closed).abs() < 1e-7, "{oracle} vs {closed}");
    assert!((curve.dist_hat[0] - oracle).abs() < 0.06, "{} vs {oracle}", curve.dist_hat[0]);
    assert!(curve.acceptance_rate.is_some());
}

#[test]
fn long_runs_reach_the_noise_floor() {
    let b = budget(8, 256, 4096);
    let curve = distance_curve(&rwm(4, 2.38, 5), &[0.5, 64.0], &b).unwrap();
    let last = *curve.dist_hat.last().unwrap();
    assert!(last <= curve.noise_floor.level(), "{last} vs floor {}", curve.noise_floor.level());
    assert!(curve.dist_hat[0] > last);
}

#[test]
fn curves_are_monotone_within_bands() {
    for seed in [1, 2] {
        let curve = distance_curve(&rwm(16, 2.38, seed), &[0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0], &Budget::SMALL).unwrap();
        assert!(monotonicity_violations(&curve).is_empty(), "{:?}", curve.dist_hat);
        assert!(curve.band.iter().all(|b| *b >= 0.0));
    }
}

#[test]
fn curve_shapes() {
    let spec = rwm(6, 2.0, 3);
    let b = budget(4, 16, 128);
    let curve = distance_curve(&spec, &[0.5, 1.0, 2.0], &b).unwrap();
    assert_eq!(curve.per_start.len(), 4);
    assert!(curve.per_start.iter().all(|r| r.len() == 3));
    assert_eq!(curve.bootstrap.len(), mcmclab::lab::BAND_REPLICATES);
    assert_eq!(curve.iterations, vec![3, 6, 12]);
    assert!(distance_curve(&spec, &[1.0, 0.5], &b).is_err());
    assert!(distance_curve(&spec, &[], &b).is_err());
    assert!(distance_curve(&spec, &[1.0], &budget(4, 1, 128)).is_err());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let spec = rwm(8, 2.38, 17);
    let b = budget(6, 64, 512);
    let grid = [0.25, 1.0, 4.0];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| distance_curve(&spec, &grid, &b).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn crossing_interpolates_in_iterations() {
    let its = [10, 20, 40];
    assert_eq!(crossing_time(&its, &[0.5, 0.3, 0.1], 0.2), Some(30.0));
    assert_eq!(crossing_time(&its, &[0.1, 0.05, 0.01], 0.2), Some(10.0));
    assert_eq!(crossing_time(&its, &[0.5, 0.4, 0.3], 0.2), None);
    // the crossing is the first one, even if the curve dips early
    assert_eq!(crossing_time(&its, &[0.5, 0.1, 0.3], 0.3), Some(15.0));
}

#[test]
fn power_law_fit_recovers_exponents() {
    let dims = [8, 16, 32, 64, 128];
    for b in [1.0, 1.0 / 3.0, 0.5] {
        let t: Vec<f64> = dims.iter().map(|&d| 7.0 * (d as f64).powf(b)).collect();
        let (slope, intercept) = fit_power_law(&dims, &t).unwrap();
        assert!((slope - b).abs() < 1e-12);
        assert!((intercept - 7f64.ln()).abs() < 1e-12);
    }
    assert!(fit_power_law(&[8, 16], &[1.0, 0.0]).is_none());
}

#[test]
fn sweep_rejects_short_grids_and_tracks_acceptance() {
    let spec = rwm(20, 1.0, 4);
    assert!(acceptance_sweep(&spec, &[2.38], 100).is_err());
    let grid = [0.2, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 10.0];
    let sweep = acceptance_sweep(&spec, &grid, 4000).unwrap();
    assert_eq!(sweep.rows.len(), grid.len());
    for w in sweep.rows.windows(2) {
        assert!(w[1].acceptance <= w[0].acceptance + 0.02);
    }
    assert!((sweep.rows[0].proxy - 20.0 * sweep.rows[0].esjd).abs() < 1e-12);
    assert!(sweep.argmax > 0 && sweep.argmax < grid.len() - 1);
}

#[test]
fn weak_limit_at_time_zero_is_exact() {
    let c = registry("std_normal").unwrap();
    let check = weak_limit_comparison(Algorithm::Rwm, &c, &[4, 16], 2.38, 0.0, 1.25, None, 64, 2).unwrap();
    for r in &check.rows {
        assert_eq!(r.iterations, 0);
        assert_eq!(r.kr, 0.0);
    }
    assert!(weak_limit_comparison(Algorithm::Mala, &c, &[4], 1.0, 1.0, 0.0, None, 64, 2).is_err());
}

#[test]
fn stationarity_holds_at_every_probe() {
    let rows = stationarity_check(&rwm(8, 2.38, 21), 512, &[0, 5, 50]).unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!(r.within_floor(), "{r:?}");
    }
}

#[test]
fn noise_floor_shrinks_with_sample_size() {
    let c = registry("std_normal").unwrap();
    let small = noise_floor(&c, None, 64, 1).unwrap();
    let large = noise_floor(&c, None, 4096, 1).unwrap();
    assert!(large.level() < small.level());
    // √n-scaling, loosely
    let ratio = small.mean / large.mean;
    assert!(ratio > 5.0 && ratio < 11.0, "{ratio}");
}

#[test]
fn scale_rules() {
    let normal = ProductTarget::new(registry("std_normal").unwrap(), 10).unwrap();
    let (l, acc) = resolve_ell(EllRule::Auto, Algorithm::Rwm, &normal, 1).unwrap();
    assert!((l - 2.38).abs() < 0.01 && acc.is_none());
    // Fisher moment 1/4 doubles the optimal scale
    let wide = ProductTarget::new(registry("scaled_normal").unwrap(), 10).unwrap();
    let (lw, _) = resolve_ell(EllRule::Auto, Algorithm::Rwm, &wide, 1).unwrap();
    assert!((lw - 2.0 * l).abs() < 0.01);
    assert_eq!(resolve_ell(EllRule::Fixed(0.7), Algorithm::Mala, &normal, 1).unwrap(), (0.7, None));
}

#[test]
fn mala_calibration_hits_its_target() {
    let target = ProductTarget::new(registry("std_normal").unwrap(), 32).unwrap();
    let c = calibrate_ell(Algorithm::Mala, &target, MALA_TARGET_ACCEPTANCE, 9).unwrap();
    assert!((c.acceptance - MALA_TARGET_ACCEPTANCE).abs() <= 0.01, "{c:?}");
    let again = calibrate_ell(Algorithm::Mala, &target, MALA_TARGET_ACCEPTANCE, 9).unwrap();
    assert_eq!(c, again);
}

#[test]
fn diffusion_time_collapses_dimensions() {
    // on the sped-up clock RWM curves for different d nearly coincide
    let grid = [0.5, 1.0, 2.0];
    let b = budget(16, 256, 4096);
    let c32 = distance_curve(&rwm(32, 2.38, 8), &grid, &b).unwrap();
    let c64 = distance_curve(&rwm(64, 2.38, 8), &grid, &b).unwrap();
    for (j, t) in grid.iter().enumerate() {
        let gap = (c32.dist_hat[j] - c64.dist_hat[j]).abs();
        assert!(gap <= c32.band[j] + c64.band[j] + 0.03, "t={t}: {gap}");
    }
    let t32 = convergence_time(&c32, 0.4).unwrap();
    let t64 = convergence_time(&c64, 0.4).unwrap();
    let ratio = t64 / t32;
    assert!(ratio > 1.4 && ratio < 2.8, "{ratio}");
}
