use mcmclab_core::math::normal_cdf;
use mcmclab_core::quadrature::{integrate, Tolerance};
use mcmclab_core::rng::stream;
use mcmclab_core::target::{
    fd_step, fisher_moment, fisher_moment_fixed, moment_conditions, normal, registry, score_lipschitz,
    ProductTarget, SamplerKind, REGISTERED,
};

fn std_normal(d: usize) -> ProductTarget {
    ProductTarget::new(registry("std_normal").unwrap(), d).unwrap()
}

// closed-form normal log density, written out independently of the crate
fn phi_log(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

#[test]
fn normal_log_density_values() {
    let v = std_normal(2).log_density(&[0.0, 0.0]).unwrap();
    assert!((v + 1.837_877_066_409_345_5).abs() < 1e-12);
    let v = ProductTarget::new(registry("std_normal").unwrap(), 1)
        .unwrap()
        .log_density(&[0.0])
        .unwrap();
    assert!((v + 0.918_938_533_204_672_7).abs() < 1e-12);
    let x = [1.0, -1.0, 2.0];
    let expected: f64 = x.iter().map(|&v| phi_log(v)).sum();
    let v = std_normal(3).log_density(&x).unwrap();
    assert!((v - expected).abs() < 1e-12);
    assert!((v + 5.756_815_599_614_018).abs() < 1e-12);
}

#[test]
fn product_of_equal_coordinates() {
    for name in REGISTERED {
        let m = registry(name).unwrap();
        let t = ProductTarget::new(m.clone(), 7).unwrap();
        for &x in &[-1.3, 0.0, 0.4, 2.2] {
            let all = t.log_density(&[x; 7]).unwrap();
            assert!((all - 7.0 * m.log_h(x)).abs() <= 1e-12 * all.abs().max(1.0), "{name}");
        }
    }
}

#[test]
fn gradients() {
    assert_eq!(std_normal(2).grad_log_density(&[1.0, -2.0]).unwrap(), vec![-1.0, 2.0]);
    for name in ["std_normal", "scaled_normal", "logistic"] {
        let t = ProductTarget::new(registry(name).unwrap(), 3).unwrap();
        assert!(t.grad_log_density(&[0.0; 3]).unwrap().iter().all(|&g| g == 0.0), "{name}");
    }
    let t = ProductTarget::new(registry("logistic").unwrap(), 3).unwrap();
    let x = [0.5, -1.5, 3.0];
    let g = t.grad_log_density(&x).unwrap();
    for i in 0..3 {
        let e = fd_step(x[i]);
        let (mut up, mut dn) = (x, x);
        up[i] += e;
        dn[i] -= e;
        let fd = (t.log_density(&up).unwrap() - t.log_density(&dn).unwrap()) / (2.0 * e);
        assert!((fd - g[i]).abs() < 1e-5);
    }
}

#[test]
fn registered_models_are_normalised() {
    for name in REGISTERED {
        let m = registry(name).unwrap();
        let (lo, hi) = m.support();
        let mass = integrate(|x| m.h(x), lo, hi, Tolerance::default()).unwrap().value;
        assert!((mass - 1.0).abs() < 1e-6, "{name}: {mass}");
    }
}

#[test]
fn score_matches_finite_differences_at_quadrature_nodes() {
    for name in REGISTERED {
        let m = registry(name).unwrap();
        let (lo, hi) = m.support();
        // 20 panels of a 5-point Gauss rule
        let nodes = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
        let w = (hi - lo) / 20.0;
        for p in 0..20 {
            for &z in &nodes {
                let x = lo + w * (p as f64 + 0.5 + 0.5 * z);
                let e = fd_step(x);
                let fd = (m.log_h(x + e) - m.log_h(x - e)) / (2.0 * e);
                let s = m.dlog_h(x);
                assert!((fd - s).abs() <= 1e-5 * s.abs().max(1.0), "{name} at {x}: {fd} vs {s}");
            }
        }
    }
}

#[test]
fn fisher_moments() {
    assert!((registry("std_normal").unwrap().fisher_i() - 1.0).abs() < 1e-10);
    for sd in [0.5, 2.0, 3.0] {
        let m = normal("n", sd).unwrap();
        assert!((fisher_moment(&m).unwrap() - 1.0 / (sd * sd)).abs() < 1e-9 / (sd * sd));
    }
    // logistic: I = 1/3
    assert!((registry("logistic").unwrap().fisher_i() - 1.0 / 3.0).abs() < 1e-9);
    for name in REGISTERED {
        let m = registry(name).unwrap();
        let q = fisher_moment(&m).unwrap();
        assert!((q - m.fisher_i()).abs() <= 1e-4 * q);
        let coarse = fisher_moment_fixed(&m, 200);
        let fine = fisher_moment_fixed(&m, 400);
        assert!((coarse - fine).abs() <= 1e-4 * fine, "{name}: {coarse} vs {fine}");
    }
}

#[test]
fn moment_conditions_hold_for_registry() {
    for name in REGISTERED {
        assert!(moment_conditions(&registry(name).unwrap()).unwrap().finite(), "{name}");
    }
}

#[test]
fn logistic_score_is_half_lipschitz() {
    let l = score_lipschitz(&registry("logistic").unwrap(), 20_001);
    assert!(l <= 0.5 + 1e-6 && l > 0.49, "{l}");
}

#[test]
fn normal_sampling_clt() {
    let m = registry("std_normal").unwrap();
    let n = 1_000_000;
    let xs = m.sample(&mut stream(11, &[1]), n);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    // sd of the sample variance is sqrt(2/n)
    assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
}

#[test]
fn single_draw_is_reproducible() {
    let m = registry("bimodal").unwrap();
    let a = m.sample(&mut stream(5, &[9]), 1);
    let b = m.sample(&mut stream(5, &[9]), 1);
    assert_eq!(a, b);
}

fn mixture_cdf(x: f64) -> f64 {
    0.5 * normal_cdf(x + 2.0) + 0.5 * normal_cdf(x - 2.0)
}

#[test]
fn bimodal_table_matches_closed_form_cdf() {
    let m = registry("bimodal").unwrap();
    assert_eq!(m.sampler_kind(), SamplerKind::InverseCdfTable);
    let table = m.inverse_cdf_table().unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..20_000 {
        let x = -10.0 + 20.0 * k as f64 / 20_000.0;
        worst = worst.max((table.cdf().eval(x) - mixture_cdf(x)).abs());
    }
    assert!(worst <= 1e-6, "cdf sup error {worst}");
    let mut worst: f64 = 0.0;
    for k in 1..10_000 {
        let u = k as f64 / 10_000.0;
        worst = worst.max((mixture_cdf(table.quantile(u)) - u).abs());
    }
    assert!(worst <= 1e-6, "quantile error {worst}");
}

#[test]
fn bimodal_sample_ks() {
    let m = registry("bimodal").unwrap();
    let n = 1_000_000;
    let mut xs = m.sample(&mut stream(3, &[4]), n);
    xs.sort_by(f64::total_cmp);
    let mut ks: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = mixture_cdf(x);
        ks = ks.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
    }
    assert!(ks <= 2e-3, "KS {ks}");
}
