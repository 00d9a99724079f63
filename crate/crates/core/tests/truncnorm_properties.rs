use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use verisim_core::gaussian1d::{conditional_variance, drift_map};
use verisim_core::truncnorm::{quadrature_moments, sample_truncated, shifted_moments, std_moments, Bounds};

fn random_bounds(rng: &mut ChaCha8Rng) -> Bounds {
    let lower = rng.gen_range(-8.0..8.0);
    match rng.gen_range(0..4) {
        0 => Bounds::new(f64::NEG_INFINITY, lower).unwrap(),
        1 => Bounds::new(lower, f64::INFINITY).unwrap(),
        _ => Bounds::new(lower, lower + rng.gen_range(0.05..6.0)).unwrap(),
    }
}

#[test]
fn closed_forms_match_the_quadrature_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let b = random_bounds(&mut rng);
        let closed = std_moments(b).unwrap();
        let oracle = quadrature_moments(b).unwrap();
        let err = (closed.m1 - oracle.m1)
            .abs()
            .max((closed.m2 - oracle.m2).abs())
            .max((closed.m3 - oracle.m3).abs());
        assert!(err < 1e-9, "{b:?}: {closed:?} vs {oracle:?}");
        worst = worst.max(err);
    }
    println!("worst componentwise error {worst:.2e}");
}

#[test]
fn oracle_agrees_on_narrow_and_deep_intervals() {
    for (lo, hi) in [
        (0.5, 0.5005),
        (-0.0001, 0.0003),
        (9.0, 9.01),
        (25.0, f64::INFINITY),
        (-3.0, 30.0),
    ] {
        let b = Bounds::new(lo, hi).unwrap();
        let closed = std_moments(b).unwrap();
        let oracle = quadrature_moments(b).unwrap();
        assert!((closed.m1 - oracle.m1).abs() < 1e-9, "{b:?}");
        assert!((closed.m2 - oracle.m2).abs() < 1e-9, "{b:?}");
        assert!((closed.m3 - oracle.m3).abs() < 1e-9, "{b:?}");
    }
}

#[test]
fn widening_the_interval_raises_the_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let centre: f64 = rng.gen_range(-3.0..3.0);
        let skew: f64 = rng.gen_range(0.2..1.8);
        let mut last = 0.0;
        for step in 1..40 {
            let w = 0.1 * step as f64;
            let b = Bounds::new(centre - w, centre + skew * w).unwrap();
            let m2 = std_moments(b).unwrap().m2;
            assert!(m2 > last && m2 < 1.0, "{b:?}: {m2} after {last}");
            last = m2;
        }
    }
}

#[test]
fn drift_map_derivative_is_the_conditional_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = rng.gen_range(-4.0..2.0);
        let b = Bounds::new(a, a + rng.gen_range(0.2..5.0)).unwrap();
        for _ in 0..50 {
            let x = rng.gen_range(-3.0..3.0) + 0.5 * (b.lower() + b.upper());
            let fd = (drift_map(b, x + h).unwrap() - drift_map(b, x - h).unwrap()) / (2.0 * h);
            let err = (fd - conditional_variance(b, x).unwrap()).abs();
            worst = worst.max(err);
        }
    }
    assert!(worst < 1e-6, "max error {worst:e}");
}

#[test]
fn sample_moments_match_the_closed_forms() {
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (lo, hi) in [
        (-1.0, 2.0),
        (0.0, f64::INFINITY),
        (3.5, f64::INFINITY),
        (-0.8, -0.79),
    ] {
        let b = Bounds::new(lo, hi).unwrap();
        let m = std_moments(b).unwrap();
        let draws = sample_truncated(b, n, &mut rng).unwrap();
        let nf = n as f64;
        let mean = draws.iter().sum::<f64>() / nf;
        let central = |k: i32| draws.iter().map(|z| (z - m.m1).powi(k)).sum::<f64>() / nf;
        let (c2, c3, c4, c6) = (central(2), central(3), central(4), central(6));
        let se1 = (m.m2 / nf).sqrt();
        let se2 = ((c4 - c2 * c2) / nf).sqrt();
        let se3 = ((c6 - c3 * c3) / nf).sqrt();
        assert!((mean - m.m1).abs() < 5.0 * se1, "{b:?} mean {mean} vs {}", m.m1);
        assert!((c2 - m.m2).abs() < 5.0 * se2, "{b:?} var {c2} vs {}", m.m2);
        assert!((c3 - m.m3).abs() < 5.0 * se3, "{b:?} third {c3} vs {}", m.m3);
    }
}

#[test]
fn sampler_examples() {
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let full = sample_truncated(Bounds::UNBOUNDED, n, &mut rng).unwrap();
    assert!((full.iter().sum::<f64>() / n as f64).abs() < 4.0 / (n as f64).sqrt());
    let half_normal = Bounds::new(0.0, f64::INFINITY).unwrap();
    let m2 = std_moments(half_normal).unwrap().m2;
    let draws = sample_truncated(half_normal, n, &mut rng).unwrap();
    let mean = draws.iter().sum::<f64>() / n as f64;
    assert!((mean - (2.0 / std::f64::consts::PI).sqrt()).abs() < 5.0 * (m2 / n as f64).sqrt());
}

proptest! {
    #[test]
    fn shifted_moments_are_affine(
        mu in -50.0..50.0f64,
        sigma in 0.01..20.0f64,
        a in -6.0..3.0f64,
        w in 0.01..6.0f64,
    ) {
        let (lo, hi) = (mu + sigma * a, mu + sigma * (a + w));
        let (mean, var) = shifted_moments(mu, sigma, lo, hi).unwrap();
        let m = std_moments(Bounds::new((lo - mu) / sigma, (hi - mu) / sigma).unwrap()).unwrap();
        prop_assert!((mean - (mu + sigma * m.m1)).abs() <= 1e-12 * (1.0 + mu.abs() + sigma));
        prop_assert!((var - sigma * sigma * m.m2).abs() <= 1e-12 * sigma * sigma);
    }

    #[test]
    fn moments_are_well_formed(a in -30.0..30.0f64, w in 1e-6..20.0f64) {
        let b = Bounds::new(a, a + w).unwrap();
        let m = std_moments(b).unwrap();
        prop_assert!(m.m1 >= a && m.m1 <= a + w);
        // wide intervals round m2 to exactly 1
        prop_assert!(m.m2 > 0.0 && m.m2 <= 1.0);
        prop_assert!(m.m2 <= w * w / 4.0 * (1.0 + 1e-9));
    }

    #[test]
    fn draws_stay_inside(a in -12.0..12.0f64, w in 1e-4..10.0f64, seed in any::<u64>()) {
        let b = Bounds::new(a, a + w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for z in sample_truncated(b, 64, &mut rng).unwrap() {
            prop_assert!(b.contains(z));
        }
    }
}
