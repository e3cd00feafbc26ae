//! Descriptive statistics against a brute-force oracle: sorted samples,
//! direct formulas, n-1 standard deviation, linear-interpolation
//! quartiles.

use asf_core::nlp::stats;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Independent reference: everything recomputed from scratch on the
/// sorted sample.
fn oracle(samples: &[f64]) -> (f64, f64, f64, f64, f64, f64, f64) {
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mean = sorted.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    let percentile = |p: f64| {
        let rank = p * (n as f64 - 1.0);
        let lo = rank.floor() as usize;
        let frac = rank - lo as f64;
        if lo + 1 < n {
            sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
        } else {
            sorted[lo]
        }
    };
    (
        mean,
        std,
        sorted[0],
        percentile(0.25),
        percentile(0.50),
        percentile(0.75),
        sorted[n - 1],
    )
}

#[test]
fn stats_agree_with_bruteforce_oracle_to_1e9() {
    let started = std::time::Instant::now();
    let mut rng = StdRng::seed_from_u64(1234);
    for round in 0..100 {
        let n = rng.random_range(1..=1000);
        let samples: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let got = stats(&samples).unwrap();
        let (mean, std, min, q25, q50, q75, max) = oracle(&samples);
        assert_eq!(got.count, n);
        assert!((got.mean - mean).abs() < 1e-9, "round {round} mean");
        assert!((got.std - std).abs() < 1e-9, "round {round} std");
        assert!((got.min - min).abs() < 1e-9, "round {round} min");
        assert!((got.q25 - q25).abs() < 1e-9, "round {round} q25");
        assert!((got.q50 - q50).abs() < 1e-9, "round {round} q50");
        assert!((got.q75 - q75).abs() < 1e-9, "round {round} q75");
        assert!((got.max - max).abs() < 1e-9, "round {round} max");
    }
    assert!(started.elapsed() < std::time::Duration::from_secs(5));
}

#[test]
fn stat_order_invariants_hold_on_random_samples() {
    let mut rng = StdRng::seed_from_u64(77);
    for _ in 0..200 {
        let n = rng.random_range(1..=50);
        let samples: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let s = stats(&samples).unwrap();
        assert!(s.min <= s.q25);
        assert!(s.q25 <= s.q50);
        assert!(s.q50 <= s.q75);
        assert!(s.q75 <= s.max);
        assert!(s.min <= s.mean && s.mean <= s.max);
        assert!(s.std >= 0.0);
    }
}
