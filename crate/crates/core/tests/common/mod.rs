//! Shared helpers for integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sysrisk_core::EmpiricalDistribution;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// `n x d` standard normal draws, row-major.
pub fn normal_values(rng: &mut ChaCha20Rng, n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn normal_dist(seed: u64, n: usize, d: usize) -> Arc<EmpiricalDistribution> {
    Arc::new(EmpiricalDistribution::new(normal_values(&mut rng(seed), n, d), d).unwrap())
}

/// Left-continuous empirical quantile by full sort.
pub fn sorted_quantile(xs: &[f64], alpha: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = ((alpha * v.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    v[m.min(v.len()) - 1]
}

/// Expectile by bisection on the first-order condition over a wide bracket.
pub fn expectile_oracle(xs: &[f64], tau: f64) -> f64 {
    let foc = |e: f64| {
        let mut s = 0.0;
        for &x in xs {
            s += if x > e { tau * (x - e) } else { -(1.0 - tau) * (e - x) };
        }
        s
    };
    let (mut lo, mut hi) = (-1e3, 1e3);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if foc(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Expected shortfall at level `alpha` of `-X` computed from the sorted tail.
pub fn es_oracle(xs: &[f64], alpha: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mass = alpha * n;
    let full = mass.floor() as usize;
    let mut s: f64 = v[..full].iter().sum();
    let frac = mass - full as f64;
    if frac > 0.0 {
        s += frac * v[full];
    }
    -s / mass
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Pairs of dyadic rationals on a coarse lattice, for exact floating-point identities.
pub fn dyadic(rng: &mut ChaCha20Rng, d: usize) -> Vec<f64> {
    use rand::Rng;
    (0..d).map(|_| rng.random_range(-64i32..=64) as f64 / 8.0).collect()
}
