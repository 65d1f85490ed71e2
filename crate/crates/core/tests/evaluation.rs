//! Diebold-Mariano tests, Murphy diagrams, zones and the identification backtest.

mod common;

use common::{normal_dist, normal_values, rng};
use proptest::prelude::*;
use sysrisk_core::evaluation::{dm_test, identification_backtest, murphy};
use sysrisk_core::{Aggregation, ScalarRiskMeasure, SystemicMeasure, UpperSet, Zone};

/// Standard normal CDF by composite Simpson integration of the density.
fn phi_oracle(x: f64) -> f64 {
    let n = 20_000;
    let (a, b) = (-12.0, x);
    let h = (b - a) / n as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn var_l1() -> SystemicMeasure {
    SystemicMeasure::new(ScalarRiskMeasure::var(0.05).unwrap(), Aggregation::weighted_pos_neg(0.75).unwrap())
}

#[test]
fn dm_statistic_on_a_constructed_sample() {
    let mut raw = normal_values(&mut rng(51), 250, 1);
    let n = raw.len() as f64;
    let m = raw.iter().sum::<f64>() / n;
    let sd = (raw.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt();
    raw.iter_mut().for_each(|x| *x = (*x - m) / sd + 0.1);
    let r = dm_test(&raw).unwrap();
    assert!((r.statistic - 250f64.sqrt() * 0.1).abs() < 1e-9);
    assert!((r.statistic - 1.5811).abs() < 1e-4);
    assert!((r.p_high - (1.0 - phi_oracle(r.statistic))).abs() < 1e-9);
    assert!((r.p_high - 0.0569).abs() < 1e-4);
    assert!((r.p_low + r.p_high - 1.0).abs() < 1e-12);
}

#[test]
fn dm_degenerate_and_constant() {
    let zero = dm_test(&[0.0; 10]).unwrap();
    assert!(zero.degenerate);
    assert_eq!(Zone::classify(&zero, 0.05), Zone::Grey);
    let pos = dm_test(&[0.2; 10]).unwrap();
    assert!(!pos.degenerate && pos.rejects_f1_le_f2(1e-300) && !pos.rejects_f1_ge_f2(0.99));
    assert!(dm_test(&[1.0]).is_err());
}

#[test]
fn murphy_identical_forecasters_are_grey() {
    let m = var_l1();
    let grid: Vec<Vec<f64>> = (0..25).map(|i| vec![-3.0 + 0.25 * i as f64, 1.0]).collect();
    let obs: Vec<Vec<f64>> = normal_values(&mut rng(52), 40, 2).chunks(2).map(<[f64]>::to_vec).collect();
    let f = vec![UpperSet::half_space(vec![1.0, 1.0], 0.5).unwrap(); obs.len()];
    let g = murphy(&m, &grid, &f, &f, &obs, 0.05).unwrap();
    assert!(g.zones.iter().all(|&z| z == Zone::Grey));
    assert!(g.diff.iter().all(|&d| d == 0.0));
}

#[test]
fn murphy_truth_dominates() {
    let m = var_l1();
    let grid: Vec<Vec<f64>> = (0..21).flat_map(|i| (0..21).map(move |j| vec![-5.0 + 0.5 * i as f64, -5.0 + 0.5 * j as f64])).collect();
    let obs: Vec<Vec<f64>> = normal_values(&mut rng(53), 60, 2).chunks(2).map(<[f64]>::to_vec).collect();
    let truth: Vec<UpperSet> = obs.iter().map(|y| m.point_mass_set(y).unwrap()).collect();
    let other = vec![UpperSet::half_space(vec![1.0, 1.0], 1.0).unwrap(); obs.len()];
    let g = murphy(&m, &grid, &other, &truth, &obs, 0.05).unwrap();
    assert!(g.diff.iter().all(|&d| d >= 0.0));
    assert!(g.s_f2.iter().all(|&s| s == 0.0));
    assert!(g.zones.iter().all(|z| *z != Zone::Red));
    assert!(g.zones.contains(&Zone::Green));

    let single = murphy(&m, &grid, &truth[..1], &other[..1], &obs[..1], 0.05).unwrap();
    for (d, s) in single.diff.iter().zip(&single.s_f2) {
        assert_eq!(*d, -s);
        assert!(*d <= 0.0);
    }
}

#[test]
fn murphy_rejects_empty_input() {
    let m = var_l1();
    assert!(murphy(&m, &[], &[], &[], &[], 0.05).is_err());
}

#[test]
fn backtest_far_inside_and_outside() {
    let m = var_l1();
    let obs: Vec<Vec<f64>> = normal_values(&mut rng(54), 250, 2).chunks(2).map(<[f64]>::to_vec).collect();
    let inside = vec![vec![10.0, 10.0]; obs.len()];
    let r = identification_backtest(&m, &inside, &obs).unwrap();
    assert!((r.mean_diff - 0.05).abs() < 1e-12);
    assert!(r.p_high <= 0.05);
    let outside = vec![vec![-10.0, -10.0]; obs.len()];
    let r = identification_backtest(&m, &outside, &obs).unwrap();
    assert!((r.mean_diff + 0.95).abs() < 1e-12);
    assert!(r.p_high > 0.05);
}

#[test]
fn backtest_size_on_the_boundary() {
    let m = SystemicMeasure::new(ScalarRiskMeasure::evar(0.05).unwrap(), Aggregation::weighted_pos_neg(0.75).unwrap());
    let model = normal_dist(55, 200_000, 2);
    let k = m.forecast_set(model).unwrap().boundary_point(&[0.0, 0.0], &[1.0, 1.0], 1e-10).unwrap();
    let mut within = 0;
    for rep in 0..100 {
        let obs: Vec<Vec<f64>> = normal_values(&mut rng(1_000 + rep), 250, 2).chunks(2).map(<[f64]>::to_vec).collect();
        let ks = vec![k.clone(); obs.len()];
        let r = identification_backtest(&m, &ks, &obs).unwrap();
        if r.statistic.abs() <= 2.0 {
            within += 1;
        }
    }
    assert!(within >= 90, "{within}");
}

proptest! {
    #[test]
    fn antisymmetry_and_partition(diffs in prop::collection::vec(-3.0f64..3.0, 2..50), level in 0.001f64..0.5) {
        let neg: Vec<f64> = diffs.iter().map(|x| -x).collect();
        let (a, b) = (dm_test(&diffs).unwrap(), dm_test(&neg).unwrap());
        prop_assert_eq!(a.p_low, b.p_high);
        prop_assert_eq!(a.p_high, b.p_low);
        prop_assert!((0.0..=1.0).contains(&a.p_low) && (0.0..=1.0).contains(&a.p_high));
        let zone = Zone::classify(&a, level);
        let expected = if a.degenerate {
            Zone::Grey
        } else if a.rejects_f1_le_f2(level) {
            Zone::Green
        } else if a.rejects_f1_ge_f2(level) {
            Zone::Red
        } else {
            Zone::Yellow
        };
        prop_assert_eq!(zone, expected);
    }
}
