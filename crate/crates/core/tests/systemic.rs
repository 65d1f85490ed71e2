//! Systemic acceptance sets, their identification functions and efficient
//! allocations, checked against direct evaluation and brute-force scans.

mod common;

use std::sync::Arc;

use common::{dyadic, normal_dist, rng};
use proptest::prelude::*;
use sysrisk_core::systemic::ear_of_set;
use sysrisk_core::{
    Aggregation, EarQuery, EarVerdict, EmpiricalDistribution, LiabilityNetwork, ScalarRiskMeasure, SystemicMeasure,
    UpperSet,
};

fn lambda1() -> Aggregation {
    Aggregation::weighted_pos_neg(0.75).unwrap()
}

fn evar_l1(level: f64) -> SystemicMeasure {
    SystemicMeasure::new(ScalarRiskMeasure::evar(level).unwrap(), lambda1())
}

fn var_sum() -> SystemicMeasure {
    SystemicMeasure::new(ScalarRiskMeasure::var(0.05).unwrap(), Aggregation::Sum)
}

/// Acceptance of `Lambda_1(Z + k)` under EVaR from the sign of the first-order condition at zero.
fn evar_accepts(z: &EmpiricalDistribution, tau: f64, k: &[f64]) -> bool {
    let l = lambda1();
    let foc: f64 = z
        .rows()
        .map(|y| {
            let x = l.aggregate_shifted(y, k).unwrap();
            if x > 0.0 { tau * x } else { (1.0 - tau) * x }
        })
        .sum();
    foc >= 0.0
}

#[test]
fn forecast_set_of_single_scenario() {
    let m = var_sum();
    let z = [0.5, -2.0];
    let set = m.forecast_set(EmpiricalDistribution::point_mass(&z).unwrap()).unwrap();
    let mut g = rng(31);
    for _ in 0..200 {
        let k = dyadic(&mut g, 2);
        assert_eq!(set.contains(&k).unwrap(), z[0] + k[0] + z[1] + k[1] >= 0.0);
    }
}

#[test]
fn forecast_set_cash_invariance() {
    let m = evar_l1(0.05);
    let z = normal_dist(32, 2_000, 2);
    let l = [0.7, -1.3];
    let base = m.forecast_set(z.clone()).unwrap();
    let moved = m.forecast_set(z.translated(&l).unwrap()).unwrap();
    let mut g = rng(33);
    for _ in 0..200 {
        let k = dyadic(&mut g, 2);
        let kl = [k[0] + l[0], k[1] + l[1]];
        assert!((moved.margin(&k).unwrap() - base.margin(&kl).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn boundary_matches_grid_scan() {
    let m = evar_l1(0.05);
    let z = normal_dist(34, 10_000, 2);
    let set = m.forecast_set(z.clone()).unwrap();
    let t = set.boundary_parameter(&[0.0, 0.0], &[1.0, 1.0], 1e-10).unwrap();
    // scan t with spacing 1e-3, then refine within the bracketing cell
    let accepts = |t: f64| evar_accepts(&z, 0.05, &[t, t]);
    let mut lo = -10.0;
    while !accepts(lo + 1e-3) {
        lo += 1e-3;
    }
    let mut hi = lo + 1e-3;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if accepts(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert!((t - hi).abs() < 1e-4, "{t} vs {hi}");
}

#[test]
fn point_mass_membership_examples() {
    let m = SystemicMeasure::new(ScalarRiskMeasure::var(0.05).unwrap(), lambda1());
    assert!(m.point_mass_membership(&[2.0, 2.0], &[0.0, 0.0]).unwrap());
    assert!(m.point_mass_membership(&[3.0, -1.0], &[0.0, 0.0]).unwrap());
    let net = LiabilityNetwork::new(5, vec![0.0; 25], vec![2.0; 5]).unwrap();
    let a = 0.9 * net.total_society();
    let m2 = SystemicMeasure::new(ScalarRiskMeasure::var(0.05).unwrap().with_shift(a).unwrap(), Aggregation::eisenberg_noe(net.clone()));
    let e = [2.0, 2.0, 2.0, 2.0, 0.5];
    assert!((net.clear(&e).unwrap().society_payment - 8.5).abs() < 1e-12);
    assert!(!m2.point_mass_membership(&[0.0; 5], &e).unwrap());
}

#[test]
fn identification_examples() {
    let shifted = SystemicMeasure::new(ScalarRiskMeasure::var(0.05).unwrap().with_shift(2.0).unwrap(), Aggregation::Sum);
    assert!((shifted.v_r0(&[0.5, 0.0], &[0.0, 0.5]).unwrap() + 0.95).abs() < 1e-15);
    let m = var_sum();
    assert!((m.v_r0_ins(&[0.25, 0.75], &[-1.0, -2.0]).unwrap() + 0.95).abs() < 1e-15);
    assert_eq!(m.v_r0_ins(&[0.25, 0.75], &[-1.0, -2.0]).unwrap(), m.v_r0_ins(&[1.5, -0.5], &[-1.0, -2.0]).unwrap());
    let es = SystemicMeasure::new(ScalarRiskMeasure::es(0.05).unwrap(), Aggregation::Sum);
    assert!(es.v_r0(&[0.0, 0.0], &[0.0, 0.0]).is_err());
    assert!(es.forecast_set(normal_dist(35, 100, 2)).is_ok());
}

#[test]
fn orientation_flips_across_the_boundary() {
    let m = evar_l1(0.05);
    let z = normal_dist(36, 100_000, 2);
    let set = m.forecast_set(z.clone()).unwrap();
    let t = set.boundary_parameter(&[0.0, 0.0], &[1.0, 1.0], 1e-10).unwrap();
    for dt in [0.05, 0.2, 1.0] {
        let (below, _) = m.mean_identification(&z, &[t - dt, t - dt]).unwrap();
        let (above, _) = m.mean_identification(&z, &[t + dt, t + dt]).unwrap();
        assert!(below < 0.0 && !set.contains(&[t - dt, t - dt]).unwrap());
        assert!(above > 0.0 && set.contains(&[t + dt, t + dt]).unwrap());
    }
}

#[test]
fn rescaled_identification_has_constant_ratio() {
    let m = var_sum();
    let g = |k: &[f64]| 1.0 + k[0] * k[0] + 0.5 * k[1].abs();
    for seed in 0..5 {
        let z = normal_dist(40 + seed, 500, 2);
        for k in [[0.3, -0.2], [1.5, 1.0], [-2.0, 0.5]] {
            let (base, _) = m.mean_identification(&z, &k).unwrap();
            let scaled: f64 = z.rows().map(|y| g(&k) * m.v_r0(&k, y).unwrap()).sum::<f64>() / z.len() as f64;
            if base != 0.0 {
                assert!((scaled / base - g(&k)).abs() < 1e-12 * g(&k));
            }
        }
    }
}

#[test]
fn ear_half_space_is_not_a_singleton() {
    let set = UpperSet::half_space(vec![1.0, 1.0], 2.0).unwrap();
    let q = EarQuery::grid(vec![1.0, 1.0], 3.0, 13, 1e-8).unwrap();
    let r = ear_of_set(&set, &q).unwrap();
    assert!((r.min_cost.unwrap() - 2.0).abs() < 1e-7);
    assert_eq!(r.minimizers.len(), 13);
    assert!(!r.is_singleton());
    assert!(EarQuery::grid(vec![1.0, 0.0], 3.0, 13, 1e-8).is_err());
}

#[test]
fn ear_unique_minimizer_matches_dense_scan() {
    let tau = 0.05;
    let m = evar_l1(tau);
    let z = normal_dist(37, 2_000, 2);
    let w = [1.0, 2.0];
    let q = EarQuery::grid(w.to_vec(), 4.0, 81, 1e-9).unwrap();
    let r = m.ear(z.clone(), &q).unwrap();
    assert!(r.is_singleton(), "{} minimizers", r.minimizers.len());
    let kmin = &r.minimizers[0];
    // brute force: dense offsets along the complement, bisection on the acceptance test
    let nw = (w[0] * w[0] + w[1] * w[1]).sqrt();
    let perp = [-w[1] / nw, w[0] / nw];
    let (mut best_cost, mut best_k) = (f64::INFINITY, vec![]);
    for i in 0..=1600 {
        let s = -4.0 + 8.0 * i as f64 / 1600.0;
        let base = [s * perp[0], s * perp[1]];
        let at = |t: f64| [base[0] + t * w[0], base[1] + t * w[1]];
        let (mut lo, mut hi) = (-50.0, 50.0);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if evar_accepts(&z, tau, &at(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let k = at(hi);
        let c = w[0] * k[0] + w[1] * k[1];
        if c < best_cost {
            best_cost = c;
            best_k = k.to_vec();
        }
    }
    let spacing = 8.0 / 80.0;
    assert!((r.min_cost.unwrap() - best_cost).abs() < 1e-3, "{:?} vs {best_cost}", r.min_cost);
    let dist = ((kmin[0] - best_k[0]).powi(2) + (kmin[1] - best_k[1]).powi(2)).sqrt();
    assert!(dist <= spacing, "{kmin:?} vs {best_k:?}");
}

#[test]
fn ear_check_classifies_point_types() {
    // R(delta_y) = {k : Lambda_1(y + k) >= 0} has the unique cheapest point k = -y for w = (1, 2),
    // which lies on the ray through the zero offset
    let m = evar_l1(0.1);
    let y = [-0.5, -1.0];
    let dist = EmpiricalDistribution::point_mass(&y).unwrap();
    let q = EarQuery::grid(vec![1.0, 2.0], 3.0, 31, 1e-9).unwrap();
    let set = m.forecast_set(dist.clone()).unwrap();
    let r = ear_of_set(&set, &q).unwrap();
    let kmin = r.minimizers[0].clone();
    assert!((kmin[0] + y[0]).abs() < 1e-6 && (kmin[1] + y[1]).abs() < 1e-6);
    let exact = [-y[0], -y[1]];
    assert_eq!(m.ear_identification_check(&dist, &exact, &q).unwrap(), EarVerdict::Member);
    let below = [exact[0] - 0.5, exact[1] - 1.0];
    assert_eq!(m.ear_identification_check(&dist, &below, &q).unwrap(), EarVerdict::NonmemberBelow);
    let costly_boundary = set.boundary_point(&q.offsets[2], &q.w, 1e-12).unwrap();
    assert!(set.contains(&costly_boundary).unwrap());
    assert_eq!(m.ear_identification_check(&dist, &costly_boundary, &q).unwrap(), EarVerdict::NonmemberAbove);
    let interior = [exact[0] + 1.0, exact[1] + 1.0];
    assert_eq!(m.ear_identification_check(&dist, &interior, &q).unwrap(), EarVerdict::NonmemberAbove);
    // under the sum the cost k1 + 2 k2 is unbounded below on the acceptance set; every
    // probed hyperplane must reach into the set within the searched extent
    let sum = SystemicMeasure::new(ScalarRiskMeasure::evar(0.1).unwrap(), Aggregation::Sum);
    let wide = EarQuery::grid(vec![1.0, 2.0], 50.0, 101, 1e-9).unwrap();
    assert_eq!(sum.ear_identification_check(&dist, &[1.0, 1.0], &wide).unwrap(), EarVerdict::EmptyEar);
    assert_eq!(m.ear_identification_check(&dist, &exact, &wide).unwrap(), EarVerdict::Member);
}

proptest! {
    #[test]
    fn v_r0_translation_invariant(seed in any::<u64>(), beta in prop_oneof![Just(0.25), Just(0.75)]) {
        let mut g = rng(seed);
        let (k, l, y) = (dyadic(&mut g, 3), dyadic(&mut g, 3), dyadic(&mut g, 3));
        let kl: Vec<f64> = k.iter().zip(&l).map(|(a, b)| a + b).collect();
        let yl: Vec<f64> = y.iter().zip(&l).map(|(a, b)| a - b).collect();
        for rho in [ScalarRiskMeasure::var(0.05).unwrap(), ScalarRiskMeasure::evar(0.05).unwrap()] {
            let m = SystemicMeasure::new(rho, Aggregation::weighted_pos_neg(beta).unwrap());
            prop_assert_eq!(m.v_r0(&kl, &yl).unwrap(), m.v_r0(&k, &y).unwrap());
        }
    }

    #[test]
    fn v_r0_homogeneous_for_evar(seed in any::<u64>(), j in -3i32..=3) {
        let c = 2f64.powi(j);
        let mut g = rng(seed);
        let (k, y) = (dyadic(&mut g, 3), dyadic(&mut g, 3));
        let ck: Vec<f64> = k.iter().map(|x| c * x).collect();
        let cy: Vec<f64> = y.iter().map(|x| c * x).collect();
        let m = evar_l1(0.05);
        prop_assert_eq!(m.v_r0(&ck, &cy).unwrap(), c * m.v_r0(&k, &y).unwrap());
    }

    #[test]
    fn insensitive_equals_sensitive_under_sum(k in prop::collection::vec(-5.0f64..5.0, 3), y in prop::collection::vec(-5.0f64..5.0, 3)) {
        for rho in [ScalarRiskMeasure::var(0.05).unwrap(), ScalarRiskMeasure::evar(0.05).unwrap()] {
            let m = SystemicMeasure::new(rho, Aggregation::Sum);
            let d = m.v_r0(&k, &y).unwrap() - m.v_r0_ins(&k, &y).unwrap();
            // the two sides group the same sum differently
            prop_assert!(d.abs() < 1e-12 || (k.iter().sum::<f64>() + y.iter().sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn sets_positively_homogeneous(seed in any::<u64>(), j in -2i32..=3, kind in 0usize..2, k in prop::collection::vec(-4.0f64..4.0, 2)) {
        let c = 2f64.powi(j);
        let z = normal_dist(seed, 300, 2);
        let rho = [ScalarRiskMeasure::var(0.05), ScalarRiskMeasure::evar(0.05)][kind].clone().unwrap();
        for lambda in [Aggregation::Sum, lambda1()] {
            let m = SystemicMeasure::new(rho, lambda);
            let a = m.forecast_set(z.clone()).unwrap();
            let ca = m.forecast_set(Arc::new(z.scaled(c).unwrap())).unwrap();
            let ck: Vec<f64> = k.iter().map(|x| c * x).collect();
            prop_assert_eq!(ca.contains(&ck).unwrap(), a.contains(&k).unwrap());
        }
    }
}
