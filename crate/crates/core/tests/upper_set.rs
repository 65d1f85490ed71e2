//! Membership, boundary search and comparison of upper sets.

mod common;

use std::sync::Arc;

use common::{expectile_oracle, normal_dist, sorted_quantile};
use proptest::prelude::*;
use sysrisk_core::upper_set::symmetric_difference_indicator;
use sysrisk_core::{Aggregation, EmpiricalDistribution, ScalarRiskMeasure, SetKind, UpperSet};

fn half(offset: f64) -> UpperSet {
    UpperSet::half_space(vec![1.0, 1.0], offset).unwrap()
}

fn lambda1() -> Aggregation {
    Aggregation::weighted_pos_neg(0.75).unwrap()
}

fn aggregated(dist: &EmpiricalDistribution, k: &[f64]) -> Vec<f64> {
    let l = lambda1();
    dist.rows().map(|z| l.aggregate_shifted(z, k).unwrap()).collect()
}

#[test]
fn half_space_examples() {
    let a = half(2.0);
    assert!(a.contains(&[1.0, 1.0]).unwrap());
    assert!(!a.contains(&[0.0, 0.0]).unwrap());
    assert_eq!(a.kind(), SetKind::Analytic);
    let p = a.boundary_point(&[0.0, 0.0], &[1.0, 1.0], 1e-10).unwrap();
    assert!((p[0] - 1.0).abs() < 1e-9 && (p[1] - 1.0).abs() < 1e-9);
    let p = a.boundary_point(&[2.0, 0.0], &[1.0, 1.0], 1e-10).unwrap();
    assert!((p[0] - 2.0).abs() < 1e-9 && p[1].abs() < 1e-9);
}

#[test]
fn empirical_var_far_inside() {
    let z = normal_dist(21, 10_000, 2);
    let set = UpperSet::empirical(ScalarRiskMeasure::var(0.05).unwrap(), lambda1(), z.clone()).unwrap();
    assert_eq!(set.kind(), SetKind::EmpiricalRisk);
    assert!(set.contains(&[10.0, 10.0]).unwrap());
    assert!(-sorted_quantile(&aggregated(&z, &[10.0, 10.0]), 0.05) <= 0.0);
}

#[test]
fn empirical_evar_boundary_residual() {
    let z = normal_dist(22, 10_000, 2);
    let set = UpperSet::empirical(ScalarRiskMeasure::evar(0.05).unwrap(), lambda1(), z.clone()).unwrap();
    let k = set.boundary_point(&[0.0, 0.0], &[1.0, 1.0], 1e-10).unwrap();
    let residual = -expectile_oracle(&aggregated(&z, &k), 0.05);
    assert!(residual.abs() < 1e-6, "{residual}");
}

#[test]
fn bracket_failure_names_both_margins() {
    let z = normal_dist(23, 500, 2);
    let set = UpperSet::empirical(ScalarRiskMeasure::var(0.05).unwrap(), lambda1(), z).unwrap().with_bracket(-1.0, -0.5).unwrap();
    let err = set.boundary_point(&[0.0, 0.0], &[1.0, 1.0], 1e-8).unwrap_err().to_string();
    assert!(err.contains("margins"), "{err}");
}

#[test]
fn whole_space_rejected() {
    let z = Arc::new(EmpiricalDistribution::point_mass(&[1e6, 1e6]).unwrap());
    assert!(UpperSet::empirical(ScalarRiskMeasure::var(0.05).unwrap(), Aggregation::Sum, z).is_err());
}

#[test]
fn symmetric_difference_examples() {
    let (a, b) = (half(2.0), half(1.0));
    assert_eq!(symmetric_difference_indicator(&a, &b, &[0.75, 0.75]).unwrap(), 1);
    assert_eq!(symmetric_difference_indicator(&b, &a, &[0.75, 0.75]).unwrap(), -1);
    assert_eq!(symmetric_difference_indicator(&a, &a, &[0.75, 0.75]).unwrap(), 0);
}

#[test]
fn residual_shrinks_with_tolerance() {
    let a = UpperSet::half_space(vec![1.0, 3.0], std::f64::consts::PI).unwrap();
    let mut last = f64::INFINITY;
    for tol in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10] {
        let k = a.boundary_point(&[0.3, -0.7], &[1.0, 2.0], tol).unwrap();
        let r = a.margin(&k).unwrap();
        assert!(r >= 0.0 && r <= last, "tol {tol}: {r}");
        last = r;
    }
}

fn empirical_set() -> impl Strategy<Value = UpperSet> {
    (any::<u64>(), prop_oneof![Just(0), Just(1)], 0.02f64..0.3).prop_map(|(seed, kind, level)| {
        let rho = if kind == 0 { ScalarRiskMeasure::var(level) } else { ScalarRiskMeasure::evar(level) }.unwrap();
        UpperSet::empirical(rho, lambda1(), normal_dist(seed, 200, 2)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monotone_membership(set in empirical_set(), k in prop::collection::vec(-4.0f64..4.0, 2), dk in prop::collection::vec(0.0f64..2.0, 2)) {
        let up: Vec<f64> = k.iter().zip(&dk).map(|(a, b)| a + b).collect();
        prop_assert!(set.margin(&k).unwrap() <= set.margin(&up).unwrap() + 1e-12);
        prop_assert!(!set.contains(&k).unwrap() || set.contains(&up).unwrap());
    }

    #[test]
    fn contains_is_margin_sign(set in empirical_set(), k in prop::collection::vec(-4.0f64..4.0, 2)) {
        let m = set.margin(&k).unwrap();
        if m.abs() > 1e-9 {
            prop_assert_eq!(set.contains(&k).unwrap(), m >= 0.0);
        }
    }

    #[test]
    fn translation_rule(seed in any::<u64>(), l in prop::collection::vec(-2.0f64..2.0, 2), k in prop::collection::vec(-4.0f64..4.0, 2)) {
        let z = normal_dist(seed, 200, 2);
        let rho = ScalarRiskMeasure::evar(0.1).unwrap();
        let base = UpperSet::empirical(rho, lambda1(), z.clone()).unwrap();
        let moved = UpperSet::empirical(rho, lambda1(), Arc::new(z.translated(&l).unwrap())).unwrap();
        let kl: Vec<f64> = k.iter().zip(&l).map(|(a, b)| a + b).collect();
        prop_assert!((moved.margin(&k).unwrap() - base.margin(&kl).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn indicator_antisymmetric(a in -3.0f64..3.0, b in -3.0f64..3.0, k in prop::collection::vec(-4.0f64..4.0, 2)) {
        let (sa, sb) = (half(a), half(b));
        prop_assert_eq!(symmetric_difference_indicator(&sa, &sb, &k).unwrap(), -symmetric_difference_indicator(&sb, &sa, &k).unwrap());
    }
}
