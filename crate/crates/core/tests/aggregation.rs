//! Aggregation functions and Eisenberg-Noe clearing against Picard oracles
//! iterated from both ends of the lattice.

mod common;

use common::rng;
use proptest::prelude::*;
use rand::Rng;
use sysrisk_core::{Aggregation, LiabilityNetwork};

/// Sink-augmented relative liabilities and obligations, built independently.
struct Oracle {
    d: usize,
    pbar: Vec<f64>,
    /// `pi[i][j]` for banks `j`, then society, then sink.
    pi: Vec<Vec<f64>>,
    cash: Vec<f64>,
}

impl Oracle {
    fn new(l: &[f64], society: &[f64], e: &[f64]) -> Self {
        let d = e.len();
        let mut pbar = vec![0.0; d];
        let mut pi = vec![vec![0.0; d + 2]; d];
        for i in 0..d {
            let sink = (-e[i]).max(0.0);
            let row: Vec<f64> = (0..d).map(|j| l[i * d + j]).chain([society[i], sink]).collect();
            pbar[i] = row.iter().sum();
            if pbar[i] > 0.0 {
                for (p, x) in pi[i].iter_mut().zip(&row) {
                    *p = x / pbar[i];
                }
            }
        }
        Self { d, pbar, pi, cash: e.iter().map(|x| x.max(0.0)).collect() }
    }

    fn step(&self, p: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| {
                let inflow: f64 = (0..self.d).map(|j| self.pi[j][i] * p[j]).sum();
                (self.cash[i] + inflow).clamp(0.0, self.pbar[i])
            })
            .collect()
    }

    fn picard(&self, start: Vec<f64>) -> Vec<f64> {
        let mut p = start;
        for _ in 0..1_000_000 {
            let q = self.step(&p);
            let delta = q.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            p = q;
            if delta < 1e-14 {
                break;
            }
        }
        p
    }

    fn society(&self, p: &[f64]) -> f64 {
        (0..self.d).map(|i| self.pi[i][self.d] * p[i]).sum()
    }
}

fn random_network(rng: &mut impl Rng, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            if i != j && rng.random::<f64>() < 0.7 {
                l[i * d + j] = rng.random_range(0.0..4.0);
            }
        }
    }
    let s = (0..d).map(|_| rng.random_range(0.0..3.0)).collect();
    (l, s)
}

#[test]
fn weighted_examples() {
    let l1 = Aggregation::weighted_pos_neg(0.75).unwrap();
    assert!((l1.aggregate(&[1.0, -1.0]).unwrap() + 0.5).abs() < 1e-15);
    assert_eq!(l1.aggregate(&[0.0, 0.0]).unwrap(), 0.0);
    assert!(Aggregation::weighted_pos_neg(1.0).is_err());
}

#[test]
fn clearing_examples() {
    let iso = LiabilityNetwork::new(2, vec![0.0; 4], vec![2.0, 2.0]).unwrap();
    let r = iso.clear(&[3.0, 0.5]).unwrap();
    assert_eq!(r.payments, vec![2.0, 0.5]);
    assert!((r.society_payment - 2.5).abs() < 1e-12);
    assert!((Aggregation::eisenberg_noe(iso.clone()).aggregate(&[3.0, 0.5]).unwrap() - 2.5).abs() < 1e-12);

    let chain = LiabilityNetwork::new(2, vec![0.0, 2.0, 0.0, 0.0], vec![2.0, 2.0]).unwrap();
    let r = chain.clear(&[1.0, 0.5]).unwrap();
    assert!((r.payments[0] - 1.0).abs() < 1e-12 && (r.payments[1] - 1.0).abs() < 1e-12);
    assert!((r.society_payment - 1.5).abs() < 1e-12);
    let o = Oracle::new(&[0.0, 2.0, 0.0, 0.0], &[2.0, 2.0], &[1.0, 0.5]);
    assert!((o.society(&o.picard(o.pbar.clone())) - 1.5).abs() < 1e-12);

    let r = iso.clear(&[-1.0, 5.0]).unwrap();
    assert_eq!(r.payments[0], 0.0);
    assert!((r.society_payment - 2.0).abs() < 1e-12);
    assert_eq!(r.obligations, vec![3.0, 2.0]);
}

#[test]
fn clearing_matches_both_oracles() {
    let mut g = rng(11);
    for case in 0..200 {
        let d = g.random_range(1..=5);
        let (l, s) = random_network(&mut g, d);
        let net = LiabilityNetwork::new(d, l.clone(), s.clone()).unwrap();
        let e: Vec<f64> = (0..d).map(|_| g.random_range(-3.0..4.0)).collect();
        let o = Oracle::new(&l, &s, &e);
        let above = o.picard(o.pbar.clone());
        let below = o.picard(vec![0.0; d]);
        let r = net.clear(&e).unwrap();
        for i in 0..d {
            assert!((above[i] - below[i]).abs() < 1e-9, "case {case}: fixed point not unique");
            assert!((r.payments[i] - above[i]).abs() < 1e-9, "case {case}");
            assert!(r.payments[i] >= 0.0 && r.payments[i] <= r.obligations[i] + 1e-12);
        }
        assert!(r.residual <= 1e-12);
        assert!((r.society_payment - o.society(&above)).abs() < 1e-9);
        let agg = Aggregation::eisenberg_noe(net).aggregate(&e).unwrap();
        assert!((agg - r.society_payment).abs() < 1e-9, "case {case}: {agg} vs {}", r.society_payment);
    }
}

#[test]
fn non_convergence_is_reported() {
    let net = LiabilityNetwork::new(2, vec![0.0, 2.0, 2.0, 0.0], vec![1.0, 1.0]).unwrap().with_max_iterations(1);
    let err = net.clear(&[0.3, 0.1]).unwrap_err();
    assert!(err.is_numeric(), "{err}");
}

fn aggregation() -> impl Strategy<Value = Aggregation> {
    prop_oneof![
        Just(Aggregation::Sum),
        (0.05f64..0.95).prop_map(|b| Aggregation::weighted_pos_neg(b).unwrap()),
        any::<u64>().prop_map(|seed| {
            let (l, s) = random_network(&mut rng(seed), 3);
            Aggregation::eisenberg_noe(LiabilityNetwork::new(3, l, s).unwrap())
        }),
    ]
}

proptest! {
    #[test]
    fn monotone(lambda in aggregation(), y in prop::collection::vec(-5.0f64..5.0, 3), dy in prop::collection::vec(0.0f64..3.0, 3)) {
        let up: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + b).collect();
        prop_assert!(lambda.aggregate(&y).unwrap() <= lambda.aggregate(&up).unwrap() + 1e-9);
    }

    #[test]
    fn shifted_equals_sum(lambda in aggregation(), y in prop::collection::vec(-5.0f64..5.0, 3), k in prop::collection::vec(-5.0f64..5.0, 3)) {
        let s: Vec<f64> = y.iter().zip(&k).map(|(a, b)| a + b).collect();
        prop_assert!((lambda.aggregate_shifted(&y, &k).unwrap() - lambda.aggregate(&s).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn homogeneous(beta in 0.05f64..0.95, y in prop::collection::vec(-5.0f64..5.0, 4), c in 0.1f64..10.0) {
        for lambda in [Aggregation::Sum, Aggregation::weighted_pos_neg(beta).unwrap()] {
            let cy: Vec<f64> = y.iter().map(|x| c * x).collect();
            prop_assert!((lambda.aggregate(&cy).unwrap() - c * lambda.aggregate(&y).unwrap()).abs() < 1e-9 * (1.0 + c));
        }
    }

    #[test]
    fn society_payment_bounds(seed in any::<u64>(), e in prop::collection::vec(-5.0f64..8.0, 4)) {
        let (l, s) = random_network(&mut rng(seed), 4);
        let net = LiabilityNetwork::new(4, l, s).unwrap();
        let total = net.total_society();
        let r = net.clear(&e).unwrap();
        prop_assert!(r.society_payment >= -1e-12 && r.society_payment <= total + 1e-9);
        prop_assert!(r.residual <= 1e-12);
    }
}
