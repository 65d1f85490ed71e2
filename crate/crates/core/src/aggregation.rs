//! Aggregation functions mapping a system outcome in `R^d` to a real number.
//!
//! Besides the plain sum and the loss-weighted `Lambda_1`, the crate ships the
//! Eisenberg-Noe clearing mechanism: banks hold endowments, owe each other and
//! society nominal liabilities, and pay pro rata; the aggregate is the total
//! payment reaching society. Negative endowments are handled by a sink node
//! that receives the shortfall and never pays.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_dim, check_finite, Error, Result};

/// Tolerance on the sup-norm change between Picard iterates.
pub const CLEARING_TOL: f64 = 1e-12;
/// Default iteration cap for the Picard scheme.
pub const CLEARING_MAX_ITER: usize = 1_000_000;
const CASCADE_MAX_DIM: usize = 8;

/// A liability network: `liabilities[i * d + j]` is what bank `i` owes bank `j`,
/// `society[i]` what bank `i` owes society.
#[derive(Debug, Clone, PartialEq)]
pub struct LiabilityNetwork {
    d: usize,
    liabilities: Vec<f64>,
    society: Vec<f64>,
    interbank_out: Vec<f64>,
    max_iter: usize,
}

/// Outcome of clearing a network.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearingResult {
    /// Clearing vector `p*`.
    pub payments: Vec<f64>,
    /// Total obligations `p_bar` of each bank, including any sink liability.
    pub obligations: Vec<f64>,
    pub society_payment: f64,
    pub iterations: usize,
    /// Sup-norm change of the final Picard step.
    pub residual: f64,
}

impl LiabilityNetwork {
    pub fn new(d: usize, liabilities: Vec<f64>, society: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("network needs at least one bank"));
        }
        check_dim(d * d, liabilities.len())?;
        check_dim(d, society.len())?;
        check_finite(&liabilities, "liability matrix")?;
        check_finite(&society, "society liabilities")?;
        if liabilities.iter().chain(&society).any(|&x| x < 0.0) {
            return Err(Error::invalid("liabilities must be non-negative"));
        }
        if (0..d).any(|i| liabilities[i * d + i] != 0.0) {
            return Err(Error::invalid("liability matrix must have a zero diagonal"));
        }
        let interbank_out = (0..d).map(|i| liabilities[i * d..(i + 1) * d].iter().sum()).collect();
        Ok(Self { d, liabilities, society, interbank_out, max_iter: CLEARING_MAX_ITER })
    }

    /// Random network: each ordered pair `i != j` carries liability `nominal`
    /// with probability `edge_prob`; every bank owes `society_liability` to society.
    pub fn random<R: Rng + ?Sized>(
        d: usize,
        edge_prob: f64,
        nominal: f64,
        society_liability: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&edge_prob) {
            return Err(Error::invalid("edge probability must lie in [0, 1]"));
        }
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                if i != j && rng.random::<f64>() < edge_prob {
                    l[i * d + j] = nominal;
                }
            }
        }
        Self::new(d, l, vec![society_liability; d])
    }

    pub fn with_max_iterations(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn liabilities(&self) -> &[f64] {
        &self.liabilities
    }

    pub fn society(&self) -> &[f64] {
        &self.society
    }

    /// `L_bar_s`, the total owed to society.
    pub fn total_society(&self) -> f64 {
        self.society.iter().sum()
    }

    /// Clear the network for endowments `e`.
    pub fn clear(&self, e: &[f64]) -> Result<ClearingResult> {
        check_dim(self.d, e.len())?;
        check_finite(e, "endowments")?;
        let mut ws = ClearingWorkspace::new(self.d);
        let (iterations, residual) = self.picard(e, &mut ws)?;
        Ok(ClearingResult {
            payments: ws.p.clone(),
            obligations: ws.pbar.clone(),
            society_payment: self.society_inflow(&ws),
            iterations,
            residual,
        })
    }

    /// Society payment only, reusing scratch buffers.
    ///
    /// Small networks are cleared exactly by the fictitious-default cascade,
    /// which reaches the greatest clearing vector in at most `d` rounds; the
    /// Picard scheme is the fallback.
    pub(crate) fn society_payment_with(&self, e: &[f64], ws: &mut ClearingWorkspace) -> Result<f64> {
        if let Some(v) = self.cascade(e) {
            return Ok(v);
        }
        self.picard(e, ws)?;
        Ok(self.society_inflow(ws))
    }

    /// Fictitious-default cascade; `None` if the network is too large or a
    /// defaulting subsystem is numerically singular.
    pub(crate) fn cascade(&self, e: &[f64]) -> Option<f64> {
        let d = self.d;
        if d > CASCADE_MAX_DIM {
            return None;
        }
        let mut pbar = [0.0; CASCADE_MAX_DIM];
        let mut cash = [0.0; CASCADE_MAX_DIM];
        let mut p = [0.0; CASCADE_MAX_DIM];
        let mut default = [false; CASCADE_MAX_DIM];
        for i in 0..d {
            let sink = if e[i] < 0.0 { -e[i] } else { 0.0 };
            pbar[i] = self.interbank_out[i] + self.society[i] + sink;
            cash[i] = e[i].max(0.0);
            p[i] = pbar[i];
        }
        let mut inv = [0.0; CASCADE_MAX_DIM];
        for j in 0..d {
            inv[j] = if pbar[j] > 0.0 { 1.0 / pbar[j] } else { 0.0 };
        }
        let rel = |j: usize, i: usize| self.liabilities[j * d + i] * inv[j];
        let mut a = [[0.0; CASCADE_MAX_DIM + 1]; CASCADE_MAX_DIM];
        for _ in 0..=d {
            let mut ratio = [0.0; CASCADE_MAX_DIM];
            for j in 0..d {
                ratio[j] = p[j] * inv[j];
            }
            let mut grew = false;
            for i in 0..d {
                if default[i] {
                    continue;
                }
                let mut inflow = cash[i];
                for j in 0..d {
                    inflow += self.liabilities[j * d + i] * ratio[j];
                }
                if inflow < pbar[i] {
                    default[i] = true;
                    grew = true;
                }
            }
            if !grew {
                let mut s = 0.0;
                for i in 0..d {
                    s += self.society[i] * ratio[i];
                }
                return Some(s);
            }
            // solve (I - Pi_DD^T) p_D = cash_D + Pi_{ND,D}^T p_bar_ND
            let mut idx = [0usize; CASCADE_MAX_DIM];
            let mut m = 0;
            for i in (0..d).filter(|&i| default[i]) {
                idx[m] = i;
                m += 1;
            }
            let idx = &idx[..m];
            for (r, &i) in idx.iter().enumerate() {
                let mut rhs = cash[i];
                for j in 0..d {
                    if !default[j] {
                        rhs += rel(j, i) * pbar[j];
                    }
                }
                for (c, &j) in idx.iter().enumerate() {
                    a[r][c] = if r == c { 1.0 } else { 0.0 } - rel(j, i);
                }
                a[r][m] = rhs;
            }
            for col in 0..m {
                let piv = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
                if a[piv][col].abs() < 1e-12 {
                    return None;
                }
                a.swap(col, piv);
                for r in col + 1..m {
                    let f = a[r][col] / a[col][col];
                    for c in col..=m {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
            for r in (0..m).rev() {
                let mut v = a[r][m];
                for c in r + 1..m {
                    v -= a[r][c] * a[c][m];
                }
                a[r][m] = v / a[r][r];
            }
            for (r, &i) in idx.iter().enumerate() {
                p[i] = a[r][m].clamp(0.0, pbar[i]);
            }
        }
        None
    }

    fn prepare(&self, e: &[f64], ws: &mut ClearingWorkspace) {
        for i in 0..self.d {
            let sink = if e[i] < 0.0 { -e[i] } else { 0.0 };
            ws.pbar[i] = self.interbank_out[i] + self.society[i] + sink;
            ws.cash[i] = e[i].max(0.0);
        }
    }

    /// One Jacobi step `next = min(p_bar, max(0, e+ + Pi^T p))`.
    fn step(&self, ws: &mut ClearingWorkspace) {
        let d = self.d;
        for j in 0..d {
            ws.ratio[j] = if ws.pbar[j] > 0.0 { ws.p[j] / ws.pbar[j] } else { 0.0 };
        }
        for i in 0..d {
            let mut inflow = ws.cash[i];
            for j in 0..d {
                inflow += self.liabilities[j * d + i] * ws.ratio[j];
            }
            ws.next[i] = ws.pbar[i].min(inflow.max(0.0));
        }
    }

    fn picard(&self, e: &[f64], ws: &mut ClearingWorkspace) -> Result<(usize, f64)> {
        self.prepare(e, ws);
        let d = self.d;
        ws.p[..d].copy_from_slice(&ws.pbar[..d]);
        let mut residual = f64::INFINITY;
        for it in 1..=self.max_iter {
            self.step(ws);
            residual = 0.0;
            for i in 0..d {
                residual = residual.max((ws.next[i] - ws.p[i]).abs());
            }
            ws.p[..d].copy_from_slice(&ws.next[..d]);
            if residual < CLEARING_TOL {
                return Ok((it, residual));
            }
        }
        Err(Error::NoConvergence { iterations: self.max_iter, residual })
    }

    fn society_inflow(&self, ws: &ClearingWorkspace) -> f64 {
        let mut s = 0.0;
        for i in 0..self.d {
            if ws.pbar[i] > 0.0 {
                s += self.society[i] / ws.pbar[i] * ws.p[i];
            }
        }
        s
    }
}

/// Scratch buffers for repeated clearing of one network.
#[derive(Debug, Clone)]
pub(crate) struct ClearingWorkspace {
    p: Vec<f64>,
    next: Vec<f64>,
    pbar: Vec<f64>,
    cash: Vec<f64>,
    ratio: Vec<f64>,
}

impl ClearingWorkspace {
    pub(crate) fn new(d: usize) -> Self {
        Self { p: vec![0.0; d], next: vec![0.0; d], pbar: vec![0.0; d], cash: vec![0.0; d], ratio: vec![0.0; d] }
    }
}

/// An aggregation function `Lambda: R^d -> R`, non-decreasing in every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum Aggregation {
    /// `sum_i y_i`.
    Sum,
    /// `(1 - beta) sum_i y_i^+ - beta sum_i y_i^-`.
    WeightedPosNeg { beta: f64 },
    /// Total payment to society after Eisenberg-Noe clearing.
    EisenbergNoe(Arc<LiabilityNetwork>),
}

impl Aggregation {
    pub fn weighted_pos_neg(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid("beta must lie in (0, 1)"));
        }
        Ok(Aggregation::WeightedPosNeg { beta })
    }

    pub fn eisenberg_noe(network: LiabilityNetwork) -> Self {
        Aggregation::EisenbergNoe(Arc::new(network))
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Aggregation::Sum => "sum",
            Aggregation::WeightedPosNeg { .. } => "lambda1",
            Aggregation::EisenbergNoe(_) => "lambda2",
        }
    }

    /// Fixed dimension, if the aggregation imposes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Aggregation::EisenbergNoe(n) => Some(n.dim()),
            _ => None,
        }
    }

    /// `Lambda(y)`.
    pub fn aggregate(&self, y: &[f64]) -> Result<f64> {
        check_finite(y, "aggregation input")?;
        match self {
            Aggregation::EisenbergNoe(n) => {
                check_dim(n.dim(), y.len())?;
                if let Some(v) = n.cascade(y) {
                    return Ok(v);
                }
                let mut ws = ClearingWorkspace::new(n.dim());
                n.society_payment_with(y, &mut ws)
            }
            _ => Ok(self.separable(y).expect("separable")),
        }
    }

    /// `Lambda(y + k)` without allocating for the separable kinds.
    pub fn aggregate_shifted(&self, y: &[f64], k: &[f64]) -> Result<f64> {
        check_dim(y.len(), k.len())?;
        match self {
            Aggregation::Sum => Ok(y.iter().zip(k).map(|(a, b)| a + b).sum()),
            Aggregation::WeightedPosNeg { beta } => {
                Ok(y.iter().zip(k).map(|(a, b)| weighted(*beta, a + b)).sum())
            }
            Aggregation::EisenbergNoe(_) if y.len() <= CASCADE_MAX_DIM => {
                let mut s = [0.0; CASCADE_MAX_DIM];
                for ((si, a), b) in s.iter_mut().zip(y).zip(k) {
                    *si = a + b;
                }
                self.aggregate(&s[..y.len()])
            }
            Aggregation::EisenbergNoe(_) => {
                let s: Vec<f64> = y.iter().zip(k).map(|(a, b)| a + b).collect();
                self.aggregate(&s)
            }
        }
    }

    fn separable(&self, y: &[f64]) -> Option<f64> {
        match self {
            Aggregation::Sum => Some(y.iter().sum()),
            Aggregation::WeightedPosNeg { beta } => Some(y.iter().map(|&x| weighted(*beta, x)).sum()),
            Aggregation::EisenbergNoe(_) => None,
        }
    }
}

#[inline]
pub(crate) fn weighted(beta: f64, x: f64) -> f64 {
    let pos = x.max(0.0);
    (1.0 - beta) * pos + beta * (x - pos)
}
