//! Closed upper subsets of `R^d` represented by monotone margin functions.
//!
//! A point `k` belongs to a set iff `margin(k) >= 0`, and the margin is
//! non-decreasing in every coordinate, so the set is closed under adding
//! non-negative vectors. Sets are immutable and cheap to clone; translated and
//! scaled copies share the underlying data and only change the query map.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::aggregation::{Aggregation, ClearingWorkspace};
use crate::data::EmpiricalDistribution;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::scalar_risk::{expectile_foc, var_index, RiskKind, ScalarRiskMeasure};

/// Default bisection bracket in the ray parameter.
pub const DEFAULT_BRACKET: (f64, f64) = (-50.0, 50.0);

/// Serialization tag of a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetKind {
    Analytic,
    EmpiricalRisk,
}

#[derive(Debug)]
enum Inner {
    /// `{q : normal . q >= offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// `{q : Lambda(y + q) >= threshold}`.
    Threshold { lambda: Aggregation, y: Vec<f64>, threshold: f64 },
    /// `{q : rho(Lambda(Z + q)) <= 0}` over frozen scenarios `Z`.
    Empirical(EmpiricalRiskSet),
}

/// Frozen backing data of an empirical acceptance set.
#[derive(Debug, Clone)]
pub struct EmpiricalRiskSet {
    pub rho: ScalarRiskMeasure,
    pub lambda: Aggregation,
    pub scenarios: Arc<EmpiricalDistribution>,
}

impl EmpiricalRiskSet {
    /// Writes `Lambda(z_i + q)` for every scenario into `out`.
    pub fn aggregate_sample(&self, q: &[f64], out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        let z = &self.scenarios;
        match &self.lambda {
            Aggregation::EisenbergNoe(net) => {
                let mut ws = ClearingWorkspace::new(z.dim());
                let mut e = vec![0.0; z.dim()];
                for row in z.rows() {
                    for ((ei, zi), qi) in e.iter_mut().zip(row).zip(q) {
                        *ei = zi + qi;
                    }
                    out.push(net.society_payment_with(&e, &mut ws)?);
                }
            }
            lambda => {
                for row in z.rows() {
                    out.push(lambda.aggregate_shifted(row, q)?);
                }
            }
        }
        Ok(())
    }

    fn margin(&self, q: &[f64]) -> Result<f64> {
        let mut xs = Vec::with_capacity(self.scenarios.len());
        self.aggregate_sample(q, &mut xs)?;
        margin_of_sample(&self.rho, &xs)
    }

    fn contains(&self, q: &[f64]) -> Result<bool> {
        let mut xs = Vec::with_capacity(self.scenarios.len());
        self.aggregate_sample(q, &mut xs)?;
        accepts_sample(&self.rho, &xs)
    }
}

/// `-rho(sample)`, sign-consistent with [`accepts_sample`].
pub(crate) fn margin_of_sample(rho: &ScalarRiskMeasure, xs: &[f64]) -> Result<f64> {
    let m = -rho.value(xs)?;
    if rho.kind() == RiskKind::ExpectileVaR {
        // The solver value is accurate to ~1e-12; defer to the exact sign of the
        // first-order condition at the threshold when they disagree.
        let accept = expectile_foc(xs, rho.level(), rho.shift()) >= 0.0;
        if accept != (m >= 0.0) {
            return Ok(if accept { 0.0 } else { -f64::MIN_POSITIVE });
        }
    }
    Ok(m)
}

/// Acceptance of a sample, with early exit for VaR.
pub(crate) fn accepts_sample(rho: &ScalarRiskMeasure, xs: &[f64]) -> Result<bool> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    check_finite(xs, "aggregated sample")?;
    match rho.kind() {
        RiskKind::VaR => {
            let m = var_index(rho.level(), xs.len());
            let a = rho.shift();
            let mut below = 0;
            for &x in xs {
                if x < a {
                    below += 1;
                    if below >= m {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        _ => rho.accepts(xs),
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Affine {
    scale: f64,
    offset: Vec<f64>,
}

/// A closed upper set `A = A + R^d_+`.
#[derive(Debug, Clone)]
pub struct UpperSet {
    inner: Arc<Inner>,
    map: Option<Affine>,
    bracket: (f64, f64),
    flagged_empty: bool,
}

impl UpperSet {
    /// Half-space `{k : normal . k >= offset}` with a non-negative, non-zero normal.
    pub fn half_space(normal: Vec<f64>, offset: f64) -> Result<Self> {
        check_finite(&normal, "half-space normal")?;
        if !offset.is_finite() {
            return Err(Error::NonFinite("half-space offset"));
        }
        if normal.iter().any(|&x| x < 0.0) || normal.iter().all(|&x| x == 0.0) {
            return Err(Error::invalid("half-space normal must be non-negative and non-zero"));
        }
        Ok(Self::wrap(Inner::HalfSpace { normal, offset }))
    }

    /// `{k : Lambda(y + k) >= threshold}`, the acceptance set of a point mass at `y`.
    pub fn threshold(lambda: Aggregation, y: Vec<f64>, threshold: f64) -> Result<Self> {
        check_finite(&y, "observation")?;
        if let Some(d) = lambda.dim() {
            check_dim(d, y.len())?;
        }
        let set = Self::wrap(Inner::Threshold { lambda, y, threshold });
        set.validated()
    }

    /// `{k : rho(Lambda(Z + k)) <= 0}` over a frozen scenario matrix.
    pub fn empirical(
        rho: ScalarRiskMeasure,
        lambda: Aggregation,
        scenarios: Arc<EmpiricalDistribution>,
    ) -> Result<Self> {
        if let Some(d) = lambda.dim() {
            check_dim(d, scenarios.dim())?;
        }
        let set = Self::wrap(Inner::Empirical(EmpiricalRiskSet { rho, lambda, scenarios }));
        set.validated()
    }

    fn wrap(inner: Inner) -> Self {
        Self { inner: Arc::new(inner), map: None, bracket: DEFAULT_BRACKET, flagged_empty: false }
    }

    /// Rejects sets containing the low end of the bracket along the diagonal and
    /// flags sets missing the high end.
    fn validated(mut self) -> Result<Self> {
        let Some(d) = self.dim() else { return Ok(self) };
        let (lo, hi) = self.bracket;
        if self.contains(&vec![lo; d])? {
            return Err(Error::WholeSpace);
        }
        self.flagged_empty = !self.contains(&vec![hi; d])?;
        Ok(self)
    }

    /// Replace the bisection bracket used by [`UpperSet::boundary_point`].
    pub fn with_bracket(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("bracket must satisfy lo < hi"));
        }
        self.bracket = (lo, hi);
        Ok(self)
    }

    pub fn bracket(&self) -> (f64, f64) {
        self.bracket
    }

    pub fn kind(&self) -> SetKind {
        match *self.inner {
            Inner::Empirical(_) => SetKind::EmpiricalRisk,
            _ => SetKind::Analytic,
        }
    }

    /// True when the set misses the top of the bracket along the diagonal, i.e.
    /// the forecast is empty for all practical purposes.
    pub fn is_flagged_empty(&self) -> bool {
        self.flagged_empty
    }

    /// Ambient dimension, when the representation fixes one.
    pub fn dim(&self) -> Option<usize> {
        match &*self.inner {
            Inner::HalfSpace { normal, .. } => Some(normal.len()),
            Inner::Threshold { y, .. } => Some(y.len()),
            Inner::Empirical(e) => Some(e.scenarios.dim()),
        }
    }

    /// Backing data when the set is empirical.
    pub fn empirical_data(&self) -> Option<&EmpiricalRiskSet> {
        match &*self.inner {
            Inner::Empirical(e) => Some(e),
            _ => None,
        }
    }

    /// `A + l`.
    pub fn translated(&self, l: &[f64]) -> Self {
        let mut out = self.clone();
        let map = match &self.map {
            None => Affine { scale: 1.0, offset: l.to_vec() },
            Some(m) => Affine { scale: m.scale, offset: m.offset.iter().zip(l).map(|(o, x)| o + x).collect() },
        };
        out.map = Some(map);
        out
    }

    /// `c A` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid("scale must be positive and finite"));
        }
        let mut out = self.clone();
        let d = self.dim().unwrap_or(0);
        let map = match &self.map {
            None => Affine { scale: c, offset: vec![0.0; d] },
            Some(m) => Affine { scale: c * m.scale, offset: m.offset.iter().map(|o| c * o).collect() },
        };
        out.map = Some(map);
        Ok(out)
    }

    fn with_query<T>(&self, k: &[f64], f: impl FnOnce(&[f64]) -> Result<T>) -> Result<T> {
        if let Some(d) = self.dim() {
            check_dim(d, k.len())?;
        }
        match &self.map {
            None => f(k),
            Some(m) => {
                let q: Vec<f64> = if m.scale == 1.0 {
                    k.iter().zip(&m.offset).map(|(x, o)| x - o).collect()
                } else {
                    k.iter().zip(&m.offset).map(|(x, o)| (x - o) / m.scale).collect()
                };
                f(&q)
            }
        }
    }

    /// Margin at `k`; `k` is in the set iff the margin is non-negative.
    pub fn margin(&self, k: &[f64]) -> Result<f64> {
        check_finite(k, "query point")?;
        let m = self.with_query(k, |q| match &*self.inner {
            Inner::HalfSpace { normal, offset } => Ok(dot(normal, q) - offset),
            Inner::Threshold { lambda, y, threshold } => Ok(lambda.aggregate_shifted(y, q)? - threshold),
            Inner::Empirical(e) => e.margin(q),
        })?;
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::NonFiniteMargin { point: k.to_vec() })
        }
    }

    /// Membership of `k`, identical to `margin(k) >= 0`.
    pub fn contains(&self, k: &[f64]) -> Result<bool> {
        check_finite(k, "query point")?;
        self.with_query(k, |q| match &*self.inner {
            Inner::HalfSpace { normal, offset } => Ok(dot(normal, q) - offset >= 0.0),
            Inner::Threshold { lambda, y, threshold } => Ok(lambda.aggregate_shifted(y, q)? - threshold >= 0.0),
            Inner::Empirical(e) => e.contains(q),
        })
    }

    /// Boundary point on the ray `base + t * direction`, located by bisection on
    /// `t` over the configured bracket. The returned point lies in the set and
    /// is within `tol` (in `t`) of the boundary.
    pub fn boundary_point(&self, base: &[f64], direction: &[f64], tol: f64) -> Result<Vec<f64>> {
        let t = self.boundary_parameter(base, direction, tol)?;
        Ok(ray(base, direction, t))
    }

    /// Ray parameter of [`UpperSet::boundary_point`].
    pub fn boundary_parameter(&self, base: &[f64], direction: &[f64], tol: f64) -> Result<f64> {
        check_dim(base.len(), direction.len())?;
        if direction.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Precondition("direction must be strictly positive".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        let (mut lo, mut hi) = self.bracket;
        let in_lo = self.contains(&ray(base, direction, lo))?;
        let in_hi = self.contains(&ray(base, direction, hi))?;
        if in_lo || !in_hi {
            return Err(Error::Bracket {
                lo,
                hi,
                margin_lo: self.margin(&ray(base, direction, lo))?,
                margin_hi: self.margin(&ray(base, direction, hi))?,
            });
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.contains(&ray(base, direction, mid))? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// `+1` if `k` is in `B` but not `A`, `-1` if in `A` but not `B`, else `0`.
pub fn symmetric_difference_indicator(a: &UpperSet, b: &UpperSet, k: &[f64]) -> Result<i8> {
    Ok(match (a.contains(k)?, b.contains(k)?) {
        (false, true) => 1,
        (true, false) => -1,
        _ => 0,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn ray(base: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    base.iter().zip(dir).map(|(b, d)| b + t * d).collect()
}
