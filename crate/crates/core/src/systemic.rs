//! Set-valued systemic risk measures built from a scalar risk measure and an
//! aggregation function.
//!
//! For a random system outcome `Y`:
//! - `R(Y) = {k : rho(Lambda(Y + k)) <= 0}`, the acceptable capital allocations;
//! - `R_0(Y) = {k : rho(Lambda(Y + k)) = 0}`, its boundary;
//! - `R^ins(Y) = {k : rho(Lambda(Y) + sum(k)) <= 0}`, the sensitivity-free variant;
//! - `EAR_w(Y) = argmin_{k in R(Y)} w . k`, efficient allocations at prices `w`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::aggregation::Aggregation;
use crate::data::EmpiricalDistribution;
use crate::error::{check_dim, Error, Result};
use crate::linalg::orthogonal_complement;
use crate::scalar_risk::{RiskKind, ScalarRiskMeasure};
use crate::stats::mean_se;
use crate::upper_set::{dot, UpperSet};

/// A pair `(rho, Lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemicMeasure {
    pub rho: ScalarRiskMeasure,
    pub lambda: Aggregation,
}

impl SystemicMeasure {
    pub fn new(rho: ScalarRiskMeasure, lambda: Aggregation) -> Self {
        Self { rho, lambda }
    }

    /// `R(F)` for an empirical predictive distribution.
    pub fn forecast_set(&self, predictive: impl Into<Arc<EmpiricalDistribution>>) -> Result<UpperSet> {
        UpperSet::empirical(self.rho, self.lambda.clone(), predictive.into())
    }

    /// `R^ins(F)`: the half-space `{k : sum(k) >= rho(Lambda(Y))}`.
    pub fn insensitive_forecast_set(&self, predictive: &EmpiricalDistribution) -> Result<UpperSet> {
        let r = self.r_value(predictive)?;
        UpperSet::half_space(vec![1.0; predictive.dim()], r)
    }

    /// `r(F) = rho(Lambda(Y))`.
    pub fn r_value(&self, dist: &EmpiricalDistribution) -> Result<f64> {
        let xs = dist.rows().map(|y| self.lambda.aggregate(y)).collect::<Result<Vec<_>>>()?;
        self.rho.value(&xs)
    }

    /// `R(delta_y)`, the acceptance set of a point mass.
    pub fn point_mass_set(&self, y: &[f64]) -> Result<UpperSet> {
        UpperSet::threshold(self.lambda.clone(), y.to_vec(), self.rho.shift())
    }

    /// `1{k in R(delta_y)}`, i.e. `Lambda(y + k) >= a`.
    pub fn point_mass_membership(&self, k: &[f64], y: &[f64]) -> Result<bool> {
        Ok(self.lambda.aggregate_shifted(y, k)? >= self.rho.shift())
    }

    /// `V_{R_0}(k, y) = V_rho(0, Lambda(y + k))`.
    pub fn v_r0(&self, k: &[f64], y: &[f64]) -> Result<f64> {
        self.require_identifiable()?;
        self.rho.identification(0.0, self.lambda.aggregate_shifted(y, k)?)
    }

    /// `V_{R_0^ins}(k, y) = V_rho(sum(k), Lambda(y))`.
    pub fn v_r0_ins(&self, k: &[f64], y: &[f64]) -> Result<f64> {
        self.require_identifiable()?;
        check_dim(y.len(), k.len())?;
        let kbar: f64 = k.iter().sum();
        self.rho.identification(kbar, self.lambda.aggregate(y)?)
    }

    /// Identification function of `r = rho o Lambda` at risk value `x`.
    pub fn v_r(&self, x: f64, y: &[f64]) -> Result<f64> {
        self.rho.identification(x, self.lambda.aggregate(y)?)
    }

    /// Consistent score of `r = rho o Lambda` at risk value `x`.
    pub fn s_r(&self, x: f64, y: &[f64]) -> Result<f64> {
        self.rho.consistent_score(x, self.lambda.aggregate(y)?)
    }

    fn require_identifiable(&self) -> Result<()> {
        if self.rho.kind() == RiskKind::ExpectedShortfall {
            Err(Error::UnsupportedIdentification("expected shortfall"))
        } else {
            Ok(())
        }
    }

    /// Efficient allocations of `R(F)`.
    pub fn ear(&self, predictive: impl Into<Arc<EmpiricalDistribution>>, q: &EarQuery) -> Result<EarResult> {
        ear_of_set(&self.forecast_set(predictive)?, q)
    }

    /// Mean and standard error of `V_{R_0}(k, Y)` over `dist`.
    pub fn mean_identification(&self, dist: &EmpiricalDistribution, k: &[f64]) -> Result<(f64, f64)> {
        let vs = dist.rows().map(|y| self.v_r0(k, y)).collect::<Result<Vec<_>>>()?;
        Ok(mean_se(&vs))
    }

    /// Classify `k` relative to `EAR_w(F)` from mean identification values on
    /// the hyperplane through `k` orthogonal to `w`.
    ///
    /// A value counts as positive (negative) when it exceeds `max(tol, 3 SE)`
    /// in absolute value. `k` is a member iff no value on its hyperplane is
    /// positive and the value at `k` itself is zero. When positive values occur,
    /// lower parallel hyperplanes `k - s w/|w|` are probed for each configured
    /// shift `s`; if none of them is free of positive values, no supporting
    /// hyperplane was found and the verdict is [`EarVerdict::EmptyEar`].
    pub fn ear_identification_check(
        &self,
        dist: &EmpiricalDistribution,
        k: &[f64],
        q: &EarQuery,
    ) -> Result<EarVerdict> {
        self.require_identifiable()?;
        check_dim(q.w.len(), k.len())?;
        if q.offsets.is_empty() {
            return Err(Error::Precondition("EAR grid is empty".into()));
        }
        let profile = self.hyperplane_profile(dist, k, q)?;
        if !profile.any_positive {
            return Ok(if profile.zero_at_center { EarVerdict::Member } else { EarVerdict::NonmemberBelow });
        }
        let nw = libm::sqrt(dot(&q.w, &q.w));
        for &s in &q.probe_shifts {
            let kp: Vec<f64> = k.iter().zip(&q.w).map(|(ki, wi)| ki - s * wi / nw).collect();
            if !self.hyperplane_profile(dist, &kp, q)?.any_positive {
                return Ok(EarVerdict::NonmemberAbove);
            }
        }
        Ok(EarVerdict::EmptyEar)
    }

    fn hyperplane_profile(&self, dist: &EmpiricalDistribution, k: &[f64], q: &EarQuery) -> Result<Profile> {
        let threshold = |se: f64| q.tol.max(3.0 * se);
        let (m0, se0) = self.mean_identification(dist, k)?;
        let mut any_positive = m0 > threshold(se0);
        let mut pt = vec![0.0; k.len()];
        for x in &q.offsets {
            for ((p, ki), xi) in pt.iter_mut().zip(k).zip(x) {
                *p = ki + xi;
            }
            let (m, se) = self.mean_identification(dist, &pt)?;
            if m > threshold(se) {
                any_positive = true;
                break;
            }
        }
        Ok(Profile { any_positive, zero_at_center: m0.abs() <= threshold(se0) })
    }
}

struct Profile {
    any_positive: bool,
    zero_at_center: bool,
}

/// Outcome of [`SystemicMeasure::ear_identification_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EarVerdict {
    Member,
    /// `k` lies below `R(F)` or touches its supporting hyperplane outside `R(F)`.
    NonmemberBelow,
    /// The hyperplane through `k` cuts into the interior of `R(F)`.
    NonmemberAbove,
    /// No supporting hyperplane orthogonal to `w` was found.
    EmptyEar,
}

impl EarVerdict {
    pub fn tag(self) -> &'static str {
        match self {
            EarVerdict::Member => "member",
            EarVerdict::NonmemberBelow => "nonmember_below",
            EarVerdict::NonmemberAbove => "nonmember_above",
            EarVerdict::EmptyEar => "empty_ear",
        }
    }
}

/// Search specification for efficient allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct EarQuery {
    /// Strictly positive price vector.
    pub w: Vec<f64>,
    /// Offsets in the orthogonal complement of `w`.
    pub offsets: Vec<Vec<f64>>,
    /// Cost tolerance for minimizers and zero tolerance for identification values.
    pub tol: f64,
    /// Shifts along `-w/|w|` probed by the identification check.
    pub probe_shifts: Vec<f64>,
}

impl EarQuery {
    pub fn new(w: Vec<f64>, offsets: Vec<Vec<f64>>, tol: f64) -> Result<Self> {
        if w.is_empty() || w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::Precondition("price vector must be strictly positive".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        let nw = libm::sqrt(dot(&w, &w));
        for x in &offsets {
            check_dim(w.len(), x.len())?;
            let nx = libm::sqrt(dot(x, x));
            if dot(x, &w).abs() > 1e-12 * nw * nx.max(1.0) {
                return Err(Error::invalid("EAR offsets must be orthogonal to the price vector"));
            }
        }
        Ok(Self { w, offsets, tol, probe_shifts: vec![0.5, 1.0, 2.0, 4.0, 8.0] })
    }

    /// Regular grid with `resolution` points per axis on `[-extent, extent]` in an
    /// orthonormal basis of the complement of `w`.
    pub fn grid(w: Vec<f64>, extent: f64, resolution: usize, tol: f64) -> Result<Self> {
        if w.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Precondition("price vector must be strictly positive".into()));
        }
        if resolution == 0 || !(extent >= 0.0) {
            return Err(Error::invalid("grid needs a positive resolution and non-negative extent"));
        }
        let basis = orthogonal_complement(&w);
        let steps: Vec<f64> = if resolution == 1 {
            vec![0.0]
        } else {
            (0..resolution).map(|i| -extent + 2.0 * extent * i as f64 / (resolution - 1) as f64).collect()
        };
        let d = w.len();
        let mut offsets = Vec::new();
        let mut idx = vec![0usize; basis.len()];
        loop {
            let mut x = vec![0.0; d];
            for (b, &i) in basis.iter().zip(&idx) {
                for (xj, bj) in x.iter_mut().zip(b) {
                    *xj += steps[i] * bj;
                }
            }
            // remove rounding drift along w
            let c = dot(&x, &w) / dot(&w, &w);
            x.iter_mut().zip(&w).for_each(|(xj, wj)| *xj -= c * wj);
            offsets.push(x);
            let mut m = 0;
            loop {
                if m == idx.len() {
                    return Self::new(w, offsets, tol);
                }
                idx[m] += 1;
                if idx[m] < steps.len() {
                    break;
                }
                idx[m] = 0;
                m += 1;
            }
        }
    }

    pub fn with_probe_shifts(mut self, shifts: Vec<f64>) -> Self {
        self.probe_shifts = shifts;
        self
    }
}

/// Efficient allocations found on the search grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EarResult {
    /// `None` when every ray failed to bracket the boundary.
    pub min_cost: Option<f64>,
    /// Boundary points whose cost is within `tol` of the minimum.
    pub minimizers: Vec<Vec<f64>>,
    /// `(boundary point, cost)` for every ray that bracketed.
    pub boundary: Vec<(Vec<f64>, f64)>,
    pub failed_rays: usize,
}

impl EarResult {
    pub fn is_empty(&self) -> bool {
        self.min_cost.is_none()
    }

    pub fn is_singleton(&self) -> bool {
        self.minimizers.len() == 1
    }
}

/// Minimize `w . k` over the boundary of `set` along rays `x + t w`, `x` in the grid.
pub fn ear_of_set(set: &UpperSet, q: &EarQuery) -> Result<EarResult> {
    let ww = dot(&q.w, &q.w);
    let t_tol = q.tol / (10.0 * ww);
    let mut boundary = Vec::with_capacity(q.offsets.len());
    let mut failed = 0;
    for x in &q.offsets {
        match set.boundary_point(x, &q.w, t_tol) {
            Ok(k) => {
                let c = dot(&q.w, &k);
                boundary.push((k, c));
            }
            Err(Error::Bracket { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    let min_cost = boundary.iter().map(|(_, c)| *c).fold(None, |m: Option<f64>, c| {
        Some(match m {
            Some(m) if m <= c => m,
            _ => c,
        })
    });
    let minimizers = match min_cost {
        Some(m) => boundary.iter().filter(|(_, c)| *c <= m + q.tol).map(|(k, _)| k.clone()).collect(),
        None => Vec::new(),
    };
    Ok(EarResult { min_cost, minimizers, boundary, failed_rays: failed })
}
