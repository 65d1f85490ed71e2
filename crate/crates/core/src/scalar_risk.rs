//! Law-invariant monetary risk measures on the real line, shifted by a threshold.
//!
//! A measure with shift `a` evaluates `rho(X) = rho_0(X - a)`, so that a
//! position is acceptable (`rho(X) <= 0`) when its risk level sits above `a`.
//! Empirical estimators use left-continuous order statistics.

use alloc::vec::Vec;

use crate::error::{check_finite, Error, Result};

/// Which risk functional a [`ScalarRiskMeasure`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RiskKind {
    /// Value-at-Risk: `-x_(ceil(alpha n))`.
    VaR,
    /// Negative `tau`-expectile.
    ExpectileVaR,
    /// Expected shortfall (average VaR below `alpha`).
    ExpectedShortfall,
}

impl RiskKind {
    pub fn tag(self) -> &'static str {
        match self {
            RiskKind::VaR => "var",
            RiskKind::ExpectileVaR => "evar",
            RiskKind::ExpectedShortfall => "es",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "var" | "VaR" => Some(RiskKind::VaR),
            "evar" | "EVaR" | "expectile" => Some(RiskKind::ExpectileVaR),
            "es" | "ES" => Some(RiskKind::ExpectedShortfall),
            _ => None,
        }
    }
}

const EXPECTILE_TOL: f64 = 1e-12;

/// A scalar risk measure with level in `(0, 1)` and acceptance threshold `shift`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRiskMeasure {
    kind: RiskKind,
    level: f64,
    shift: f64,
}

impl ScalarRiskMeasure {
    pub fn new(kind: RiskKind, level: f64, shift: f64) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::invalid("risk level must lie in (0, 1)"));
        }
        if !shift.is_finite() {
            return Err(Error::invalid("shift must be finite"));
        }
        Ok(Self { kind, level, shift })
    }

    pub fn var(level: f64) -> Result<Self> {
        Self::new(RiskKind::VaR, level, 0.0)
    }

    pub fn evar(level: f64) -> Result<Self> {
        Self::new(RiskKind::ExpectileVaR, level, 0.0)
    }

    pub fn es(level: f64) -> Result<Self> {
        Self::new(RiskKind::ExpectedShortfall, level, 0.0)
    }

    pub fn with_shift(self, shift: f64) -> Result<Self> {
        Self::new(self.kind, self.level, shift)
    }

    pub fn kind(&self) -> RiskKind {
        self.kind
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Risk of a sample, `rho_0(X - a)`.
    pub fn value(&self, xs: &[f64]) -> Result<f64> {
        check_sample(xs)?;
        let a = self.shift;
        Ok(match self.kind {
            RiskKind::VaR => a - order_stat(xs, var_index(self.level, xs.len())),
            RiskKind::ExpectileVaR => a - expectile(xs, self.level),
            RiskKind::ExpectedShortfall => a + expected_shortfall(xs, self.level),
        })
    }

    /// Whether the sample is acceptable, decided without solving for the value
    /// where the functional allows it.
    pub fn accepts(&self, xs: &[f64]) -> Result<bool> {
        check_sample(xs)?;
        let a = self.shift;
        Ok(match self.kind {
            RiskKind::VaR => {
                let below = xs.iter().filter(|&&x| x < a).count();
                below < var_index(self.level, xs.len())
            }
            RiskKind::ExpectileVaR => expectile_foc(xs, self.level, a) >= 0.0,
            RiskKind::ExpectedShortfall => a + expected_shortfall(xs, self.level) <= 0.0,
        })
    }

    /// Risk of a point mass at `c`.
    pub fn point_mass_value(&self, c: f64) -> f64 {
        self.shift - c
    }

    /// Identification function `V(x, z)` for the risk value `x` and outcome `z`.
    ///
    /// The expectation over `z` is increasing in `x` and vanishes at `x = rho(Z)`.
    pub fn identification(&self, x: f64, z: f64) -> Result<f64> {
        let u = z - self.shift + x;
        match self.kind {
            RiskKind::VaR => Ok(self.level - if u <= 0.0 { 1.0 } else { 0.0 }),
            RiskKind::ExpectileVaR => {
                let t = self.level;
                Ok(t * u.max(0.0) - (1.0 - t) * (-u).max(0.0))
            }
            RiskKind::ExpectedShortfall => Err(Error::UnsupportedIdentification("expected shortfall")),
        }
    }

    /// Strictly consistent scoring function for the risk value `x` and outcome `y`.
    pub fn consistent_score(&self, x: f64, y: f64) -> Result<f64> {
        let q = self.shift - x;
        match self.kind {
            RiskKind::VaR => {
                let ind = if y <= q { 1.0 } else { 0.0 };
                Ok((ind - self.level) * (q - y))
            }
            RiskKind::ExpectileVaR => {
                let w = if y <= q { 1.0 - self.level } else { self.level };
                Ok(w * (y - q) * (y - q))
            }
            RiskKind::ExpectedShortfall => Err(Error::UnsupportedIdentification("expected shortfall")),
        }
    }
}

fn check_sample(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    check_finite(xs, "sample")
}

/// Rank `ceil(alpha n)` (1-based) of the order statistic defining VaR.
pub(crate) fn var_index(alpha: f64, n: usize) -> usize {
    let m = libm::ceil(alpha * n as f64 - 1e-9) as usize;
    m.clamp(1, n)
}

/// The `m`-th smallest value (1-based).
pub(crate) fn order_stat(xs: &[f64], m: usize) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    let (_, x, _) = v.select_nth_unstable_by(m - 1, f64::total_cmp);
    *x
}

/// `tau E(X - e)^+ - (1 - tau) E(X - e)^-`, decreasing in `e`; zero at the expectile.
pub(crate) fn expectile_foc(xs: &[f64], tau: f64, e: f64) -> f64 {
    let (mut up, mut down) = (0.0, 0.0);
    for &x in xs {
        if x > e {
            up += x - e;
        } else {
            down += e - x;
        }
    }
    (tau * up - (1.0 - tau) * down) / xs.len() as f64
}

/// The `tau`-expectile by bisection on `[min, max]`.
pub(crate) fn expectile(xs: &[f64], tau: f64) -> f64 {
    let mut lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        if hi - lo <= EXPECTILE_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if expectile_foc(xs, tau, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Unshifted expected shortfall with the fractional correction at the VaR atom.
pub(crate) fn expected_shortfall(xs: &[f64], alpha: f64) -> f64 {
    let n = xs.len() as f64;
    let q = order_stat(xs, var_index(alpha, xs.len()));
    let (mut tail, mut count) = (0.0, 0usize);
    for &x in xs {
        if x <= q {
            tail += x;
            count += 1;
        }
    }
    let var0 = -q;
    -(tail / n) / alpha - var0 * (count as f64 / n - alpha) / alpha
}
