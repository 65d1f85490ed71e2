//! Comparative backtests: Diebold-Mariano tests, Murphy diagrams with
//! traffic-light zones, and the one-sided identification backtest.
//!
//! Score differences are `d_t = S(f1_t, y_t) - S(f2_t, y_t)` with negatively
//! oriented scores, so positive differences favour `f2`. The statistic is
//! `sqrt(n) * mean / sd` with the plain sample standard deviation; serially
//! dependent differences are not supported.

use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::scoring::elementary_from_membership;
use crate::stats::{mean_sd, normal_cdf, normal_sf};
use crate::systemic::SystemicMeasure;
use crate::upper_set::UpperSet;

/// Default significance level.
pub const DEFAULT_LEVEL: f64 = 0.05;

/// Outcome of a Diebold-Mariano test on score differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmResult {
    pub mean_diff: f64,
    pub std_err: f64,
    /// `NaN` when degenerate, `+-inf` for constant non-zero differences.
    pub statistic: f64,
    /// All differences are exactly zero.
    pub degenerate: bool,
    /// `Phi(statistic)`: p-value of `H0: E d >= 0` (f1 at most as good as f2).
    pub p_low: f64,
    /// `1 - Phi(statistic)`: p-value of `H0: E d <= 0` (f1 at least as good as f2).
    pub p_high: f64,
    pub n: usize,
}

impl DmResult {
    /// p-value of `H0: f1 ⪯ f2`, rejected when f2 is significantly better.
    pub fn p_value_f1_le_f2(&self) -> f64 {
        self.p_high
    }

    /// p-value of `H0: f1 ⪰ f2`, rejected when f1 is significantly better.
    pub fn p_value_f1_ge_f2(&self) -> f64 {
        self.p_low
    }

    pub fn rejects_f1_le_f2(&self, level: f64) -> bool {
        self.p_high <= level
    }

    pub fn rejects_f1_ge_f2(&self, level: f64) -> bool {
        self.p_low <= level
    }
}

/// Diebold-Mariano test with iid normal asymptotics.
pub fn dm_test(diffs: &[f64]) -> Result<DmResult> {
    let n = diffs.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("score differences"));
    }
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(DmResult {
            mean_diff: 0.0,
            std_err: 0.0,
            statistic: f64::NAN,
            degenerate: true,
            p_low: 1.0,
            p_high: 1.0,
            n,
        });
    }
    let (mean, sd) = if diffs.iter().all(|&d| d == diffs[0]) { (diffs[0], 0.0) } else { mean_sd(diffs) };
    let se = sd / libm::sqrt(n as f64);
    let statistic = if se > 0.0 { mean / se } else if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    Ok(DmResult {
        mean_diff: mean,
        std_err: se,
        statistic,
        degenerate: false,
        p_low: normal_cdf(statistic),
        p_high: normal_sf(statistic),
        n,
    })
}

/// Traffic-light classification of a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Zone {
    /// `H0: f1 ⪯ f2` rejected: f2 is superior.
    Green,
    /// Neither null rejected.
    Yellow,
    /// `H0: f1 ⪰ f2` rejected: f1 is superior.
    Red,
    /// All score differences vanish; no test possible.
    Grey,
}

impl Zone {
    pub fn tag(self) -> &'static str {
        match self {
            Zone::Green => "green",
            Zone::Yellow => "yellow",
            Zone::Red => "red",
            Zone::Grey => "grey",
        }
    }

    pub fn classify(dm: &DmResult, level: f64) -> Zone {
        if dm.degenerate {
            Zone::Grey
        } else if dm.rejects_f1_le_f2(level) {
            Zone::Green
        } else if dm.rejects_f1_ge_f2(level) {
            Zone::Red
        } else {
            Zone::Yellow
        }
    }
}

/// Empirical Murphy diagram of a forecaster pair over a grid of allocations.
#[derive(Debug, Clone, PartialEq)]
pub struct MurphyGrid {
    pub points: Vec<Vec<f64>>,
    /// Mean elementary score of f1 at each point.
    pub s_f1: Vec<f64>,
    pub s_f2: Vec<f64>,
    /// `s_f1 - s_f2`.
    pub diff: Vec<f64>,
    pub zones: Vec<Zone>,
}

impl MurphyGrid {
    pub fn max_diff(&self) -> f64 {
        self.diff.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_diff(&self) -> f64 {
        self.diff.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Murphy diagram for forecast series `f1`, `f2` against observations `obs`.
pub fn murphy(
    m: &SystemicMeasure,
    grid: &[Vec<f64>],
    f1: &[UpperSet],
    f2: &[UpperSet],
    obs: &[Vec<f64>],
    level: f64,
) -> Result<MurphyGrid> {
    check_dim(obs.len(), f1.len())?;
    check_dim(obs.len(), f2.len())?;
    let member = |sets: &[UpperSet]| -> Result<Vec<Vec<bool>>> {
        sets.iter().map(|s| grid.iter().map(|k| s.contains(k)).collect()).collect()
    };
    murphy_from_memberships(m, grid, &member(f1)?, &member(f2)?, obs, level)
}

/// [`murphy`] from memberships `mem[t][j]` of grid point `j` in each period's forecast.
pub fn murphy_from_memberships(
    m: &SystemicMeasure,
    grid: &[Vec<f64>],
    mem1: &[Vec<bool>],
    mem2: &[Vec<bool>],
    obs: &[Vec<f64>],
    level: f64,
) -> Result<MurphyGrid> {
    if grid.is_empty() || obs.is_empty() {
        return Err(Error::Precondition("Murphy diagram needs a grid and observations".into()));
    }
    check_dim(obs.len(), mem1.len())?;
    check_dim(obs.len(), mem2.len())?;
    let n = obs.len() as f64;
    let mut out = MurphyGrid {
        points: grid.to_vec(),
        s_f1: Vec::with_capacity(grid.len()),
        s_f2: Vec::with_capacity(grid.len()),
        diff: Vec::with_capacity(grid.len()),
        zones: Vec::with_capacity(grid.len()),
    };
    let mut diffs = Vec::with_capacity(obs.len());
    for (j, k) in grid.iter().enumerate() {
        diffs.clear();
        let (mut s1, mut s2) = (0.0, 0.0);
        for (t, y) in obs.iter().enumerate() {
            let e1 = elementary_from_membership(m, k, mem1[t][j], y)?;
            let e2 = elementary_from_membership(m, k, mem2[t][j], y)?;
            s1 += e1;
            s2 += e2;
            diffs.push(e1 - e2);
        }
        let zone = if diffs.iter().all(|&d| d == 0.0) {
            Zone::Grey
        } else if diffs.len() < 2 {
            Zone::Yellow
        } else {
            Zone::classify(&dm_test(&diffs)?, level)
        };
        out.s_f1.push(s1 / n);
        out.s_f2.push(s2 / n);
        out.diff.push((s1 - s2) / n);
        out.zones.push(zone);
    }
    Ok(out)
}

/// One-sided backtest of `H0: E V_{R_0}(k_t, Y_t) <= 0` for reported allocations.
///
/// The returned `p_high` is the p-value of that null; it is rejected when the
/// reported allocations are significantly inside the acceptance sets.
pub fn identification_backtest(m: &SystemicMeasure, ks: &[Vec<f64>], obs: &[Vec<f64>]) -> Result<DmResult> {
    check_dim(obs.len(), ks.len())?;
    let vs = ks.iter().zip(obs).map(|(k, y)| m.v_r0(k, y)).collect::<Result<Vec<_>>>()?;
    dm_test(&vs)
}
