//! Prediction-space experiments comparing an informed forecaster (Anne) with a
//! climatological one (Bob) and a misinformed one (Celia).
//!
//! Setting A: `Y_t = mu_t + eps_t` with `mu_t ~ N_d(0, Sigma_mu)` (unit
//! variances, equal correlations) and `eps_t ~ N_d(0, I)`, aggregated by the
//! loss-weighted `Lambda_1`. Setting B squares the same outcome componentwise
//! and aggregates by Eisenberg-Noe clearing on a random network.
//!
//! Anne knows `mu_t` and reports `R(N(mu_t, I))`, Bob reports the unconditional
//! `R(N(0, Sigma_mu + I))`, Celia reports `R(N(-mu_t, I))`. All forecast sets
//! are empirical acceptance sets over frozen predictive draws. Randomness is
//! split into ChaCha streams keyed by (master seed, purpose, index), so a
//! replication's data never depends on how many replications run.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::aggregation::{weighted, Aggregation, LiabilityNetwork};
use crate::data::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::evaluation::{dm_test, murphy_from_memberships, DmResult, MurphyGrid};
use crate::linalg::{cholesky, equicorrelation, lower_mul, orthogonal_complement};
use crate::scalar_risk::{expectile_foc, order_stat, var_index, RiskKind, ScalarRiskMeasure};
use crate::scoring::MixtureMeasure;
use crate::systemic::SystemicMeasure;
use crate::upper_set::{accepts_sample, margin_of_sample, UpperSet};

const STREAM_PI: u64 = 1;
const STREAM_ANNE: u64 = 2;
const STREAM_BOB: u64 = 3;
const STREAM_REP: u64 = 4;
const STREAM_NET: u64 = 5;
const STREAM_MURPHY: u64 = 6;

/// Independent ChaCha stream for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: u64, index: u64) -> ChaCha20Rng {
    let mut x = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    let mut rng = ChaCha20Rng::seed_from_u64(x);
    rng.set_stream(index);
    rng
}

fn normal_vec<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Which data-generating process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setting {
    A,
    B,
}

impl Setting {
    pub fn tag(self) -> &'static str {
        match self {
            Setting::A => "A",
            Setting::B => "B",
        }
    }
}

/// Generator parameters of the setting-B liability network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    pub edge_prob: f64,
    pub nominal: f64,
    pub society: f64,
    /// Shift `a` as a fraction of the total owed to society.
    pub shift_fraction: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self { edge_prob: 0.8, nominal: 2.0, society: 2.0, shift_fraction: 0.9 }
    }
}

/// Discretization of the scoring measure `pi`.
#[derive(Debug, Clone, PartialEq)]
pub enum PiSpec {
    /// `N(mean * 1, cov_scale * I)`; `seed = None` derives one from the master seed.
    Gaussian { mean: f64, cov_scale: f64, size: usize, seed: Option<u64> },
    Grid { lo: f64, hi: f64, resolution: usize },
    Atom(Vec<f64>),
}

impl PiSpec {
    pub fn build(&self, d: usize, master_seed: u64) -> Result<MixtureMeasure> {
        match self {
            PiSpec::Gaussian { mean, cov_scale, size, seed } => {
                let seed = seed.unwrap_or_else(|| stream(master_seed, STREAM_PI, 0).random());
                MixtureMeasure::gaussian(&vec![*mean; d], *cov_scale, *size, seed)
            }
            PiSpec::Grid { lo, hi, resolution } => MixtureMeasure::box_grid(&vec![*lo; d], &vec![*hi; d], *resolution),
            PiSpec::Atom(k) => {
                if k.len() != d {
                    return Err(Error::Dimension { expected: d, got: k.len() });
                }
                MixtureMeasure::atom(k)
            }
        }
    }
}

/// A risk measure of the study; the shift is implied by the setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskSpec {
    pub kind: RiskKind,
    pub level: f64,
}

impl RiskSpec {
    pub fn label(&self) -> String {
        alloc::format!("{}{}", self.kind.tag(), self.level)
    }
}

/// Resolution of the tabulated boundary used for setting-A queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableSpec {
    pub spacing: f64,
    /// Nodes are computed within this radius of the diagonal.
    pub radius: f64,
}

impl Default for TableSpec {
    fn default() -> Self {
        Self { spacing: 0.75, radius: 6.0 }
    }
}

/// Full description of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub setting: Setting,
    pub d: usize,
    pub periods: usize,
    pub replications: usize,
    pub mu_corr: f64,
    pub beta: f64,
    pub seed: u64,
    pub risks: Vec<RiskSpec>,
    pub pi: PiSpec,
    pub forecast_draws: usize,
    pub network: NetworkParams,
    pub level: f64,
    pub table: TableSpec,
}

fn default_risks() -> Vec<RiskSpec> {
    vec![
        RiskSpec { kind: RiskKind::VaR, level: 0.01 },
        RiskSpec { kind: RiskKind::VaR, level: 0.05 },
        RiskSpec { kind: RiskKind::ExpectileVaR, level: 0.01 },
        RiskSpec { kind: RiskKind::ExpectileVaR, level: 0.05 },
    ]
}

impl ScenarioConfig {
    /// Desk-scale defaults for setting A.
    pub fn setting_a() -> Self {
        Self {
            setting: Setting::A,
            d: 5,
            periods: 250,
            replications: 200,
            mu_corr: 0.5,
            beta: 0.75,
            seed: 20_240_601,
            risks: default_risks(),
            pi: PiSpec::Gaussian { mean: 2.0, cov_scale: 1.0, size: 20_000, seed: None },
            forecast_draws: 10_000,
            network: NetworkParams::default(),
            level: 0.05,
            table: TableSpec::default(),
        }
    }

    /// Desk-scale defaults for setting B.
    pub fn setting_b() -> Self {
        Self {
            setting: Setting::B,
            replications: 20,
            pi: PiSpec::Gaussian { mean: 2.0, cov_scale: 1.0, size: 1_000, seed: None },
            forecast_draws: 500,
            ..Self::setting_a()
        }
    }

    /// Defaults of the two-dimensional Murphy study.
    pub fn murphy() -> Self {
        Self {
            d: 2,
            replications: 1,
            risks: vec![RiskSpec { kind: RiskKind::VaR, level: 0.05 }],
            pi: PiSpec::Grid { lo: -5.0, hi: 5.0, resolution: 41 },
            ..Self::setting_a()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if self.periods < 2 {
            return Err(Error::invalid("need at least two periods"));
        }
        if self.replications == 0 || self.forecast_draws == 0 {
            return Err(Error::invalid("replications and forecast draws must be positive"));
        }
        if self.risks.is_empty() {
            return Err(Error::invalid("risk list is empty"));
        }
        for r in &self.risks {
            ScalarRiskMeasure::new(r.kind, r.level, 0.0)?;
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid("significance level must lie in (0, 1)"));
        }
        Aggregation::weighted_pos_neg(self.beta)?;
        if !(self.mu_corr.is_finite()) {
            return Err(Error::invalid("correlation must be finite"));
        }
        cholesky(&equicorrelation(self.d, self.mu_corr), self.d)?;
        if self.setting == Setting::B {
            let n = &self.network;
            if !(0.0..=1.0).contains(&n.edge_prob) || !(n.nominal >= 0.0) || !(n.society >= 0.0) {
                return Err(Error::invalid("invalid network parameters"));
            }
            if !(n.society > 0.0) {
                return Err(Error::invalid("society liabilities must be positive"));
            }
        }
        if !(self.table.spacing > 0.0 && self.table.radius > 0.0) {
            return Err(Error::invalid("table spacing and radius must be positive"));
        }
        Ok(())
    }

    /// Covariance of `mu_t`.
    pub fn sigma_mu(&self) -> Vec<f64> {
        equicorrelation(self.d, self.mu_corr)
    }

    /// Unconditional covariance of `Y_t` in setting A.
    pub fn sigma_y(&self) -> Vec<f64> {
        let mut s = self.sigma_mu();
        for i in 0..self.d {
            s[i * self.d + i] += 1.0;
        }
        s
    }
}

/// One period of the data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct Period {
    pub mu: Vec<f64>,
    pub y: Vec<f64>,
}

/// Draw `(mu_t, Y_t)`; `chol_mu` is the lower Cholesky factor of `Sigma_mu`.
pub fn simulate_period<R: Rng + ?Sized>(setting: Setting, chol_mu: &[f64], d: usize, rng: &mut R) -> Period {
    let g = normal_vec(rng, d);
    let mut mu = vec![0.0; d];
    lower_mul(chol_mu, d, &g, &mut mu);
    let eps = normal_vec(rng, d);
    let y = mu
        .iter()
        .zip(&eps)
        .map(|(m, e)| match setting {
            Setting::A => m + e,
            Setting::B => (m + e) * (m + e),
        })
        .collect();
    Period { mu, y }
}

fn draw_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, chol: Option<&[f64]>) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * d);
    let mut buf = vec![0.0; d];
    for _ in 0..n {
        let g = normal_vec(rng, d);
        match chol {
            Some(l) => {
                lower_mul(l, d, &g, &mut buf);
                out.extend_from_slice(&buf);
            }
            None => out.extend_from_slice(&g),
        }
    }
    out
}

/// The three forecasters of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Forecaster {
    Anne,
    Bob,
    Celia,
}

impl Forecaster {
    pub fn name(self) -> &'static str {
        match self {
            Forecaster::Anne => "anne",
            Forecaster::Bob => "bob",
            Forecaster::Celia => "celia",
        }
    }
}

/// Frozen setting-A forecast sets: `base = R(N(0, I))`, `bob = R(N(0, Sigma))`.
#[derive(Debug, Clone)]
pub struct BaseSets {
    pub base: UpperSet,
    pub bob: UpperSet,
}

impl BaseSets {
    pub fn build(cfg: &ScenarioConfig, m: &SystemicMeasure) -> Result<Self> {
        let d = cfg.d;
        let z = draw_matrix(&mut stream(cfg.seed, STREAM_ANNE, 0), cfg.forecast_draws, d, None);
        let l = cholesky(&cfg.sigma_y(), d)?;
        let w = draw_matrix(&mut stream(cfg.seed, STREAM_BOB, 0), cfg.forecast_draws, d, Some(&l));
        Ok(Self {
            base: m.forecast_set(EmpiricalDistribution::new(z, d)?)?,
            bob: m.forecast_set(EmpiricalDistribution::new(w, d)?)?,
        })
    }

    /// Setting-A forecast of `who` given `mu_t`.
    pub fn make_forecaster(&self, who: Forecaster, mu: &[f64]) -> UpperSet {
        match who {
            Forecaster::Anne => {
                let neg: Vec<f64> = mu.iter().map(|x| -x).collect();
                self.base.translated(&neg)
            }
            Forecaster::Bob => self.bob.clone(),
            Forecaster::Celia => self.base.translated(mu),
        }
    }
}

/// Boundary of an empirical upper set tabulated over the complement of the
/// diagonal and interpolated multilinearly.
///
/// A query `q` is decomposed as `q = s e + sum_m u_m b_m` with `e = 1/sqrt(d)`
/// and `b_m` an orthonormal basis of the complement; it is declared a member
/// iff `s >= H(u)`, where `H` interpolates exact boundary heights at grid
/// nodes. Queries whose cell is not tabulated are answered exactly.
#[derive(Debug, Clone)]
pub struct BoundaryTable {
    d: usize,
    e: f64,
    basis: Vec<Vec<f64>>,
    spacing: f64,
    extent: f64,
    nodes: usize,
    heights: Vec<f64>,
    cell_lo: Vec<f64>,
    cell_hi: Vec<f64>,
    offsets: Vec<usize>,
    exact: UpperSet,
    evals: usize,
}

/// Largest complement dimension a boundary table supports.
pub const MAX_TABLE_DIM: usize = 6;

/// Grid cell of a query: flat index of its lowest corner and offsets within it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    base: usize,
    frac: [f64; MAX_TABLE_DIM],
}

/// Coordinates of a query in the table frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCoords {
    pub s: f64,
    pub u: Vec<f64>,
}

impl BoundaryTable {
    pub fn build(set: &UpperSet, spec: &TableSpec) -> Result<Self> {
        let data = set
            .empirical_data()
            .ok_or_else(|| Error::Precondition("boundary tables need an empirical set".into()))?;
        let d = data.scenarios.dim();
        if d < 2 || d > MAX_TABLE_DIM + 1 {
            return Err(Error::Precondition("boundary tables need 2 <= d <= 7".into()));
        }
        let ones = vec![1.0; d];
        let basis = orthogonal_complement(&ones);
        let per_axis = 2 * libm::ceil(spec.radius / spec.spacing) as usize + 1;
        let extent = spec.spacing * ((per_axis - 1) / 2) as f64;
        let dm = d - 1;
        let total = per_axis
            .checked_pow(dm as u32)
            .filter(|&t| t <= 50_000_000)
            .ok_or_else(|| Error::invalid("boundary table too large"))?;
        let e = 1.0 / libm::sqrt(d as f64);
        let mut heights = vec![f64::NAN; total];
        let mut solver = HeightSolver::new(set)?;
        let mut idx = vec![0usize; dm];
        let mut u = vec![0.0; dm];
        for flat in 0..total {
            let mut rem = flat;
            for m in 0..dm {
                idx[m] = rem % per_axis;
                rem /= per_axis;
                u[m] = -extent + idx[m] as f64 * spec.spacing;
            }
            // every corner of a cell touching the ball is needed
            let r2: f64 = u.iter().map(|x| { let t = (libm::fabs(*x) - spec.spacing).max(0.0); t * t }).sum();
            if r2 > spec.radius * spec.radius {
                continue;
            }
            // warm start by extrapolating tabulated neighbours
            let mut guess = 0.0;
            let mut stride = 1;
            for m in 0..dm {
                if idx[m] > 0 && !heights[flat - stride].is_nan() {
                    let h1 = heights[flat - stride];
                    guess = if idx[m] > 1 && !heights[flat - 2 * stride].is_nan() {
                        2.0 * h1 - heights[flat - 2 * stride]
                    } else {
                        h1
                    };
                    break;
                }
                stride *= per_axis;
            }
            let mut x = vec![0.0; d];
            for (b, um) in basis.iter().zip(&u) {
                for (xj, bj) in x.iter_mut().zip(b) {
                    *xj += um * bj;
                }
            }
            if let Some(s) = solver.height(&x, e, guess)? {
                heights[flat] = s;
            }
        }
        let offsets: Vec<usize> = (0..1usize << dm)
            .map(|c| (0..dm).filter(|m| c >> m & 1 == 1).map(|m| per_axis.pow(m as u32)).sum())
            .collect();
        // per-cell corner extremes; NaN bounds never certify
        let mut cell_lo = vec![f64::NAN; total];
        let mut cell_hi = vec![f64::NAN; total];
        for base in 0..total {
            let mut rem = base;
            let interior = (0..dm).all(|_| {
                let i = rem % per_axis;
                rem /= per_axis;
                i + 1 < per_axis
            });
            if !interior {
                continue;
            }
            let corners = offsets.iter().map(|o| heights[base + o]);
            if corners.clone().any(f64::is_nan) {
                continue;
            }
            cell_lo[base] = corners.clone().fold(f64::INFINITY, f64::min);
            cell_hi[base] = corners.fold(f64::NEG_INFINITY, f64::max);
        }
        Ok(Self {
            d,
            e,
            basis,
            spacing: spec.spacing,
            extent,
            nodes: per_axis,
            heights,
            cell_lo,
            cell_hi,
            offsets,
            exact: set.clone(),
            evals: solver.evals,
        })
    }

    pub fn coords(&self, q: &[f64]) -> TableCoords {
        TableCoords {
            s: q.iter().sum::<f64>() * self.e,
            u: self.basis.iter().map(|b| b.iter().zip(q).map(|(x, y)| x * y).sum()).collect(),
        }
    }

    /// Grid cell containing the complement coordinates `u`.
    pub fn locate(&self, u: &[f64]) -> Option<Cell> {
        let mut cell = Cell { base: 0, frac: [0.0; MAX_TABLE_DIM] };
        let mut stride = 1usize;
        for (m, um) in u.iter().enumerate().take(self.d - 1) {
            let g = (um + self.extent) / self.spacing;
            if !(g >= 0.0) {
                return None;
            }
            let mut i = libm::floor(g) as usize;
            if i + 1 >= self.nodes {
                if i + 1 == self.nodes && g == i as f64 {
                    i -= 1;
                } else {
                    return None;
                }
            }
            cell.frac[m] = g - i as f64;
            cell.base += i * stride;
            stride *= self.nodes;
        }
        Some(cell)
    }

    /// Whether cells located by `other` index this table identically.
    pub fn same_grid(&self, other: &BoundaryTable) -> bool {
        self.d == other.d && self.spacing == other.spacing && self.extent == other.extent && self.basis == other.basis
    }

    fn interpolate(&self, cell: &Cell) -> Option<f64> {
        let dm = self.d - 1;
        let mut vals = [0.0f64; 1 << MAX_TABLE_DIM];
        for (v, off) in vals.iter_mut().zip(&self.offsets) {
            *v = self.heights[cell.base + off];
            if v.is_nan() {
                return None;
            }
        }
        // reduce one axis at a time
        let mut len = self.offsets.len();
        for m in 0..dm {
            len /= 2;
            let f = cell.frac[m];
            for c in 0..len {
                vals[c] = vals[2 * c] + f * (vals[2 * c + 1] - vals[2 * c]);
            }
        }
        Some(vals[0])
    }

    /// Interpolated boundary height, `None` outside the tabulated region.
    pub fn height(&self, u: &[f64]) -> Option<f64> {
        self.interpolate(&self.locate(u)?)
    }

    /// Membership of `q`, interpolated inside the table and exact outside.
    pub fn contains(&self, q: &[f64]) -> Result<bool> {
        let c = self.coords(q);
        self.contains_located(self.locate(&c.u).as_ref(), c.s, q)
    }

    /// [`BoundaryTable::contains`] for a query with diagonal coordinate `s`
    /// already located in `cell`.
    pub fn contains_located(&self, cell: Option<&Cell>, s: f64, q: &[f64]) -> Result<bool> {
        if let Some(cell) = cell {
            let (lo, hi) = (self.cell_lo[cell.base], self.cell_hi[cell.base]);
            if s >= hi {
                return Ok(true);
            }
            if s < lo {
                return Ok(false);
            }
            if let Some(h) = self.interpolate(cell) {
                return Ok(s >= h);
            }
        }
        self.exact.contains(q)
    }

    /// Number of margin evaluations spent building the table.
    pub fn evaluations(&self) -> usize {
        self.evals
    }

    /// Number of tabulated nodes.
    pub fn tabulated(&self) -> usize {
        self.heights.iter().filter(|h| !h.is_nan()).count()
    }

    /// Fraction of tabulated nodes.
    pub fn coverage(&self) -> f64 {
        self.heights.iter().filter(|h| !h.is_nan()).count() as f64 / self.heights.len() as f64
    }
}

/// Absolute tolerance of tabulated boundary heights.
pub const HEIGHT_TOL: f64 = 1e-5;

/// Root finder for the boundary height along the diagonal.
struct HeightSolver<'a> {
    rho: ScalarRiskMeasure,
    lambda: &'a Aggregation,
    scenarios: &'a EmpiricalDistribution,
    vals: Vec<f64>,
    slopes: Vec<f64>,
    scratch: Vec<f64>,
    point: Vec<f64>,
    evals: usize,
}

impl<'a> HeightSolver<'a> {
    fn new(set: &'a UpperSet) -> Result<Self> {
        let data = set.empirical_data().ok_or_else(|| Error::Precondition("empirical set required".into()))?;
        let n = data.scenarios.len();
        Ok(Self {
            rho: data.rho,
            lambda: &data.lambda,
            scenarios: &data.scenarios,
            vals: Vec::with_capacity(n),
            slopes: Vec::with_capacity(n),
            scratch: Vec::with_capacity(n),
            point: vec![0.0; data.scenarios.dim()],
            evals: 0,
        })
    }

    /// Continuous, non-decreasing function of `s` whose sign decides
    /// membership, with its right derivative when the aggregation is separable.
    fn signed(&mut self, x: &[f64], e: f64, s: f64) -> Result<(f64, Option<f64>)> {
        self.evals += 1;
        for (p, xj) in self.point.iter_mut().zip(x) {
            *p = xj + s * e;
        }
        self.vals.clear();
        self.slopes.clear();
        let point = &self.point;
        let separable = match self.lambda {
            Aggregation::Sum => {
                for z in self.scenarios.rows() {
                    self.vals.push(z.iter().zip(point).map(|(a, b)| a + b).sum::<f64>());
                }
                self.slopes.resize(self.vals.len(), point.len() as f64 * e);
                true
            }
            Aggregation::WeightedPosNeg { beta } => {
                let (up, down) = ((1.0 - beta) * e, beta * e);
                for z in self.scenarios.rows() {
                    let (mut v, mut g) = (0.0, 0.0);
                    for (a, b) in z.iter().zip(point) {
                        let y = a + b;
                        v += weighted(*beta, y);
                        g += if y >= 0.0 { up } else { down };
                    }
                    self.vals.push(v);
                    self.slopes.push(g);
                }
                true
            }
            Aggregation::EisenbergNoe(_) => {
                for z in self.scenarios.rows() {
                    self.vals.push(self.lambda.aggregate_shifted(z, point)?);
                }
                false
            }
        };
        let a = self.rho.shift();
        Ok(match self.rho.kind() {
            RiskKind::VaR => {
                self.scratch.clear();
                self.scratch.extend_from_slice(&self.vals);
                let v = order_stat(&self.scratch, var_index(self.rho.level(), self.vals.len()));
                let g = if separable { self.vals.iter().position(|&x| x == v).map(|i| self.slopes[i]) } else { None };
                (v - a, g)
            }
            RiskKind::ExpectileVaR => {
                let tau = self.rho.level();
                let n = self.vals.len() as f64;
                let g = separable.then(|| {
                    self.vals
                        .iter()
                        .zip(&self.slopes)
                        .map(|(&x, &g)| if x > a { tau * g } else { (1.0 - tau) * g })
                        .sum::<f64>()
                        / n
                });
                (expectile_foc(&self.vals, tau, a), g)
            }
            RiskKind::ExpectedShortfall => (margin_of_sample(&self.rho, &self.vals)?, None),
        })
    }

    /// Smallest `s` with `x + s e` in the set, to [`HEIGHT_TOL`], or `None` if
    /// no sign change is found.
    ///
    /// Newton steps (secant steps without a derivative) safeguarded by the
    /// bracket collected so far.
    fn height(&mut self, x: &[f64], e: f64, guess: f64) -> Result<Option<f64>> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut s = guess;
        let mut prev: Option<(f64, f64)> = None;
        let mut step = 0.05;
        let mut widths = [f64::INFINITY; 2];
        for _ in 0..200 {
            let (f, g) = self.signed(x, e, s)?;
            if f >= 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            if f == 0.0 || hi - lo <= HEIGHT_TOL {
                return Ok(Some(hi));
            }
            let slope = match (g, prev) {
                (Some(g), _) if g > 0.0 => Some(g),
                (_, Some((sp, fp))) if s != sp && (f - fp) / (s - sp) > 0.0 => Some((f - fp) / (s - sp)),
                _ => None,
            };
            prev = Some((s, f));
            let mut t = match slope {
                Some(g) => s - f / g,
                None => f64::NAN,
            };
            let width = hi - lo;
            let stalled = width > 0.5 * widths[0];
            widths = [widths[1], width];
            if !(t > lo && t < hi) || (width.is_finite() && stalled) {
                if lo.is_finite() && hi.is_finite() {
                    t = 0.5 * (lo + hi);
                } else {
                    t = if f >= 0.0 { s - step } else { s + step };
                    step *= 2.0;
                    if step > 1e4 {
                        return Ok(None);
                    }
                }
            }
            if libm::fabs(t - s) <= 0.5 * HEIGHT_TOL {
                // Newton has converged onto a linear piece
                return Ok(Some(if f >= 0.0 { s } else { t }));
            }
            s = t;
        }
        Ok(if hi.is_finite() { Some(hi) } else { None })
    }
}

/// Per-replication outcome for one risk measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskOutcome {
    pub dm: DmResult,
    /// `H0: A ⪰ B` rejected (Anne significantly better).
    pub reject_a_ge_b: bool,
    /// `H0: A ⪯ B` rejected (Bob significantly better).
    pub reject_a_le_b: bool,
}

/// Outcome of one replication, one entry per configured risk measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub risks: Vec<RiskOutcome>,
}

/// A row of the rejection-rate table.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub risk: RiskSpec,
    pub lambda: &'static str,
    pub hypothesis: &'static str,
    pub rate: f64,
}

/// Rejection rates and raw statistics of a Table 1 run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<RateRow>,
    pub replications: Vec<ReplicationOutcome>,
}

pub const HYPOTHESIS_A_GE_B: &str = "A>=B";
pub const HYPOTHESIS_A_LE_B: &str = "A<=B";

/// Frozen per-risk state of a setting-A experiment.
pub struct RiskContext {
    measure: SystemicMeasure,
    table: BoundaryTable,
    bob: Vec<bool>,
}

/// Maps `f` over `0..n`, possibly in parallel, returning results in index order.
pub type IndexMap<'f, T> = &'f (dyn Fn(usize) -> T + Sync);

struct ContextB {
    measures: Vec<ScalarRiskMeasure>,
    anne_z: EmpiricalDistribution,
    bob_w: EmpiricalDistribution,
}

/// Frozen state of a Table 1 experiment; replications can run in any order.
pub struct Table1Experiment {
    cfg: ScenarioConfig,
    chol_mu: Vec<f64>,
    pi: MixtureMeasure,
    lambda1: Aggregation,
    a: Vec<RiskContext>,
    b: Option<ContextB>,
}

impl Table1Experiment {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        Self::new_with(cfg, |n, f| (0..n).map(f).collect())
    }

    /// [`Table1Experiment::new`] with a caller-supplied map over the risk
    /// measures, so boundary tables can be built concurrently.
    pub fn new_with<M>(cfg: ScenarioConfig, map: M) -> Result<Self>
    where
        M: FnOnce(usize, IndexMap<'_, Result<RiskContext>>) -> Vec<Result<RiskContext>>,
    {
        cfg.validate()?;
        let d = cfg.d;
        let chol_mu = cholesky(&cfg.sigma_mu(), d)?;
        let pi = cfg.pi.build(d, cfg.seed)?;
        let lambda1 = Aggregation::weighted_pos_neg(cfg.beta)?;
        let mut a = Vec::new();
        let mut b = None;
        match cfg.setting {
            Setting::A => {
                let build = |i: usize| -> Result<RiskContext> {
                    let r = cfg.risks[i];
                    let m = SystemicMeasure::new(ScalarRiskMeasure::new(r.kind, r.level, 0.0)?, lambda1.clone());
                    let sets = BaseSets::build(&cfg, &m)?;
                    let table = BoundaryTable::build(&sets.base, &cfg.table)?;
                    let bob = pi.memberships(&sets.bob)?;
                    Ok(RiskContext { measure: m, table, bob })
                };
                a = map(cfg.risks.len(), &build).into_iter().collect::<Result<Vec<_>>>()?;
                if a.iter().any(|c| !c.table.same_grid(&a[0].table)) {
                    return Err(Error::Precondition("boundary tables must share one grid".into()));
                }
            }
            Setting::B => {
                let z = draw_matrix(&mut stream(cfg.seed, STREAM_ANNE, 0), cfg.forecast_draws, d, None);
                let l = cholesky(&cfg.sigma_y(), d)?;
                let mut w = draw_matrix(&mut stream(cfg.seed, STREAM_BOB, 0), cfg.forecast_draws, d, Some(&l));
                w.iter_mut().for_each(|x| *x *= *x);
                let measures = cfg
                    .risks
                    .iter()
                    .map(|r| ScalarRiskMeasure::new(r.kind, r.level, 0.0))
                    .collect::<Result<Vec<_>>>()?;
                b = Some(ContextB {
                    measures,
                    anne_z: EmpiricalDistribution::new(z, d)?,
                    bob_w: EmpiricalDistribution::new(w, d)?,
                });
            }
        }
        Ok(Self { cfg, chol_mu, pi, lambda1, a, b })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn pi(&self) -> &MixtureMeasure {
        &self.pi
    }

    /// Boundary table of the `i`-th risk measure (setting A).
    pub fn table(&self, i: usize) -> Option<&BoundaryTable> {
        self.a.get(i).map(|c| &c.table)
    }

    /// Aggregation label used in result tables.
    pub fn lambda_tag(&self) -> &'static str {
        match self.cfg.setting {
            Setting::A => self.lambda1.tag(),
            Setting::B => "lambda2",
        }
    }

    /// Observations of replication `rep`.
    pub fn periods(&self, rep: usize) -> Vec<Period> {
        let mut rng = stream(self.cfg.seed, STREAM_REP, rep as u64);
        (0..self.cfg.periods).map(|_| simulate_period(self.cfg.setting, &self.chol_mu, self.cfg.d, &mut rng)).collect()
    }

    /// Liability network of replication `rep` (setting B).
    pub fn network(&self, rep: usize) -> Result<LiabilityNetwork> {
        let n = &self.cfg.network;
        let mut rng = stream(self.cfg.seed, STREAM_NET, rep as u64);
        LiabilityNetwork::random(self.cfg.d, n.edge_prob, n.nominal, n.society, &mut rng)
    }

    /// Per-period score differences `S(Anne) - S(Bob)` for every risk measure.
    pub fn score_differences(&self, rep: usize) -> Result<Vec<Vec<f64>>> {
        match self.cfg.setting {
            Setting::A => self.diffs_a(rep),
            Setting::B => self.diffs_b(rep),
        }
    }

    pub fn run_replication(&self, rep: usize) -> Result<ReplicationOutcome> {
        let diffs = self.score_differences(rep)?;
        let level = self.cfg.level;
        let risks = diffs
            .iter()
            .map(|d| {
                let dm = dm_test(d)?;
                Ok(RiskOutcome { dm, reject_a_ge_b: dm.rejects_f1_ge_f2(level), reject_a_le_b: dm.rejects_f1_le_f2(level) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ReplicationOutcome { replication: rep, risks })
    }

    /// Aggregate replication outcomes (in any order) into rejection rates.
    pub fn summarize(&self, mut outcomes: Vec<ReplicationOutcome>) -> ExperimentResult {
        outcomes.sort_by_key(|o| o.replication);
        let n = outcomes.len().max(1) as f64;
        let mut rows = Vec::new();
        for (i, r) in self.cfg.risks.iter().enumerate() {
            let ge = outcomes.iter().filter(|o| o.risks[i].reject_a_ge_b).count() as f64 / n;
            let le = outcomes.iter().filter(|o| o.risks[i].reject_a_le_b).count() as f64 / n;
            rows.push(RateRow { risk: *r, lambda: self.lambda_tag(), hypothesis: HYPOTHESIS_A_GE_B, rate: ge });
            rows.push(RateRow { risk: *r, lambda: self.lambda_tag(), hypothesis: HYPOTHESIS_A_LE_B, rate: le });
        }
        ExperimentResult { rows, replications: outcomes }
    }

    fn diffs_a(&self, rep: usize) -> Result<Vec<Vec<f64>>> {
        let periods = self.periods(rep);
        let d = self.cfg.d;
        let table0 = &self.a[0].table;
        let atom_coords: Vec<TableCoords> = self.pi.iter().map(|(k, _)| table0.coords(k)).collect();
        let mut out = vec![Vec::with_capacity(periods.len()); self.a.len()];
        let mut q = vec![0.0; d];
        let mut c = TableCoords { s: 0.0, u: vec![0.0; d - 1] };
        let mut sums = vec![0.0; self.a.len()];
        for p in &periods {
            let mc = table0.coords(&p.mu);
            sums.iter_mut().for_each(|s| *s = 0.0);
            for (j, (k, w)) in self.pi.iter().enumerate() {
                for ((qi, ki), mi) in q.iter_mut().zip(k).zip(&p.mu) {
                    *qi = ki + mi;
                }
                c.s = atom_coords[j].s + mc.s;
                for ((cu, au), mu) in c.u.iter_mut().zip(&atom_coords[j].u).zip(&mc.u) {
                    *cu = au + mu;
                }
                let cell = table0.locate(&c.u);
                let mut lam = None;
                for (r, ctx) in self.a.iter().enumerate() {
                    let in_anne = ctx.table.contains_located(cell.as_ref(), c.s, &q)?;
                    let in_bob = ctx.bob[j];
                    if in_anne != in_bob {
                        let z = match lam {
                            Some(z) => z,
                            None => {
                                let z = self.lambda1.aggregate_shifted(&p.y, k)?;
                                lam = Some(z);
                                z
                            }
                        };
                        let v = ctx.measure.rho.identification(0.0, z)?;
                        sums[r] += if in_bob { w * v } else { -w * v };
                    }
                }
            }
            for (o, s) in out.iter_mut().zip(&sums) {
                o.push(*s);
            }
        }
        Ok(out)
    }

    fn diffs_b(&self, rep: usize) -> Result<Vec<Vec<f64>>> {
        let ctx = self.b.as_ref().expect("setting B context");
        let periods = self.periods(rep);
        let net = self.network(rep)?;
        let shift = self.cfg.network.shift_fraction * net.total_society();
        let measures = ctx
            .measures
            .iter()
            .map(|r| r.with_shift(shift))
            .collect::<Result<Vec<_>>>()?;
        let lambda = Aggregation::eisenberg_noe(net);
        let mut eval = SampleDecider::new(&lambda, &measures);
        let bob: Vec<Vec<bool>> = self
            .pi
            .iter()
            .map(|(k, _)| eval.decide(ctx.bob_w.rows(), k))
            .collect::<Result<Vec<_>>>()?;
        let d = self.cfg.d;
        let mut out = vec![Vec::with_capacity(periods.len()); measures.len()];
        let mut scen = vec![0.0; ctx.anne_z.values().len()];
        for p in &periods {
            for (row, z) in scen.chunks_exact_mut(d).zip(ctx.anne_z.rows()) {
                for ((s, zi), mi) in row.iter_mut().zip(z).zip(&p.mu) {
                    *s = (mi + zi) * (mi + zi);
                }
            }
            let mut sums = vec![0.0; measures.len()];
            for (j, (k, w)) in self.pi.iter().enumerate() {
                let anne = eval.decide(scen.chunks_exact(d), k)?;
                let mut lam = None;
                for (r, rho) in measures.iter().enumerate() {
                    if anne[r] != bob[j][r] {
                        let z = match lam {
                            Some(z) => z,
                            None => {
                                let z = lambda.aggregate_shifted(&p.y, k)?;
                                lam = Some(z);
                                z
                            }
                        };
                        let v = rho.identification(0.0, z)?;
                        sums[r] += if bob[j][r] { w * v } else { -w * v };
                    }
                }
            }
            for (o, s) in out.iter_mut().zip(&sums) {
                o.push(*s);
            }
        }
        Ok(out)
    }

    /// All replications in index order.
    pub fn run_all(&self) -> Result<ExperimentResult> {
        let outcomes = (0..self.cfg.replications).map(|r| self.run_replication(r)).collect::<Result<Vec<_>>>()?;
        Ok(self.summarize(outcomes))
    }
}

/// Decides acceptance of `Lambda(Z + k)` for several risk measures from one sample.
struct SampleDecider<'a> {
    lambda: &'a Aggregation,
    measures: &'a [ScalarRiskMeasure],
    buf: Vec<f64>,
    point: Vec<f64>,
}

impl<'a> SampleDecider<'a> {
    fn new(lambda: &'a Aggregation, measures: &'a [ScalarRiskMeasure]) -> Self {
        Self { lambda, measures, buf: Vec::new(), point: Vec::new() }
    }

    fn decide<'r>(&mut self, rows: impl Iterator<Item = &'r [f64]>, k: &[f64]) -> Result<Vec<bool>> {
        self.buf.clear();
        for z in rows {
            self.point.clear();
            self.point.extend(z.iter().zip(k).map(|(a, b)| a + b));
            self.buf.push(self.lambda.aggregate(&self.point)?);
        }
        self.measures.iter().map(|m| accepts_sample(m, &self.buf)).collect()
    }
}

/// `run_table1`: every replication in sequence.
pub fn run_table1(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    Table1Experiment::new(cfg.clone())?.run_all()
}

/// Forecaster pairs of the Murphy study, inferior forecaster first.
pub const MURPHY_PAIRS: [(Forecaster, Forecaster); 3] =
    [(Forecaster::Bob, Forecaster::Anne), (Forecaster::Celia, Forecaster::Anne), (Forecaster::Celia, Forecaster::Bob)];

/// Murphy diagram of one forecaster pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MurphyPair {
    pub f1: Forecaster,
    pub f2: Forecaster,
    pub grid: MurphyGrid,
}

/// Murphy diagrams and traffic-light zones for the three pairs.
///
/// The grid is taken from the `pi` specification (a box grid by default) and
/// only the first configured risk measure is used.
pub fn run_murphy_experiment(cfg: &ScenarioConfig) -> Result<Vec<MurphyPair>> {
    cfg.validate()?;
    if cfg.setting != Setting::A {
        return Err(Error::Precondition("the Murphy study uses setting A".into()));
    }
    let d = cfg.d;
    let r = cfg.risks[0];
    let lambda = Aggregation::weighted_pos_neg(cfg.beta)?;
    let m = SystemicMeasure::new(ScalarRiskMeasure::new(r.kind, r.level, 0.0)?, lambda);
    let sets = BaseSets::build(cfg, &m)?;
    let grid_measure = cfg.pi.build(d, cfg.seed)?;
    let grid: Vec<Vec<f64>> = grid_measure.iter().map(|(k, _)| k.to_vec()).collect();
    let chol = cholesky(&cfg.sigma_mu(), d)?;
    let mut rng = stream(cfg.seed, STREAM_MURPHY, 0);
    let periods: Vec<Period> = (0..cfg.periods).map(|_| simulate_period(Setting::A, &chol, d, &mut rng)).collect();
    let obs: Vec<Vec<f64>> = periods.iter().map(|p| p.y.clone()).collect();

    let bob_row = grid.iter().map(|k| sets.bob.contains(k)).collect::<Result<Vec<_>>>()?;
    let bob = vec![bob_row; periods.len()];
    let shifted = |sign: f64| -> Result<Vec<Vec<bool>>> {
        let mut q = vec![0.0; d];
        periods
            .iter()
            .map(|p| {
                grid.iter()
                    .map(|k| {
                        for ((qi, ki), mi) in q.iter_mut().zip(k).zip(&p.mu) {
                            *qi = ki + sign * mi;
                        }
                        sets.base.contains(&q)
                    })
                    .collect()
            })
            .collect()
    };
    let anne = shifted(1.0)?;
    let celia = shifted(-1.0)?;
    let pick = |f: Forecaster| match f {
        Forecaster::Anne => &anne,
        Forecaster::Bob => &bob,
        Forecaster::Celia => &celia,
    };
    MURPHY_PAIRS
        .iter()
        .map(|&(f1, f2)| {
            let grid = murphy_from_memberships(&m, &grid, pick(f1), pick(f2), &obs, cfg.level)?;
            Ok(MurphyPair { f1, f2, grid })
        })
        .collect()
}

/// Convenience: Arc-wrapped distribution.
pub fn shared(dist: EmpiricalDistribution) -> Arc<EmpiricalDistribution> {
    Arc::new(dist)
}
