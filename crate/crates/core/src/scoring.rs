//! Exhaustive scores for set-valued forecasts.
//!
//! The elementary score at an allocation `k` compares membership of `k` in the
//! forecast `A` with membership in the realized set `R(y)`, weighted by the
//! identification function:
//!
//! `S_k(A, y) = (1{k in R(y) \ A} - 1{k in A \ R(y)}) V_{R_0}(k, y)`.
//!
//! Mixture scores integrate elementary scores against a measure `pi`, which
//! is discretized as a weighted atom cloud. Score differences are always
//! accumulated atom by atom.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::aggregation::Aggregation;
use crate::data::EmpiricalDistribution;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::scalar_risk::ScalarRiskMeasure;
use crate::systemic::SystemicMeasure;
use crate::upper_set::UpperSet;

/// How a [`MixtureMeasure`] was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    GaussianMc { mean: Vec<f64>, cov_scale: f64, size: usize, seed: u64 },
    BoxGrid { lo: Vec<f64>, hi: Vec<f64>, resolution: usize, cell_weight: f64 },
    Atom,
    Empty,
    Custom,
}

/// A weighted point cloud `{(k_j, w_j)}` standing in for the measure `pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureMeasure {
    d: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
    provenance: Provenance,
}

impl MixtureMeasure {
    pub fn from_atoms(d: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if d == 0 || atoms.len() != d * weights.len() {
            return Err(Error::invalid("atom matrix does not match weights"));
        }
        check_finite(&atoms, "atoms")?;
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        Ok(Self { d, atoms, weights, provenance: Provenance::Custom })
    }

    /// `size` draws from `N(mean, cov_scale * I)`, each with weight `1/size`.
    pub fn gaussian(mean: &[f64], cov_scale: f64, size: usize, seed: u64) -> Result<Self> {
        if size == 0 || !(cov_scale >= 0.0) || mean.is_empty() {
            return Err(Error::invalid("Gaussian cloud needs positive size and non-negative scale"));
        }
        check_finite(mean, "cloud mean")?;
        let d = mean.len();
        let sd = libm::sqrt(cov_scale);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut atoms = Vec::with_capacity(size * d);
        for _ in 0..size {
            for m in mean {
                let g: f64 = StandardNormal.sample(&mut rng);
                atoms.push(m + sd * g);
            }
        }
        Ok(Self {
            d,
            atoms,
            weights: vec![1.0 / size as f64; size],
            provenance: Provenance::GaussianMc { mean: mean.to_vec(), cov_scale, size, seed },
        })
    }

    /// Regular grid with `resolution` nodes per axis including the bounds;
    /// every node carries the cell volume as weight.
    pub fn box_grid(lo: &[f64], hi: &[f64], resolution: usize) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() || resolution < 2 || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
            return Err(Error::invalid("box grid needs lo < hi and at least two nodes per axis"));
        }
        let d = lo.len();
        let h: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (b - a) / (resolution - 1) as f64).collect();
        let cell: f64 = h.iter().product();
        let total = resolution.pow(d as u32);
        let mut atoms = Vec::with_capacity(total * d);
        for flat in 0..total {
            let mut rem = flat;
            let start = atoms.len();
            atoms.resize(start + d, 0.0);
            for j in (0..d).rev() {
                let i = rem % resolution;
                rem /= resolution;
                atoms[start + j] = lo[j] + i as f64 * h[j];
            }
        }
        Ok(Self {
            d,
            atoms,
            weights: vec![cell; total],
            provenance: Provenance::BoxGrid { lo: lo.to_vec(), hi: hi.to_vec(), resolution, cell_weight: cell },
        })
    }

    /// Unit point mass at `k`.
    pub fn atom(k: &[f64]) -> Result<Self> {
        check_finite(k, "atom")?;
        Ok(Self { d: k.len(), atoms: k.to_vec(), weights: vec![1.0], provenance: Provenance::Atom })
    }

    /// The zero measure.
    pub fn empty(d: usize) -> Self {
        Self { d, atoms: Vec::new(), weights: Vec::new(), provenance: Provenance::Empty }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom_at(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.d..(j + 1) * self.d]
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.atoms.chunks_exact(self.d.max(1)).zip(self.weights.iter().copied())
    }

    /// Membership of every atom in `set`.
    pub fn memberships(&self, set: &UpperSet) -> Result<Vec<bool>> {
        self.iter().map(|(k, _)| set.contains(k)).collect()
    }
}

/// `S_{R,k}(A, y)`.
pub fn elementary_score(m: &SystemicMeasure, k: &[f64], a: &UpperSet, y: &[f64]) -> Result<f64> {
    elementary_from_membership(m, k, a.contains(k)?, y)
}

/// Elementary score given the forecast's membership of `k`.
pub fn elementary_from_membership(m: &SystemicMeasure, k: &[f64], in_a: bool, y: &[f64]) -> Result<f64> {
    let v = m.v_r0(k, y)?;
    let in_r = m.point_mass_membership(k, y)?;
    Ok(match (in_r, in_a) {
        (true, false) => v,
        (false, true) => -v,
        _ => 0.0,
    })
}

/// `S_{R,pi}(A, y) = sum_j w_j S_{R,k_j}(A, y)`.
pub fn mixture_score(m: &SystemicMeasure, pi: &MixtureMeasure, a: &UpperSet, y: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (k, w) in pi.iter() {
        s += w * elementary_score(m, k, a, y)?;
    }
    Ok(s)
}

/// `S(A, y) - S(B, y)` accumulated over `pi`: positive weight on `B \ A`,
/// negative on `A \ B`.
pub fn score_difference(m: &SystemicMeasure, pi: &MixtureMeasure, a: &UpperSet, b: &UpperSet, y: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (k, w) in pi.iter() {
        let (ia, ib) = (a.contains(k)?, b.contains(k)?);
        if ia != ib {
            let sigma = if ib { 1.0 } else { -1.0 };
            s += w * sigma * m.v_r0(k, y)?;
        }
    }
    Ok(s)
}

/// [`score_difference`] from precomputed atom memberships of both forecasts.
pub fn score_difference_from_memberships(
    m: &SystemicMeasure,
    pi: &MixtureMeasure,
    a: &[bool],
    b: &[bool],
    y: &[f64],
) -> Result<f64> {
    check_dim(pi.len(), a.len())?;
    check_dim(pi.len(), b.len())?;
    let mut s = 0.0;
    for (j, (k, w)) in pi.iter().enumerate() {
        if a[j] != b[j] {
            let sigma = if b[j] { 1.0 } else { -1.0 };
            s += w * sigma * m.v_r0(k, y)?;
        }
    }
    Ok(s)
}

/// A VaR surface `k -> VaR_alpha(Lambda(Y + k) - a)` reported alongside an ES set.
#[derive(Clone)]
pub enum VarSurface {
    /// Empirical VaR over frozen scenarios.
    Empirical { rho: ScalarRiskMeasure, lambda: Aggregation, scenarios: Arc<EmpiricalDistribution> },
    /// VaR of a point mass at `y`: `a - Lambda(y + k)`.
    PointMass { lambda: Aggregation, y: Vec<f64>, shift: f64 },
    /// Arbitrary surface.
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for VarSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarSurface::Empirical { rho, lambda, scenarios } => f
                .debug_struct("Empirical")
                .field("rho", rho)
                .field("lambda", &lambda.tag())
                .field("scenarios", &scenarios.len())
                .finish(),
            VarSurface::PointMass { y, shift, .. } => f.debug_struct("PointMass").field("y", y).field("shift", shift).finish(),
            VarSurface::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl VarSurface {
    /// Empirical surface at level `alpha` with shift `a`.
    pub fn empirical(alpha: f64, shift: f64, lambda: Aggregation, scenarios: Arc<EmpiricalDistribution>) -> Result<Self> {
        let rho = ScalarRiskMeasure::var(alpha)?.with_shift(shift)?;
        Ok(VarSurface::Empirical { rho, lambda, scenarios })
    }

    pub fn custom(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        VarSurface::Custom(Arc::new(f))
    }

    pub fn eval(&self, k: &[f64]) -> Result<f64> {
        match self {
            VarSurface::Empirical { rho, lambda, scenarios } => {
                let xs = scenarios.rows().map(|z| lambda.aggregate_shifted(z, k)).collect::<Result<Vec<_>>>()?;
                rho.value(&xs)
            }
            VarSurface::PointMass { lambda, y, shift } => Ok(shift - lambda.aggregate_shifted(y, k)?),
            VarSurface::Custom(f) => {
                let v = f(k);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite("VaR surface"))
                }
            }
        }
    }

    /// Values at every atom of `pi`, in atom order.
    pub fn tabulate(&self, pi: &MixtureMeasure) -> Result<Vec<f64>> {
        pi.iter().map(|(k, _)| self.eval(k)).collect()
    }
}

/// `S_{alpha,id}(x, y) = (1{y <= x} - alpha)(x - y)`.
pub fn quantile_score(alpha: f64, x: f64, y: f64) -> f64 {
    let ind = if y <= x { 1.0 } else { 0.0 };
    (ind - alpha) * (x - y)
}

/// Scores for the pair (VaR surface, ES acceptance set) at level `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct EsPair {
    pub alpha: f64,
    pub lambda: Aggregation,
    pub shift: f64,
}

impl EsPair {
    pub fn new(alpha: f64, lambda: Aggregation, shift: f64) -> Result<Self> {
        ScalarRiskMeasure::es(alpha)?.with_shift(shift)?;
        Ok(Self { alpha, lambda, shift })
    }

    /// `z = Lambda(y + k) - a`.
    pub fn excess(&self, k: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.lambda.aggregate_shifted(y, k)? - self.shift)
    }

    /// `(u1, u2)` for reported VaR `q` and excess `z`.
    pub fn u(&self, q: f64, z: f64) -> (f64, f64) {
        let hit = if z <= -q { 1.0 } else { 0.0 };
        let u1 = self.alpha - hit;
        let u2 = hit * z / self.alpha + (hit - self.alpha) * q / self.alpha;
        (u1, u2)
    }

    /// `U(v, k, y)`.
    pub fn u_at(&self, v: &VarSurface, k: &[f64], y: &[f64]) -> Result<(f64, f64)> {
        Ok(self.u(v.eval(k)?, self.excess(k, y)?))
    }

    /// `S_k = -1_A(k) u2 + 1{z >= 0} z`; non-negative at point masses.
    pub fn elementary(&self, q: f64, in_a: bool, k: &[f64], y: &[f64]) -> Result<f64> {
        let z = self.excess(k, y)?;
        let (_, u2) = self.u(q, z);
        let mut s = if z >= 0.0 { z } else { 0.0 };
        if in_a {
            s -= u2;
        }
        Ok(s)
    }

    /// [`EsPair::elementary`] evaluating the surface and the set at `k`.
    pub fn elementary_with(&self, v: &VarSurface, a: &UpperSet, k: &[f64], y: &[f64]) -> Result<f64> {
        self.elementary(v.eval(k)?, a.contains(k)?, k, y)
    }

    /// `sum_{pi1} w S_{alpha,id}(-v(k), z) + sum_{pi2} w S_k(v, A, y)`.
    pub fn mixture(&self, v: &VarSurface, a: &UpperSet, y: &[f64], pi1: &MixtureMeasure, pi2: &MixtureMeasure) -> Result<f64> {
        let t1 = v.tabulate(pi1)?;
        let t2 = v.tabulate(pi2)?;
        let m2 = pi2.memberships(a)?;
        self.mixture_tabulated(&t1, &t2, &m2, y, pi1, pi2)
    }

    /// Mixture score from cached surface values and memberships, keyed by atom index.
    pub fn mixture_tabulated(
        &self,
        v1: &[f64],
        v2: &[f64],
        in_a2: &[bool],
        y: &[f64],
        pi1: &MixtureMeasure,
        pi2: &MixtureMeasure,
    ) -> Result<f64> {
        check_dim(pi1.len(), v1.len())?;
        check_dim(pi2.len(), v2.len())?;
        check_dim(pi2.len(), in_a2.len())?;
        let mut s = 0.0;
        for (j, (k, w)) in pi1.iter().enumerate() {
            s += w * quantile_score(self.alpha, -v1[j], self.excess(k, y)?);
        }
        for (j, (k, w)) in pi2.iter().enumerate() {
            s += w * self.elementary(v2[j], in_a2[j], k, y)?;
        }
        Ok(s)
    }
}

/// Boxed surface helper for a reported surface shifted by a constant.
pub fn shifted_surface(v: VarSurface, delta: f64) -> VarSurface {
    let inner: Box<VarSurface> = Box::new(v);
    VarSurface::custom(move |k| inner.eval(k).map(|x| x + delta).unwrap_or(f64::NAN))
}
