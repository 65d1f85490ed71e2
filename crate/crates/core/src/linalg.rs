//! Dense helpers for the handful of small matrices the harness needs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Lower Cholesky factor of a symmetric `d x d` row-major matrix.
pub fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    if a.len() != d * d {
        return Err(Error::Dimension { expected: d * d, got: a.len() });
    }
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite);
                }
                l[i * d + i] = libm::sqrt(s);
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// `out = L x` for a lower-triangular row-major `L`.
pub fn lower_mul(l: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let mut s = 0.0;
        for k in 0..=i {
            s += l[i * d + k] * x[k];
        }
        out[i] = s;
    }
}

/// Equicorrelation matrix with unit variances and off-diagonal `rho`.
pub fn equicorrelation(d: usize, rho: f64) -> Vec<f64> {
    let mut m = vec![rho; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// Orthonormal basis of the complement of `w` (Gram-Schmidt on the unit vectors).
pub fn orthogonal_complement(w: &[f64]) -> Vec<Vec<f64>> {
    let d = w.len();
    let nw = libm::sqrt(w.iter().map(|x| x * x).sum::<f64>());
    let mut basis: Vec<Vec<f64>> = vec![w.iter().map(|x| x / nw).collect()];
    for e in 0..d {
        let mut v = vec![0.0; d];
        v[e] = 1.0;
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
        if basis.len() == d {
            break;
        }
    }
    basis.remove(0);
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let a = equicorrelation(4, 0.5);
        let l = cholesky(&a, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..4).map(|k| l[i * 4 + k] * l[j * 4 + k]).sum();
                assert!((s - a[i * 4 + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = equicorrelation(3, -0.6);
        assert_eq!(cholesky(&a, 3), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn complement_is_orthonormal() {
        let w = [1.0, 2.0, 0.5];
        let b = orthogonal_complement(&w);
        assert_eq!(b.len(), 2);
        for v in &b {
            let dot: f64 = v.iter().zip(&w).map(|(x, y)| x * y).sum();
            assert!(dot.abs() < 1e-12);
            let n: f64 = v.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let c: f64 = b[0].iter().zip(&b[1]).map(|(x, y)| x * y).sum();
        assert!(c.abs() < 1e-12);
    }
}
