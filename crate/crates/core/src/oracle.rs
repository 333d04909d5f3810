//! Brute-force ground truth: cyclic Jacobi diagonalization of a dense
//! symmetric matrix. Shares nothing with the analytic spectrum code except
//! the matrix builders.

use crate::error::{Error, Result};
use crate::spectrum::SpectrumTable;

/// Largest accepted `|M(i,j) - M(j,i)|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Sweeps stop once the off-diagonal Frobenius norm drops below this
/// fraction of `‖M‖_F`.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-14;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct DenseEigenDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Row-major `n x n`; column `j` is the unit eigenvector of `eigenvalues[j]`.
    pub eigenvectors: Vec<f64>,
    /// `‖M V - V Λ‖_∞` (max entry).
    pub residual: f64,
    pub sweeps: usize,
}

impl DenseEigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.eigenvectors[i * n + j]).collect()
    }

    /// Relative distance `‖f - P f‖₂ / ‖f‖₂` of `f` from the span of the
    /// oracle eigenvectors whose eigenvalue lies within `cluster` of `lambda`.
    pub fn eigenspace_residual(&self, f: &[f64], lambda: f64, cluster: f64) -> f64 {
        let n = self.dim();
        let mut projection = vec![0.0; n];
        for j in (0..n).filter(|&j| (self.eigenvalues[j] - lambda).abs() <= cluster) {
            let col = self.eigenvector(j);
            let c: f64 = col.iter().zip(f).map(|(a, b)| a * b).sum();
            for (p, v) in projection.iter_mut().zip(&col) {
                *p += c * v;
            }
        }
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let miss = f
            .iter()
            .zip(&projection)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            0.0
        } else {
            miss / norm
        }
    }
}

/// Full eigendecomposition of a symmetric `n x n` row-major matrix by cyclic
/// Jacobi rotations, sweeping the upper triangle in row-major order.
pub fn dense_eigensolve_symmetric(matrix: &[f64], n: usize) -> Result<DenseEigenDecomposition> {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    for i in 0..n {
        for j in i + 1..n {
            let defect = (matrix[i * n + j] - matrix[j * n + i]).abs();
            if defect > SYMMETRY_TOLERANCE {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    defect,
                });
            }
        }
    }

    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frobenius = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = OFF_DIAGONAL_TOLERANCE * frobenius;

    let off_norm = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    let mut off = off_norm(&a);
    while off > target {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NotConverged { sweeps, off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // rotation angle annihilating a[p][q]
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, n, p, q, c, s);
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        off = off_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[row * n + new_col] = v[row * n + old_col];
        }
    }

    let mut residual = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let mv: f64 = (0..n)
                .map(|k| matrix[i * n + k] * eigenvectors[k * n + j])
                .sum();
            residual = residual.max((mv - eigenvalues[j] * eigenvectors[i * n + j]).abs());
        }
    }

    Ok(DenseEigenDecomposition {
        eigenvalues,
        eigenvectors,
        residual,
        sweeps,
    })
}

/// Apply `A <- Jᵀ A J` for the plane rotation in `(p, q)`.
fn rotate(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = c * akp - s * akq;
        a[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = c * apk - s * aqk;
        a[q * n + k] = s * apk + c * aqk;
    }
}

/// Max absolute difference between the multiplicity-expanded analytic
/// spectrum and ascending oracle eigenvalues.
pub fn spectrum_compare(analytic: &SpectrumTable, oracle_vals: &[f64]) -> Result<f64> {
    let expanded = analytic.expanded_sorted();
    if expanded.len() != oracle_vals.len() {
        return Err(Error::CountMismatch {
            analytic: expanded.len(),
            oracle: oracle_vals.len(),
        });
    }
    Ok(expanded
        .iter()
        .zip(oracle_vals)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{build_q, build_s, symmetrize};
    use crate::tree::TreeGeometry;

    #[test]
    fn star_spectrum() {
        let g = TreeGeometry::new(2, 1).unwrap();
        let q = build_q(&g);
        let dec = dense_eigensolve_symmetric(q.entries(), 3).unwrap();
        let expected = [0.0, 2.0 / 3.0, 1.0];
        for (a, b) in dec.eigenvalues.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        assert!(dec.residual < 1e-14);
    }

    #[test]
    fn identity() {
        let n = 5;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        let dec = dense_eigensolve_symmetric(&m, n).unwrap();
        assert!(dec.eigenvalues.iter().all(|&x| x == 1.0));
        assert_eq!(dec.sweeps, 0);
    }

    #[test]
    fn symmetrized_s1() {
        let t = symmetrize(&build_s(2, 1).unwrap()).unwrap();
        let flat: Vec<f64> = t.to_dense().concat();
        let dec = dense_eigensolve_symmetric(&flat, 2).unwrap();
        let r3 = 1.0 / 3f64.sqrt();
        assert!((dec.eigenvalues[0] - (1.0 / 3.0 - r3)).abs() < 1e-14);
        assert!((dec.eigenvalues[1] - (1.0 / 3.0 + r3)).abs() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = [0.0, 1.0, 0.5, 0.0];
        assert!(matches!(
            dense_eigensolve_symmetric(&m, 2),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let g = TreeGeometry::new(3, 2).unwrap();
        let n = g.n();
        let dec = dense_eigensolve_symmetric(build_q(&g).entries(), n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n)
                    .map(|k| dec.eigenvectors[k * n + i] * dec.eigenvectors[k * n + j])
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-12);
            }
        }
        assert!(dec.residual <= 1e-10 * n as f64);
    }
}
