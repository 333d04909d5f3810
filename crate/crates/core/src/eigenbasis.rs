//! Explicit eigenbasis of `Q_h`.
//!
//! Level-constant vectors are lifted from eigenvectors of `R_h`; sibling
//! vectors are lifted from eigenvectors of `S_k` onto two adjacent child
//! subtrees `(j, j+1)` of a node at level `h - 1 - k`, with opposite signs.
//! Level profiles are produced by the real three-term recurrence with
//! `y₀ = 1`; the complex closed forms are kept for cross-checking.

use num_complex::Complex64;

use crate::chains::ChainMatrix;
use crate::error::{Error, Result};
use crate::spectrum::{full_spectrum, Family, SpectralLine};
use crate::tree::TreeGeometry;

/// Relative tolerance on the terminal row of the recurrence.
pub const TERMINAL_TOLERANCE: f64 = 1e-9;
/// Relative `‖Qf - λf‖_∞` accepted for a basis vector.
pub const EIGENPAIR_TOLERANCE: f64 = 1e-9;
/// Recurrence vs closed form, entrywise.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-8;
/// Elimination pivots below this (after max-abs normalization) count as zero.
pub const PIVOT_THRESHOLD: f64 = 1e-8;
/// Two entries of a level count as equal within this.
pub const LEVEL_EQUALITY_TOLERANCE: f64 = 1e-12;
/// A level sum counts as zero within this.
pub const LEVEL_SUM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorTag {
    AllOnes,
    Symmetric {
        j: usize,
    },
    /// Supported on the subtrees of children `j` and `j+1` (1-based) of `v`.
    AntiSymmetric {
        k: usize,
        v: usize,
        j: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenvectorRecord {
    pub values: Vec<f64>,
    pub lambda: f64,
    pub tag: VectorTag,
    /// Level profile `y₀ = 1, y₁, …` the vector was lifted from.
    pub profile: Vec<f64>,
    /// Root `x` of `d x² - (d+1) λ x + 1 = 0` used for the closed form.
    pub x: Complex64,
    /// `(α₁, α₂)` with `y_i = α₁ x^i - α₂ (1/(xd))^i`.
    pub coefficients: (Complex64, Complex64),
}

#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub d: usize,
    pub h: usize,
    pub vectors: Vec<EigenvectorRecord>,
}

/// Profile of a level-constant eigenvector: `R_h y = λ y` with `y₀ = 1`.
fn symmetric_profile(d: usize, h: usize, lambda: f64) -> Result<Vec<f64>> {
    let df = d as f64;
    let c = (df + 1.0) * lambda;
    let mut y = Vec::with_capacity(h + 1);
    y.push(1.0);
    y.push((c - 1.0) / df);
    for i in 1..h {
        y.push((c * y[i] - y[i - 1]) / df);
    }
    let terminal = (y[h - 1] + df * y[h]) / (df + 1.0) - lambda * y[h];
    check_terminal(lambda, terminal, &y)?;
    Ok(y)
}

/// Profile on one sibling subtree: `S_k y = λ y` with `y₀ = 1`.
fn antisymmetric_profile(d: usize, k: usize, lambda: f64) -> Result<Vec<f64>> {
    let df = d as f64;
    let c = (df + 1.0) * lambda;
    let mut y = Vec::with_capacity(k + 1);
    y.push(1.0);
    let terminal = if k == 0 {
        df / (df + 1.0) - lambda
    } else {
        y.push(c / df);
        for i in 1..k {
            y.push((c * y[i] - y[i - 1]) / df);
        }
        (y[k - 1] + df * y[k]) / (df + 1.0) - lambda * y[k]
    };
    check_terminal(lambda, terminal, &y)?;
    Ok(y)
}

fn check_terminal(lambda: f64, terminal: f64, y: &[f64]) -> Result<()> {
    let scale = max_abs(y);
    let residual = terminal.abs() / scale;
    if residual > TERMINAL_TOLERANCE || !residual.is_finite() {
        return Err(Error::TerminalResidual { lambda, residual });
    }
    Ok(())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Level-`i` value of the level-constant eigenvector for root `x`:
/// `(dx²-x)/(dx²-1) x^i + (x-1)/(dx²-1) · 1/(d^i x^i)`.
pub fn symmetric_closed_form(d: usize, x: Complex64, i: usize) -> Complex64 {
    let df = d as f64;
    let denom = x * x * df - 1.0;
    let i = i as i32;
    (x * x * df - x) / denom * x.powi(i) + (x - 1.0) / denom / (x.powi(i) * df.powi(i))
}

/// Level-`i` value of the sibling-subtree profile for root `x`:
/// `d x^(i+2)/(dx²-1) - 1/((dx²-1) d^i x^i)`.
pub fn antisymmetric_closed_form(d: usize, x: Complex64, i: usize) -> Complex64 {
    let df = d as f64;
    let denom = x * x * df - 1.0;
    let i = i as i32;
    x.powi(i + 2) * df / denom - (denom * x.powi(i) * df.powi(i)).inv()
}

pub fn symmetric_eigenvector(g: &TreeGeometry, line: &SpectralLine) -> Result<EigenvectorRecord> {
    let tag = match line.family {
        Family::Trivial => VectorTag::AllOnes,
        Family::Symmetric { j } => VectorTag::Symmetric { j },
        Family::AntiSymmetric { .. } => {
            return Err(Error::InvalidConstruction(
                "anti-symmetric line passed to the level-constant builder".into(),
            ))
        }
    };
    let (d, h) = (g.d(), g.h());
    let profile = symmetric_profile(d, h, line.lambda)?;
    let mut values = vec![0.0; g.n()];
    for (level, &y) in profile.iter().enumerate() {
        values[g.level_range(level)].fill(y);
    }
    let x = line.x_pair.0;
    let df = d as f64;
    let denom = x * x * df - 1.0;
    let coefficients = ((x * x * df - x) / denom, (-x + 1.0) / denom);
    Ok(EigenvectorRecord {
        values,
        lambda: line.lambda,
        tag,
        profile,
        x,
        coefficients,
    })
}

pub fn antisymmetric_eigenvector(
    g: &TreeGeometry,
    line: &SpectralLine,
    v: usize,
    j: usize,
) -> Result<EigenvectorRecord> {
    let Family::AntiSymmetric { k } = line.family else {
        return Err(Error::InvalidConstruction(
            "expected an anti-symmetric line".into(),
        ));
    };
    let (d, h) = (g.d(), g.h());
    if k >= h {
        return Err(Error::InvalidConstruction(format!(
            "k = {k} exceeds h - 1 = {}",
            h - 1
        )));
    }
    if v >= g.n() || g.level(v) != h - 1 - k {
        return Err(Error::InvalidConstruction(format!(
            "node {v} is not at level h - 1 - k = {}",
            h - 1 - k
        )));
    }
    if !(1..d).contains(&j) {
        return Err(Error::InvalidConstruction(format!(
            "child index j = {j} not in [1, {}]",
            d - 1
        )));
    }
    let profile = antisymmetric_profile(d, k, line.lambda)?;
    let left = g.child(v, j);
    let right = g.child(v, j + 1);
    let mut values = vec![0.0; g.n()];
    for (depth, &y) in profile.iter().enumerate() {
        values[g.subtree_level_slice(left, depth)?].fill(y);
        values[g.subtree_level_slice(right, depth)?].fill(-y);
    }
    let x = line.x_pair.0;
    let df = d as f64;
    let denom = x * x * df - 1.0;
    let coefficients = (x * x * df / denom, denom.inv());
    Ok(EigenvectorRecord {
        values,
        lambda: line.lambda,
        tag: VectorTag::AntiSymmetric { k, v, j },
        profile,
        x,
        coefficients,
    })
}

impl EigenvectorRecord {
    /// Largest entrywise gap between the recurrence profile and the complex
    /// closed form; `None` for the all-ones vector.
    pub fn closed_form_deviation(&self, d: usize) -> Option<f64> {
        let closed: fn(usize, Complex64, usize) -> Complex64 = match self.tag {
            VectorTag::AllOnes => return None,
            VectorTag::Symmetric { .. } => symmetric_closed_form,
            VectorTag::AntiSymmetric { .. } => antisymmetric_closed_form,
        };
        Some(
            self.profile
                .iter()
                .enumerate()
                .map(|(i, &y)| (closed(d, self.x, i) - y).norm())
                .fold(0.0, f64::max),
        )
    }

    /// Same comparison through `α₁ x^i - α₂ (1/(xd))^i`.
    pub fn coefficient_form_deviation(&self, d: usize) -> f64 {
        let x2 = (self.x * d as f64).inv();
        let (a1, a2) = self.coefficients;
        self.profile
            .iter()
            .enumerate()
            .map(|(i, &y)| (a1 * self.x.powi(i as i32) - a2 * x2.powi(i as i32) - y).norm())
            .fold(0.0, f64::max)
    }

    /// Values scaled to max-abs 1.
    pub fn normalized_values(&self) -> Vec<f64> {
        let m = max_abs(&self.values);
        self.values.iter().map(|v| v / m).collect()
    }
}

/// `‖Q f - λ f‖_∞ / ‖f‖_∞`.
pub fn verify_eigenpair(q: &ChainMatrix, rec: &EigenvectorRecord) -> f64 {
    let qf = q.mul_vec(&rec.values);
    let miss = qf
        .iter()
        .zip(&rec.values)
        .map(|(a, b)| (a - rec.lambda * b).abs())
        .fold(0.0, f64::max);
    miss / max_abs(&rec.values)
}

/// Constant on every level.
pub fn is_completely_symmetric(g: &TreeGeometry, f: &[f64]) -> bool {
    (0..=g.h()).all(|level| {
        let slice = &f[g.level_range(level)];
        slice
            .iter()
            .all(|&v| (v - slice[0]).abs() <= LEVEL_EQUALITY_TOLERANCE)
    })
}

/// Every level sums to zero.
pub fn is_energy_preserving(g: &TreeGeometry, f: &[f64]) -> bool {
    (0..=g.h())
        .all(|level| f[g.level_range(level)].iter().sum::<f64>().abs() <= LEVEL_SUM_TOLERANCE)
}

/// Rank by Gaussian elimination with full pivoting after scaling every row
/// to max-abs 1. Returns `(rank, smallest accepted pivot)`.
pub fn rank_full_pivot(rows: &[Vec<f64>], threshold: f64) -> (usize, f64) {
    if rows.is_empty() {
        return (0, f64::INFINITY);
    }
    let cols = rows[0].len();
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let m = max_abs(r);
            if m == 0.0 {
                r.clone()
            } else {
                r.iter().map(|x| x / m).collect()
            }
        })
        .collect();
    let m = a.len();
    let mut col_perm: Vec<usize> = (0..cols).collect();
    let mut rank = 0;
    let mut smallest = f64::INFINITY;
    while rank < m.min(cols) {
        let mut best = (rank, rank, 0.0f64);
        for (i, row) in a.iter().enumerate().skip(rank) {
            for jj in rank..cols {
                let val = row[col_perm[jj]].abs();
                if val > best.2 {
                    best = (i, jj, val);
                }
            }
        }
        if best.2 < threshold {
            break;
        }
        a.swap(rank, best.0);
        col_perm.swap(rank, best.1);
        let pc = col_perm[rank];
        let pivot = a[rank][pc];
        smallest = smallest.min(pivot.abs());
        let (top, bottom) = a.split_at_mut(rank + 1);
        let prow = &top[rank];
        for row in bottom.iter_mut() {
            let factor = row[pc] / pivot;
            if factor != 0.0 {
                for &c in &col_perm[rank..] {
                    row[c] -= factor * prow[c];
                }
            }
        }
        rank += 1;
    }
    (rank, smallest)
}

/// All `n` eigenvectors: the `h+1` level-constant lifts, then for every node
/// `v` above the leaves (level order), every adjacent child pair `(j, j+1)`
/// and every eigenvalue of `S_(h-1-level(v))`, one sibling lift.
pub fn build_full_basis(g: &TreeGeometry) -> Result<EigenBasis> {
    let table = full_spectrum(g.d(), g.h())?;
    let mut vectors = Vec::with_capacity(g.n());
    let mut by_k: Vec<Vec<&SpectralLine>> = vec![Vec::new(); g.h()];
    for line in &table.lines {
        match line.family {
            Family::Trivial | Family::Symmetric { .. } => {
                vectors.push(symmetric_eigenvector(g, line)?)
            }
            Family::AntiSymmetric { k } => by_k[k].push(line),
        }
    }
    for level in 0..g.h() {
        let k = g.h() - 1 - level;
        for v in g.level_range(level) {
            for j in 1..g.d() {
                for line in &by_k[k] {
                    vectors.push(antisymmetric_eigenvector(g, line, v, j)?);
                }
            }
        }
    }
    debug_assert_eq!(vectors.len(), g.n());
    Ok(EigenBasis {
        d: g.d(),
        h: g.h(),
        vectors,
    })
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn rank(&self) -> (usize, f64) {
        let rows: Vec<Vec<f64>> = self.vectors.iter().map(|r| r.values.clone()).collect();
        rank_full_pivot(&rows, PIVOT_THRESHOLD)
    }

    pub fn max_residual(&self, q: &ChainMatrix) -> f64 {
        self.vectors
            .iter()
            .map(|r| verify_eigenpair(q, r))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::build_q;
    use crate::spectrum::{antisymmetric_eigenvalues, symmetric_eigenvalues};

    #[test]
    fn all_ones() {
        let g = TreeGeometry::new(3, 2).unwrap();
        let lines = symmetric_eigenvalues(3, 2).unwrap();
        let rec = symmetric_eigenvector(&g, &lines[0]).unwrap();
        assert_eq!(rec.tag, VectorTag::AllOnes);
        assert!(rec.values.iter().all(|&v| v == 1.0));
        assert_eq!(verify_eigenpair(&build_q(&g), &rec), 0.0);
    }

    #[test]
    fn symmetric_star() {
        let g = TreeGeometry::new(2, 1).unwrap();
        let lines = symmetric_eigenvalues(2, 1).unwrap();
        let rec = symmetric_eigenvector(&g, &lines[1]).unwrap();
        let expected = [1.0, -0.5, -0.5];
        for (a, b) in rec.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(verify_eigenpair(&build_q(&g), &rec) < 1e-15);
    }

    #[test]
    fn symmetric_binary_height_two() {
        let g = TreeGeometry::new(2, 2).unwrap();
        let lines = symmetric_eigenvalues(2, 2).unwrap();
        let rec = symmetric_eigenvector(&g, &lines[1]).unwrap();
        let lambda = 2f64.sqrt() / 3.0;
        assert!((rec.profile[1] - (3.0 * lambda - 1.0) / 2.0).abs() < 1e-15);
        assert!(verify_eigenpair(&build_q(&g), &rec) < 1e-10);
    }

    #[test]
    fn antisymmetric_star() {
        let g = TreeGeometry::new(2, 1).unwrap();
        let line = &antisymmetric_eigenvalues(2, 0).unwrap()[0];
        let rec = antisymmetric_eigenvector(&g, line, 0, 1).unwrap();
        assert_eq!(rec.values, vec![0.0, 1.0, -1.0]);
        assert!(verify_eigenpair(&build_q(&g), &rec) < 1e-13);
    }

    #[test]
    fn antisymmetric_root_pair() {
        let g = TreeGeometry::new(2, 2).unwrap();
        let line = antisymmetric_eigenvalues(2, 1).unwrap()[1].clone();
        let rec = antisymmetric_eigenvector(&g, &line, 0, 1).unwrap();
        assert!((rec.profile[1] - 1.366_025_403_784_438_6).abs() < 1e-12);
        assert!(
            (1.0 / 3.0 + 2.0 / 3.0 * rec.profile[1] - line.lambda * rec.profile[1]).abs() < 1e-12
        );
    }

    #[test]
    fn antisymmetric_support() {
        let g = TreeGeometry::new(2, 2).unwrap();
        let line = &antisymmetric_eigenvalues(2, 0).unwrap()[0];
        let rec = antisymmetric_eigenvector(&g, line, 1, 1).unwrap();
        for (node, &val) in rec.values.iter().enumerate() {
            assert_eq!(val != 0.0, node == 3 || node == 4, "node {node}");
        }
    }

    #[test]
    fn rejects_bad_pairing() {
        let g = TreeGeometry::new(2, 2).unwrap();
        let line = &antisymmetric_eigenvalues(2, 0).unwrap()[0];
        assert!(antisymmetric_eigenvector(&g, line, 0, 1).is_err());
        assert!(antisymmetric_eigenvector(&g, line, 1, 2).is_err());
        let sym = &symmetric_eigenvalues(2, 2).unwrap()[1];
        assert!(antisymmetric_eigenvector(&g, sym, 0, 1).is_err());
        assert!(symmetric_eigenvector(&g, line).is_err());
    }

    #[test]
    fn wrong_lambda_fails_terminal() {
        let g = TreeGeometry::new(2, 3).unwrap();
        let mut line = symmetric_eigenvalues(2, 3).unwrap()[1].clone();
        line.lambda += 1e-3;
        assert!(matches!(
            symmetric_eigenvector(&g, &line),
            Err(Error::TerminalResidual { .. })
        ));
    }

    #[test]
    fn residual_detects_perturbation() {
        let g = TreeGeometry::new(2, 1).unwrap();
        let line = &antisymmetric_eigenvalues(2, 0).unwrap()[0];
        let mut rec = antisymmetric_eigenvector(&g, line, 0, 1).unwrap();
        rec.values[0] += 1e-3;
        assert!(verify_eigenpair(&build_q(&g), &rec) > 1e-5);
    }

    #[test]
    fn predicates() {
        let g = TreeGeometry::new(2, 1).unwrap();
        assert!(is_completely_symmetric(&g, &[1.0, 1.0, 1.0]));
        assert!(!is_energy_preserving(&g, &[1.0, 1.0, 1.0]));
        assert!(!is_completely_symmetric(&g, &[0.0, 1.0, -1.0]));
        assert!(is_energy_preserving(&g, &[0.0, 1.0, -1.0]));
    }

    #[test]
    fn basis_counts() {
        let g = TreeGeometry::new(2, 2).unwrap();
        let b = build_full_basis(&g).unwrap();
        assert_eq!(b.len(), 7);
        let sym = b
            .vectors
            .iter()
            .filter(|r| !matches!(r.tag, VectorTag::AntiSymmetric { .. }))
            .count();
        assert_eq!(sym, 3);
        let g = TreeGeometry::new(3, 1).unwrap();
        let b = build_full_basis(&g).unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b.rank().0, 4);
    }

    #[test]
    fn rank_detects_dependence() {
        let rows = vec![
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![0.0, 1.0, 0.0],
        ];
        assert_eq!(rank_full_pivot(&rows, PIVOT_THRESHOLD).0, 2);
    }
}
