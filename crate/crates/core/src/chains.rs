//! Transition matrices: the tree walk `Q_h`, its distance-from-root projection
//! `R_h`, the sibling-subtree chain `S_k`, and the single-card matrix of the
//! interchange process.

use crate::error::{Error, Result};
use crate::tree::TreeGeometry;

/// Dense row-major transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMatrix {
    states: usize,
    entries: Vec<f64>,
    substochastic: bool,
    stationary_weights: Option<Vec<f64>>,
}

impl ChainMatrix {
    fn zeros(states: usize) -> Self {
        Self {
            states,
            entries: vec![0.0; states * states],
            substochastic: false,
            stationary_weights: None,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let states = rows.len();
        let mut m = Self::zeros(states);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), states, "row {i} has wrong length");
            m.entries[i * states..(i + 1) * states].copy_from_slice(row);
        }
        m.substochastic = m.row_sums().iter().any(|&s| s < 1.0 - 1e-12);
        m
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_substochastic(&self) -> bool {
        self.substochastic
    }

    pub fn stationary_weights(&self) -> Option<&[f64]> {
        self.stationary_weights.as_deref()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.states + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.states + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.states..(i + 1) * self.states]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.states).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn mul_vec(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.states);
        (0..self.states)
            .map(|i| self.row(i).iter().zip(f).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest `|M(i,j) - M(j,i)|`.
    pub fn symmetry_defect(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for i in 0..self.states {
            for j in i + 1..self.states {
                let defect = (self.get(i, j) - self.get(j, i)).abs();
                if defect > worst.2 {
                    worst = (i, j, defect);
                }
            }
        }
        worst
    }

    /// Largest `|pi(x) M(x,y) - pi(y) M(y,x)|` relative to the larger of the
    /// two flows, if weights are attached.
    pub fn detailed_balance_defect(&self) -> Option<f64> {
        let pi = self.stationary_weights.as_ref()?;
        let mut worst = 0.0f64;
        for x in 0..self.states {
            for y in x + 1..self.states {
                let (a, b) = (pi[x] * self.get(x, y), pi[y] * self.get(y, x));
                let scale = a.abs().max(b.abs());
                if scale > 0.0 {
                    worst = worst.max((a - b).abs() / scale);
                }
            }
        }
        Some(worst)
    }

    pub fn is_tridiagonal(&self) -> bool {
        self.first_off_band().is_none()
    }

    fn first_off_band(&self) -> Option<(usize, usize, f64)> {
        for i in 0..self.states {
            for j in 0..self.states {
                if i.abs_diff(j) > 1 && self.get(i, j) != 0.0 {
                    return Some((i, j, self.get(i, j)));
                }
            }
        }
        None
    }
}

/// Symmetric tridiagonal matrix, the `D^{1/2} M D^{-1/2}` conjugate of a
/// reversible birth-death chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSymmetric {
    pub diagonal: Vec<f64>,
    pub offdiagonal: Vec<f64>,
}

/// Absolute width at which bisection stops.
pub const BISECTION_TOLERANCE: f64 = 1e-13;

impl TridiagonalSymmetric {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// Number of eigenvalues strictly below `x`, from the signs of the LDLᵀ
    /// pivots of `T - xI`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let scale = self.offdiagonal.iter().fold(1.0f64, |m, e| m.max(e * e));
        let pivmin = f64::MIN_POSITIVE * scale;
        let mut count = 0;
        let mut q = self.diagonal[0] - x;
        for i in 0..self.dim() {
            if i > 0 {
                let e = self.offdiagonal[i - 1];
                q = (self.diagonal[i] - x) - e * e / q;
            }
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 {
                self.offdiagonal[i - 1].abs()
            } else {
                0.0
            };
            let right = if i + 1 < n {
                self.offdiagonal[i].abs()
            } else {
                0.0
            };
            lo = lo.min(self.diagonal[i] - left - right);
            hi = hi.max(self.diagonal[i] + left + right);
        }
        (lo, hi)
    }

    /// The `index`-th smallest eigenvalue (0-based) by Sturm bisection.
    pub fn eigenvalue(&self, index: usize) -> f64 {
        assert!(index < self.dim());
        let (lo, hi) = self.gershgorin_bounds();
        let (mut lo, mut hi) = (lo - BISECTION_TOLERANCE, hi + BISECTION_TOLERANCE);
        // invariant: count(lo) <= index < count(hi)
        while hi - lo > BISECTION_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.eigenvalue(i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            rows[i][i] = self.diagonal[i];
            if i + 1 < n {
                rows[i][i + 1] = self.offdiagonal[i];
                rows[i + 1][i] = self.offdiagonal[i];
            }
        }
        rows
    }
}

/// Simple random walk `Q_h` on the tree. Every move has probability
/// `1/(d+1)`; the root keeps `1/(d+1)` and each leaf keeps `d/(d+1)` as a
/// self-loop, so the matrix is symmetric and uniform weights are stationary.
pub fn build_q(g: &TreeGeometry) -> ChainMatrix {
    let n = g.n();
    let step = 1.0 / (g.d() as f64 + 1.0);
    let mut m = ChainMatrix::zeros(n);
    for v in 0..n {
        if let Some(p) = g.parent(v) {
            m.set(v, p, step);
        }
        for c in g.children(v) {
            m.set(v, c, step);
        }
        // missing neighbours: the root lacks a parent, a leaf lacks d children
        let missing = g.d() + 1 - g.degree(v);
        if missing > 0 {
            m.set(v, v, missing as f64 * step);
        }
    }
    m.stationary_weights = Some(vec![1.0; n]);
    m
}

fn birth_death(d: usize, last: usize, root_loop: f64) -> ChainMatrix {
    let up = d as f64 / (d as f64 + 1.0);
    let down = 1.0 / (d as f64 + 1.0);
    let states = last + 1;
    let mut m = ChainMatrix::zeros(states);
    for l in 0..states {
        if l > 0 {
            m.set(l, l - 1, down);
        }
        if l < last {
            m.set(l, l + 1, up);
        }
    }
    m.set(last, last, up);
    if last > 0 {
        m.set(0, 0, root_loop);
    }
    let mut pi = Vec::with_capacity(states);
    let mut w = 1.0;
    for _ in 0..states {
        pi.push(w);
        w *= d as f64;
    }
    m.stationary_weights = Some(pi);
    m
}

/// Projection of the walk onto the distance from the root, states `0..=h`.
pub fn build_r(d: usize, h: usize) -> Result<ChainMatrix> {
    check_branching(d)?;
    if h < 1 {
        return Err(Error::Sizing(format!("height h = {h} must be >= 1")));
    }
    Ok(birth_death(d, h, 1.0 / (d as f64 + 1.0)))
}

/// `R_k` with the root self-loop removed: the walk restricted to one level
/// profile of a sibling subtree, leaking `1/(d+1)` to the vanished parent.
pub fn build_s(d: usize, k: usize) -> Result<ChainMatrix> {
    check_branching(d)?;
    let mut m = birth_death(d, k, 0.0);
    m.substochastic = true;
    Ok(m)
}

fn check_branching(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Sizing(format!(
            "branching factor d = {d} must be >= 2"
        )));
    }
    Ok(())
}

/// Motion of one card under the interchange process, built from the edge
/// model: each incident edge is chosen with probability `1/(n-1)` and then
/// swapped with probability `1/2`.
pub fn build_single_card(g: &TreeGeometry) -> ChainMatrix {
    let n = g.n();
    let cross = 1.0 / (2.0 * (n as f64 - 1.0));
    let mut m = ChainMatrix::zeros(n);
    for (p, c) in g.edge_list().edges {
        m.set(p, c, cross);
        m.set(c, p, cross);
    }
    for v in 0..n {
        m.set(v, v, 1.0 - g.degree(v) as f64 * cross);
    }
    m.stationary_weights = Some(vec![1.0; n]);
    m
}

/// Coefficients `(a, b)` with `Q' = a I + b Q`.
pub fn single_card_affine_coefficients(g: &TreeGeometry) -> (f64, f64) {
    let n = g.n() as f64;
    let d = g.d() as f64;
    (
        (2.0 * n - d - 3.0) / (2.0 * (n - 1.0)),
        (d + 1.0) / (2.0 * (n - 1.0)),
    )
}

/// Conjugate a reversible tridiagonal chain into symmetric form; the
/// off-diagonal becomes `sqrt(M(l,l+1) M(l+1,l))`.
pub fn symmetrize(m: &ChainMatrix) -> Result<TridiagonalSymmetric> {
    if let Some((row, col, value)) = m.first_off_band() {
        return Err(Error::NotTridiagonal { row, col, value });
    }
    let n = m.states();
    let diagonal = (0..n).map(|l| m.get(l, l)).collect();
    let offdiagonal = (0..n.saturating_sub(1))
        .map(|l| (m.get(l, l + 1) * m.get(l + 1, l)).sqrt())
        .collect();
    Ok(TridiagonalSymmetric {
        diagonal,
        offdiagonal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const THIRD: f64 = 1.0 / 3.0;

    fn assert_rows(m: &ChainMatrix, expected: &[&[f64]]) {
        for (i, row) in expected.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!(
                    (m.get(i, j) - e).abs() < 1e-15,
                    "({i},{j}): {} vs {e}",
                    m.get(i, j)
                );
            }
        }
    }

    #[test]
    fn q_star() {
        let g = TreeGeometry::new(2, 1).unwrap();
        let q = build_q(&g);
        assert_rows(
            &q,
            &[
                &[THIRD, THIRD, THIRD],
                &[THIRD, 2.0 * THIRD, 0.0],
                &[THIRD, 0.0, 2.0 * THIRD],
            ],
        );
        assert!(q.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-15));
    }

    #[test]
    fn q_internal_row() {
        let g = TreeGeometry::new(2, 2).unwrap();
        let q = build_q(&g);
        assert_rows(&q, &[&[], &[THIRD, 0.0, 0.0, THIRD, THIRD, 0.0, 0.0]]);
        assert_eq!(q.symmetry_defect().2, 0.0);
    }

    #[test]
    fn r_chain() {
        let r = build_r(2, 1).unwrap();
        assert_rows(&r, &[&[THIRD, 2.0 * THIRD], &[THIRD, 2.0 * THIRD]]);
        assert_eq!(
            build_r(2, 2).unwrap().stationary_weights().unwrap(),
            &[1.0, 2.0, 4.0]
        );
        let r = build_r(3, 3).unwrap();
        assert_eq!(r.detailed_balance_defect().unwrap(), 0.0);
        assert!(!r.is_substochastic());
    }

    #[test]
    fn s_chain() {
        let s = build_s(2, 0).unwrap();
        assert_rows(&s, &[&[2.0 * THIRD]]);
        let s = build_s(2, 1).unwrap();
        assert_rows(&s, &[&[0.0, 2.0 * THIRD], &[THIRD, 2.0 * THIRD]]);
        assert!(s.is_substochastic());
        let s = build_s(3, 2).unwrap();
        assert!((s.row_sums()[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn r_and_s_differ_only_at_origin() {
        for d in 2..5 {
            for k in 1..6 {
                let r = build_r(d, k).unwrap();
                let s = build_s(d, k).unwrap();
                for i in 0..=k {
                    for j in 0..=k {
                        let diff = r.get(i, j) - s.get(i, j);
                        if (i, j) == (0, 0) {
                            assert!((diff - 1.0 / (d as f64 + 1.0)).abs() < 1e-15);
                        } else {
                            assert_eq!(diff, 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn single_card_star() {
        let g = TreeGeometry::new(2, 1).unwrap();
        let qp = build_single_card(&g);
        assert!((qp.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((qp.get(1, 1) - 0.75).abs() < 1e-15);
        assert!((qp.get(0, 1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_card_affine_identity() {
        let g = TreeGeometry::new(3, 2).unwrap();
        let q = build_q(&g);
        let qp = build_single_card(&g);
        let (a, b) = single_card_affine_coefficients(&g);
        for i in 0..g.n() {
            for j in 0..g.n() {
                let expected = if i == j { a } else { 0.0 } + b * q.get(i, j);
                assert!((qp.get(i, j) - expected).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn symmetrized_chains() {
        let t = symmetrize(&build_r(2, 1).unwrap()).unwrap();
        assert!((t.diagonal[0] - THIRD).abs() < 1e-15);
        assert!((t.diagonal[1] - 2.0 * THIRD).abs() < 1e-15);
        assert!((t.offdiagonal[0] - 2f64.sqrt() / 3.0).abs() < 1e-15);
        let t = symmetrize(&build_s(2, 1).unwrap()).unwrap();
        assert_eq!(t.diagonal[0], 0.0);
        assert!((t.offdiagonal[0] - 2f64.sqrt() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_rejects_dense() {
        let g = TreeGeometry::new(2, 2).unwrap();
        assert!(matches!(
            symmetrize(&build_q(&g)),
            Err(Error::NotTridiagonal { .. })
        ));
    }

    #[test]
    fn sturm_bisection_two_by_two() {
        // S_1 for d = 2: lambda^2 - (2/3) lambda - 2/9 = 0
        let t = symmetrize(&build_s(2, 1).unwrap()).unwrap();
        let ev = t.eigenvalues();
        let r3 = 1.0 / 3f64.sqrt();
        assert!((ev[0] - (THIRD - r3)).abs() < 1e-13);
        assert!((ev[1] - (THIRD + r3)).abs() < 1e-13);
        assert_eq!(t.sturm_count(0.0), 1);
        assert_eq!(t.sturm_count(2.0), 2);
    }
}
