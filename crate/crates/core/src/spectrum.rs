//! Spectrum of the tree walk, family by family.
//!
//! Every eigenvalue other than 1 comes either from the distance-from-root
//! chain `R_h` (level-constant eigenvectors) or from one of the sibling
//! chains `S_k`, `k = 0..h-1` (eigenvectors living on two sibling subtrees).
//! Eigenvalues are paired with the roots `x, 1/(xd)` of
//! `d x² - (d+1) λ x + 1 = 0`.
//!
//! The `S_k` eigenvalues come from Sturm bisection on the symmetrized chain;
//! the polynomial equations in `x` are only used as residual checks.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::chains::{build_s, symmetrize};
use crate::error::{Error, Result};

/// Largest accepted scaled residual of the defining `x` equation.
pub const X_EQUATION_TOLERANCE: f64 = 1e-9;
/// Eigenvalues closer than this are merged for display only.
pub const DISPLAY_MERGE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Family {
    /// The eigenvalue 1 (all-ones eigenvector).
    Trivial,
    /// Level-constant eigenvector, `j` in `1..=h`.
    Symmetric { j: usize },
    /// Sibling-subtree eigenvector from `S_k`, `k` in `0..h`.
    AntiSymmetric { k: usize },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Trivial => "trivial",
            Family::Symmetric { .. } => "symmetric",
            Family::AntiSymmetric { .. } => "antisymmetric",
        }
    }

    /// `j` for symmetric lines, `k` for anti-symmetric ones, 0 for the trivial line.
    pub fn index(&self) -> usize {
        match *self {
            Family::Trivial => 0,
            Family::Symmetric { j } => j,
            Family::AntiSymmetric { k } => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLine {
    pub lambda: f64,
    pub family: Family,
    /// The two roots `(x, 1/(xd))`.
    pub x_pair: (Complex64, Complex64),
    pub multiplicity: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub d: usize,
    pub h: usize,
    pub lines: Vec<SpectralLine>,
}

impl SpectrumTable {
    pub fn multiplicity_total(&self) -> u64 {
        self.lines.iter().map(|l| l.multiplicity).sum()
    }

    /// All eigenvalues repeated by multiplicity, ascending.
    pub fn expanded_sorted(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .lines
            .iter()
            .flat_map(|l| std::iter::repeat_n(l.lambda, l.multiplicity as usize))
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// Distinct eigenvalues (within [`DISPLAY_MERGE_TOLERANCE`]) with their
    /// summed multiplicities, descending.
    pub fn merged_for_display(&self) -> Vec<(f64, u64)> {
        let mut lines: Vec<(f64, u64)> = self
            .lines
            .iter()
            .map(|l| (l.lambda, l.multiplicity))
            .collect();
        lines.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut merged: Vec<(f64, u64)> = Vec::new();
        for (lambda, m) in lines {
            match merged.last_mut() {
                Some(last) if (last.0 - lambda).abs() <= DISPLAY_MERGE_TOLERANCE => last.1 += m,
                _ => merged.push((lambda, m)),
            }
        }
        merged
    }

    /// Largest eigenvalue other than the trivial 1.
    pub fn lambda2(&self) -> f64 {
        self.lines
            .iter()
            .filter(|l| l.family != Family::Trivial)
            .map(|l| l.lambda)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.lines
            .iter()
            .map(|l| l.lambda)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Which polynomial a root `x` must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XEquation {
    /// `d^(h+1) x^(2h+2) = 1`.
    Symmetric { h: usize },
    /// `d^(k+2) x^(2k+4) - d^(k+2) x^(2k+3) + d x - 1 = 0`.
    AntiSymmetric { k: usize },
}

/// The `x`-equation of a line's family, if it has one.
pub fn x_equation(family: Family, h: usize) -> Option<XEquation> {
    match family {
        Family::Trivial => None,
        Family::Symmetric { .. } => Some(XEquation::Symmetric { h }),
        Family::AntiSymmetric { k } => Some(XEquation::AntiSymmetric { k }),
    }
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Sizing(format!(
            "branching factor d = {d} must be >= 2"
        )));
    }
    Ok(())
}

/// Roots of `d x² - (d+1) λ x + 1 = 0`. A conjugate pair (non-negative
/// imaginary part first) when `λ² < 4d/(d+1)²`; otherwise two reals of the
/// sign of `λ`, larger magnitude first.
pub fn x_from_lambda(d: usize, lambda: f64) -> (Complex64, Complex64) {
    let df = d as f64;
    let b = (df + 1.0) * lambda;
    let disc = b * b - 4.0 * df;
    if disc < 0.0 {
        let re = b / (2.0 * df);
        let im = (-disc).sqrt() / (2.0 * df);
        (Complex64::new(re, im), Complex64::new(re, -im))
    } else {
        // cancellation-free pair: big root from the sum, small one from the product 1/d
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        let q = 0.5 * (b + sign * disc.sqrt());
        let big = q / df;
        let small = 1.0 / q;
        (Complex64::new(big, 0.0), Complex64::new(small, 0.0))
    }
}

/// `λ = d/(d+1) (x + 1/(xd))`.
pub fn lambda_from_x(d: usize, x: Complex64) -> Complex64 {
    let df = d as f64;
    (x + (x * df).inv()) * (df / (df + 1.0))
}

/// Residual of the defining equation at `x`, divided by the largest
/// monomial magnitude.
pub fn verify_x_equation(d: usize, equation: XEquation, x: Complex64) -> f64 {
    let df = d as f64;
    match equation {
        XEquation::Symmetric { h } => {
            let e = (h + 1) as i32;
            let lead = x.powi(2 * e) * df.powi(e);
            (lead - 1.0).norm() / lead.norm().max(1.0)
        }
        XEquation::AntiSymmetric { k } => {
            let e = (k + 2) as i32;
            let t1 = x.powi(2 * e) * df.powi(e);
            let t2 = x.powi(2 * e - 1) * df.powi(e);
            let t3 = x * df;
            let scale = t1.norm().max(t2.norm()).max(t3.norm()).max(1.0);
            (t1 - t2 + t3 - 1.0).norm() / scale
        }
    }
}

/// The eigenvalue 1 and the `h` eigenvalues of `R_h` below it,
/// `λ_j = 2√d/(d+1) cos(πj/(h+1))` with `x = e^{iπj/(h+1)}/√d`.
pub fn symmetric_eigenvalues(d: usize, h: usize) -> Result<Vec<SpectralLine>> {
    check_d(d)?;
    let df = d as f64;
    let mut lines = Vec::with_capacity(h + 1);
    lines.push(SpectralLine {
        lambda: 1.0,
        family: Family::Trivial,
        x_pair: (Complex64::new(1.0, 0.0), Complex64::new(1.0 / df, 0.0)),
        multiplicity: 1,
    });
    let radius = 1.0 / df.sqrt();
    for j in 1..=h {
        let angle = PI * j as f64 / (h + 1) as f64;
        let lambda = 2.0 * df.sqrt() / (df + 1.0) * angle.cos();
        lines.push(SpectralLine {
            lambda,
            family: Family::Symmetric { j },
            x_pair: (
                Complex64::from_polar(radius, angle),
                Complex64::from_polar(radius, -angle),
            ),
            multiplicity: 1,
        });
    }
    Ok(lines)
}

/// The `k+1` eigenvalues of `S_k` (ascending), each with multiplicity 1;
/// [`full_spectrum`] assigns the tree multiplicities.
pub fn antisymmetric_eigenvalues(d: usize, k: usize) -> Result<Vec<SpectralLine>> {
    let t = symmetrize(&build_s(d, k)?)?;
    t.eigenvalues()
        .into_iter()
        .map(|lambda| {
            let x_pair = x_from_lambda(d, lambda);
            let residual = verify_x_equation(d, XEquation::AntiSymmetric { k }, x_pair.0);
            if residual > X_EQUATION_TOLERANCE {
                return Err(Error::InvalidConstruction(format!(
                    "S_{k} eigenvalue {lambda} gives x = {} with equation residual {residual:e}",
                    x_pair.0
                )));
            }
            Ok(SpectralLine {
                lambda,
                family: Family::AntiSymmetric { k },
                x_pair,
                multiplicity: 1,
            })
        })
        .collect()
}

/// Number of tree eigenvectors contributed by each eigenvalue of `S_k`:
/// `d - 1` adjacent sibling pairs under each of the `d^(h-k-1)` nodes at
/// level `h - 1 - k`.
pub fn antisymmetric_multiplicity(d: usize, h: usize, k: usize) -> u64 {
    (d as u64 - 1) * (d as u64).pow((h - k - 1) as u32)
}

pub fn full_spectrum(d: usize, h: usize) -> Result<SpectrumTable> {
    check_d(d)?;
    if h < 1 {
        return Err(Error::Sizing(format!("height h = {h} must be >= 1")));
    }
    let mut lines = symmetric_eigenvalues(d, h)?;
    for k in 0..h {
        let multiplicity = antisymmetric_multiplicity(d, h, k);
        lines.extend(antisymmetric_eigenvalues(d, k)?.into_iter().map(|mut l| {
            l.multiplicity = multiplicity;
            l
        }));
    }
    Ok(SpectrumTable { d, h, lines })
}

/// Both sides of the eigenvector count, in exact integers:
/// `(h+1) + Σ_k (k+1)(d-1)d^(h-k-1)` and `(d^(h+1) - 1)/(d - 1)`.
pub fn counting_identity(d: u64, h: u32) -> Option<(u128, u128)> {
    let d = d as u128;
    let mut families = h as u128 + 1;
    for k in 0..h {
        let term = (k as u128 + 1)
            .checked_mul(d - 1)?
            .checked_mul(d.checked_pow(h - k - 1)?)?;
        families = families.checked_add(term)?;
    }
    let n = (d.checked_pow(h + 1)? - 1) / (d - 1);
    Some((families, n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub lambda2: f64,
    pub gap: f64,
    /// `(d-1)² / ((d+1) d^(h+1))`.
    pub asymptotic: f64,
    /// `|λ₂ - (1 - asymptotic)|`.
    pub deviation: f64,
    pub min_eigenvalue: f64,
    /// `-2√d/(d+1)`; no eigenvalue lies below it.
    pub negative_floor: f64,
    pub negative_floor_respected: bool,
}

/// Slack allowed when comparing eigenvalues against `-2√d/(d+1)`.
pub const NEGATIVE_FLOOR_SLACK: f64 = 1e-12;

pub fn spectral_gap(d: usize, h: usize) -> Result<GapReport> {
    let table = full_spectrum(d, h)?;
    Ok(gap_report(&table))
}

pub fn gap_report(table: &SpectrumTable) -> GapReport {
    let d = table.d as f64;
    let lambda2 = table.lambda2();
    let asymptotic = (d - 1.0).powi(2) / ((d + 1.0) * d.powi(table.h as i32 + 1));
    let negative_floor = -2.0 * d.sqrt() / (d + 1.0);
    let min_eigenvalue = table.min_eigenvalue();
    GapReport {
        lambda2,
        gap: 1.0 - lambda2,
        asymptotic,
        deviation: (lambda2 - (1.0 - asymptotic)).abs(),
        min_eigenvalue,
        negative_floor,
        negative_floor_respected: min_eigenvalue >= negative_floor - NEGATIVE_FLOOR_SLACK,
    }
}

/// Interval `(1 - a/d^(k+1), 1 - (d-1)/d^(k+1))` with
/// `a = d - 1 + 2(d-1)²(k+1)/d^(k+1)`, expected to hold the largest root
/// once `k` is large.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootBracket {
    pub k: usize,
    pub lower: f64,
    pub upper: f64,
}

impl RootBracket {
    pub fn new(d: usize, k: usize) -> Self {
        let df = d as f64;
        let scale = df.powi(k as i32 + 1);
        let a = df - 1.0 + 2.0 * (df - 1.0).powi(2) * (k as f64 + 1.0) / scale;
        Self {
            k,
            lower: 1.0 - a / scale,
            upper: 1.0 - (df - 1.0) / scale,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LargestRoot {
    pub x: f64,
    pub lambda: f64,
    pub bracket: RootBracket,
    pub bracket_satisfied: bool,
}

/// Largest real root `x` of `d^(k+1) x^(2k+2) - d^(k+1) x^(2k+1) + dx - 1 = 0`.
///
/// Note the index: `k` here is one more than the `S_k` index used everywhere
/// else, so the root belongs to the top eigenvalue of `S_(k-1)`.
pub fn largest_x(d: usize, k: usize) -> Result<LargestRoot> {
    if k < 1 {
        return Err(Error::OutOfRange(format!(
            "shifted index k = {k} must be >= 1"
        )));
    }
    let lambda = antisymmetric_eigenvalues(d, k - 1)?
        .last()
        .map(|l| l.lambda)
        .expect("S_k has k+1 eigenvalues");
    let df = d as f64;
    if lambda * lambda < 4.0 * df / (df + 1.0).powi(2) {
        return Err(Error::NoRealRoot { k, lambda });
    }
    let x = x_from_lambda(d, lambda).0.re;
    let bracket = RootBracket::new(d, k);
    Ok(LargestRoot {
        x,
        lambda,
        bracket,
        bracket_satisfied: bracket.contains(x),
    })
}
