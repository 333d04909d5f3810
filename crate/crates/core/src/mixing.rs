//! Interchange-process quantities built on the tree spectrum: the spectral
//! gap of the card shuffle and Wilson's lower-bound threshold `t₀`.
//!
//! The witness statistic is `F(σ) = Σ_v f(v) f(σ(v))` where `f` is the
//! second eigenvector of `Q_h`, supported on the subtrees of the first two
//! children of the root. One step of the shuffle contracts `E F` by
//!
//! ```text
//! λ' = (n - d/2 - 3/2 + λ₂ (d+1)/2) / (n - 1),   1 - λ' = (d+1)(1 - λ₂) / (2(n-1)).
//! ```
//!
//! All logarithms are natural.

use num_complex::Complex64;
use serde::Serialize;

use crate::eigenbasis::antisymmetric_eigenvector;
use crate::error::{Error, Result};
use crate::simulator::Permutation;
use crate::spectrum::{full_spectrum, x_from_lambda, Family, SpectrumTable};
use crate::tree::TreeGeometry;

#[derive(Debug, Clone, PartialEq)]
pub struct WilsonWitness {
    pub f: Vec<f64>,
    pub lambda: f64,
    pub x: Complex64,
    /// `λ² ≥ 4d/(d+1)²`: `x` is real and `f` follows the explicit level formula.
    pub real_x_regime: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilsonReport {
    pub d: usize,
    pub h: usize,
    pub n: usize,
    pub epsilon: f64,
    pub lambda2: f64,
    pub lambda_prime: f64,
    pub gamma: f64,
    pub f_id: f64,
    pub r_closed_form: f64,
    pub r_computed: f64,
    pub t0_closed_form_r: f64,
    pub t0_computed_r: f64,
    /// `t₀` with the closed-form `R` has a non-positive numerator.
    pub vacuous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceBound {
    /// `64 d⁴ / (n-1)`.
    pub r_closed_form: f64,
    /// `(2 max|f|)² Σ_edges (f(u) - f(v))² / (2(n-1))`.
    pub r_computed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterchangeGap {
    /// `(d+1)/(2(n-1)) · (1 - λ₂)`.
    pub gap: f64,
    /// `(d-1)² / (2(n-1) d^(h+1))`.
    pub formula: f64,
}

/// Second eigenvector of `Q_h` for the Wilson statistic.
///
/// In the real-`x` regime the level values on the first child subtree are
/// `d x^(ℓ+2) - 1/(d^(ℓ-1) x^(ℓ-2))` (ℓ the tree level), negated on the second
/// child subtree; this is the `y₀ = 1` lift scaled by `x(dx² - 1)`.
/// Otherwise the `y₀ = 1` lift itself is used.
pub fn wilson_witness(g: &TreeGeometry, spectrum: &SpectrumTable) -> Result<WilsonWitness> {
    let top_k = g.h() - 1;
    let line = spectrum
        .lines
        .iter()
        .filter(|l| l.family == Family::AntiSymmetric { k: top_k })
        .max_by(|a, b| a.lambda.total_cmp(&b.lambda))
        .ok_or_else(|| Error::InvalidConstruction(format!("spectrum has no S_{top_k} lines")))?;
    let lambda = line.lambda;
    let d = g.d() as f64;
    let real_x_regime = lambda * lambda >= 4.0 * d / (d + 1.0).powi(2);
    if !real_x_regime {
        let rec = antisymmetric_eigenvector(g, line, g.root(), 1)?;
        return Ok(WilsonWitness {
            f: rec.values,
            lambda,
            x: line.x_pair.0,
            real_x_regime,
        });
    }
    let x = x_from_lambda(g.d(), lambda).0.re;
    let mut f = vec![0.0; g.n()];
    let (left, right) = (g.child(0, 1), g.child(0, 2));
    for level in 1..=g.h() {
        let l = level as i32;
        let value = d * x.powi(l + 2) - x.powi(2 - l) * d.powi(1 - l);
        f[g.subtree_level_slice(left, level - 1)?].fill(value);
        f[g.subtree_level_slice(right, level - 1)?].fill(-value);
    }
    Ok(WilsonWitness {
        f,
        lambda,
        x: Complex64::new(x, 0.0),
        real_x_regime,
    })
}

/// `F(σ) = Σ_v f(v) f(σ(v))`.
pub fn f_statistic(f: &[f64], sigma: &Permutation) -> f64 {
    f.iter().zip(sigma.mapping()).map(|(&a, &s)| a * f[s]).sum()
}

/// `λ' = (n - d/2 - 3/2 + λ₂(d+1)/2)/(n-1)`.
pub fn contraction_factor(d: usize, h: usize, lambda2: f64) -> Result<f64> {
    let n = TreeGeometry::new(d, h)?.n() as f64;
    let d = d as f64;
    Ok((n - d / 2.0 - 1.5 + lambda2 * (d + 1.0) / 2.0) / (n - 1.0))
}

/// `1 - λ'`, evaluated without cancellation.
pub fn contraction_gap(d: usize, n: usize, lambda2: f64) -> f64 {
    (d as f64 + 1.0) * (1.0 - lambda2) / (2.0 * (n as f64 - 1.0))
}

pub fn variance_bound(g: &TreeGeometry, f: &[f64]) -> VarianceBound {
    let n1 = g.n() as f64 - 1.0;
    let d = g.d() as f64;
    let max_f = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let edge_energy: f64 = g
        .edge_list()
        .edges
        .iter()
        .map(|&(u, v)| (f[u] - f[v]).powi(2))
        .sum();
    VarianceBound {
        r_closed_form: 64.0 * d.powi(4) / n1,
        r_computed: (2.0 * max_f).powi(2) * edge_energy / (2.0 * n1),
    }
}

/// `(log F(id) + ½ log(γ ε / (4R))) / (-log(1 - γ))`, and whether the
/// numerator is non-positive.
pub fn wilson_threshold(f_id: f64, gamma: f64, epsilon: f64, r: f64) -> (f64, bool) {
    let numerator = f_id.ln() + 0.5 * (gamma * epsilon / (4.0 * r)).ln();
    (numerator / -(-gamma).ln_1p(), numerator <= 0.0)
}

pub fn wilson_lower_bound(g: &TreeGeometry, epsilon: f64) -> Result<WilsonReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon = {epsilon} must lie in (0, 1)"
        )));
    }
    let spectrum = full_spectrum(g.d(), g.h())?;
    let witness = wilson_witness(g, &spectrum)?;
    let lambda2 = witness.lambda;
    let lambda_prime = contraction_factor(g.d(), g.h(), lambda2)?;
    let gamma = contraction_gap(g.d(), g.n(), lambda2);
    if !(gamma > 0.0 && gamma < 2.0 - std::f64::consts::SQRT_2) {
        return Err(Error::InvalidConstruction(format!(
            "gamma = {gamma} outside (0, 2 - √2)"
        )));
    }
    let f_id: f64 = witness.f.iter().map(|v| v * v).sum();
    let bound = variance_bound(g, &witness.f);
    let (t0_closed_form_r, vacuous) = wilson_threshold(f_id, gamma, epsilon, bound.r_closed_form);
    let (t0_computed_r, _) = wilson_threshold(f_id, gamma, epsilon, bound.r_computed);
    Ok(WilsonReport {
        d: g.d(),
        h: g.h(),
        n: g.n(),
        epsilon,
        lambda2,
        lambda_prime,
        gamma,
        f_id,
        r_closed_form: bound.r_closed_form,
        r_computed: bound.r_computed,
        t0_closed_form_r,
        t0_computed_r,
        vacuous,
    })
}

/// Gap of the interchange process, equal to that of the single-card chain
/// `Q' = aI + bQ`, i.e. `b (1 - λ₂)`.
pub fn interchange_gap(d: usize, h: usize) -> Result<InterchangeGap> {
    let g = TreeGeometry::new(d, h)?;
    let lambda2 = full_spectrum(d, h)?.lambda2();
    let n1 = g.n() as f64 - 1.0;
    let df = d as f64;
    Ok(InterchangeGap {
        gap: contraction_gap(d, g.n(), lambda2),
        formula: (df - 1.0).powi(2) / (2.0 * n1 * df.powi(h as i32 + 1)),
    })
}

/// Largest ratio `|f(u) - f(v)| / (2/d^(ℓ-1))` over edges from level `ℓ`
/// to `ℓ + 1`; at most 1 when the increment bound holds.
pub fn edge_increment_ratio(g: &TreeGeometry, f: &[f64]) -> f64 {
    let d = g.d() as f64;
    g.edge_list()
        .edges
        .iter()
        .map(|&(p, c)| {
            let bound = 2.0 / d.powi(g.level(p) as i32 - 1);
            (f[p] - f[c]).abs() / bound
        })
        .fold(0.0, f64::max)
}
