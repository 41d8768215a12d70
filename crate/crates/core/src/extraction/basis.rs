//! Orthonormal input bases on (Δ_k) under the quadrature inner product
//! ⟨ψ, φ⟩ = Σ_j w_j ψ*(ω_j) φ(ω_j).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::quadrature::QuadratureRule;
use super::{weighted_kernel_matrix, Channel, ExtractionSettings, OutputMode};
use crate::error::{CavityError, Result};
use crate::resonances::ResonantMode;

const ORTHONORMAL_TOL: f64 = 1e-8;
/// Largest grid for which a dense SVD basis is formed.
pub const SVD_MAX_NODES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Svd,
    Legendre,
    Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModeBasis {
    /// Complete basis of normalized grid-point functions δ_ij/√w_j.
    Grid,
    /// First n Legendre polynomials on (Δ_k), re-orthonormalized on the grid.
    Legendre(usize),
    /// Leading n right singular functions of each channel's weighted kernel.
    Svd(usize),
    /// Caller-supplied functions sampled at the grid nodes.
    Sampled(Vec<Vec<Complex64>>),
}

fn inner(rule: &QuadratureRule, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).zip(&rule.weights).map(|((x, y), w)| x.conj() * y * *w).sum()
}

/// Largest deviation of the Gram matrix from the identity.
pub fn orthonormality_defect(rule: &QuadratureRule, funcs: &[Vec<Complex64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in funcs.iter().enumerate() {
        for (j, b) in funcs.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner(rule, a, b) - target).norm());
        }
    }
    worst
}

pub fn check_orthonormal(rule: &QuadratureRule, funcs: &[Vec<Complex64>]) -> Result<()> {
    if let Some(f) = funcs.iter().find(|f| f.len() != rule.len()) {
        return Err(CavityError::invalid(format!(
            "basis function has {} samples, grid has {} nodes",
            f.len(),
            rule.len()
        )));
    }
    let defect = orthonormality_defect(rule, funcs);
    if defect > ORTHONORMAL_TOL {
        return Err(CavityError::NonOrthonormal(defect));
    }
    Ok(())
}

/// Legendre polynomials on [lo, hi] evaluated at the nodes, then
/// Gram–Schmidt (two passes) in the quadrature inner product.
pub fn legendre_functions(rule: &QuadratureRule, lo: f64, hi: f64, size: usize) -> Result<Vec<Vec<Complex64>>> {
    if size > rule.len() {
        return Err(CavityError::invalid(format!("basis size {size} exceeds {} nodes", rule.len())));
    }
    let s: Vec<f64> = rule.nodes.iter().map(|&w| (2.0 * w - lo - hi) / (hi - lo)).collect();
    let mut funcs: Vec<Vec<Complex64>> = Vec::with_capacity(size);
    let (mut p0, mut p1): (Vec<f64>, Vec<f64>) = (vec![1.0; s.len()], s.clone());
    for m in 0..size {
        let pm: Vec<f64> = match m {
            0 => p0.clone(),
            1 => p1.clone(),
            _ => {
                let next: Vec<f64> = s
                    .iter()
                    .zip(p1.iter().zip(&p0))
                    .map(|(&x, (&a, &b))| ((2 * m - 1) as f64 * x * a - (m - 1) as f64 * b) / m as f64)
                    .collect();
                p0 = std::mem::replace(&mut p1, next);
                p1.clone()
            }
        };
        let scale = ((2 * m + 1) as f64 / (hi - lo)).sqrt();
        let mut v: Vec<Complex64> = pm.iter().map(|&p| Complex64::new(p * scale, 0.0)).collect();
        for _ in 0..2 {
            for u in &funcs {
                let c = inner(rule, u, &v);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
            let norm = inner(rule, &v, &v).re.sqrt();
            if !(norm > 1e-12) {
                return Err(CavityError::Singular(format!(
                    "Legendre function {m} is linearly dependent on the grid"
                )));
            }
            for vi in v.iter_mut() {
                *vi /= norm;
            }
        }
        funcs.push(v);
    }
    Ok(funcs)
}

/// ‖K v‖ ≈ σ for each returned pair, as a guard on the decomposition.
fn verified(k: &DMatrix<Complex64>, sv: &[(f64, Vec<Complex64>)]) -> bool {
    let top = sv.first().map_or(0.0, |s| s.0);
    sv.iter().all(|(s, v)| {
        let kv = k * DVector::from_column_slice(v);
        (kv.norm() - s).abs() <= 1e-8 * top.max(f64::MIN_POSITIVE)
    })
}

/// Leading `size` right singular vectors (columns of V) with their singular
/// values, largest first. Falls back to the SVD of Kᴴ when the direct
/// factorization fails its check.
fn right_singular_vectors(k: &DMatrix<Complex64>, size: usize) -> Result<Vec<Vec<Complex64>>> {
    let n = k.ncols();
    let pick = |values: &DVector<f64>, vec_of: &dyn Fn(usize) -> Vec<Complex64>| {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        order.iter().take(size).map(|&i| (values[i], vec_of(i))).collect::<Vec<_>>()
    };
    let svd = k.clone().svd(false, true);
    if let Some(v_t) = &svd.v_t {
        // right singular vector i is the conjugated row i of Vᴴ
        let sv = pick(&svd.singular_values, &|i| (0..n).map(|j| v_t[(i, j)].conj()).collect());
        if verified(k, &sv) {
            return Ok(sv.into_iter().map(|p| p.1).collect());
        }
    }
    let svd = k.adjoint().svd(true, false);
    if let Some(u) = &svd.u {
        let sv = pick(&svd.singular_values, &|i| u.column(i).iter().copied().collect());
        if verified(k, &sv) {
            return Ok(sv.into_iter().map(|p| p.1).collect());
        }
    }
    Err(CavityError::Singular("SVD of the coupling kernel failed its consistency check".into()))
}

fn project_sampled(rule: &QuadratureRule, row: &[Complex64], funcs: &[Vec<Complex64>]) -> Vec<Complex64> {
    let sw: Vec<f64> = rule.weights.iter().map(|w| w.sqrt()).collect();
    funcs
        .iter()
        .map(|psi| row.iter().zip(psi).zip(&sw).map(|((u, p), s)| u * p * s).sum())
        .collect()
}

impl ModeBasis {
    /// χ^(i) = u · ψ̃_i for the weighted coupling row u of one channel.
    pub fn project(
        &self,
        mode: &ResonantMode,
        settings: &ExtractionSettings,
        out: &OutputMode,
        channel: Channel,
        row: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        let rule = &out.rule;
        match self {
            ModeBasis::Grid => Ok(row.to_vec()),
            ModeBasis::Legendre(size) => {
                let funcs = legendre_functions(rule, mode.interval.0, mode.interval.1, *size)?;
                check_orthonormal(rule, &funcs)?;
                Ok(project_sampled(rule, row, &funcs))
            }
            ModeBasis::Sampled(funcs) => {
                check_orthonormal(rule, funcs)?;
                Ok(project_sampled(rule, row, funcs))
            }
            ModeBasis::Svd(size) => {
                let n = rule.len();
                if *size > n {
                    return Err(CavityError::invalid(format!("basis size {size} exceeds {n} nodes")));
                }
                if n > SVD_MAX_NODES {
                    return Err(CavityError::invalid(format!(
                        "SVD basis limited to {SVD_MAX_NODES} nodes, grid has {n}; use the grid or Legendre basis"
                    )));
                }
                let k = weighted_kernel_matrix(mode, settings, out, channel);
                let vs = right_singular_vectors(&k, *size)?;
                Ok(vs.iter().map(|v| row.iter().zip(v).map(|(r, x)| r * x).sum()).collect())
            }
        }
    }
}
