//! Direct-quadrature convolutions on uniform lattices. Gaussian kernels are
//! applied as products of one-dimensional Toeplitz matrices; general
//! distributions are split into separable terms first.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{GridSpec, StateSpec, WignerGrid};
use crate::error::{CavityError, Result};

const MAX_LATTICE: usize = 12_000;
const MAX_NESTED_LATTICE: usize = 4_000;
/// Gaussian kernels are cut where they fall below e^{−32}.
const KERNEL_REACH: f64 = 8.0;
const HERMITE_ORDER: usize = 16;

/// A phase-space density with a box outside which it is negligible.
pub(crate) struct Density<'a> {
    pub f: Box<dyn Fn(Complex64) -> f64 + Sync + 'a>,
    pub center: Complex64,
    pub rx: f64,
    pub rp: f64,
    pub feature: f64,
}

fn gauss_1d(d: f64, s: f64) -> f64 {
    (2.0 / (PI * s)).sqrt() * (-2.0 * d * d / s).exp()
}

/// Physicists' Gauss–Hermite rule with weights divided by √π.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = j.symmetric_eigen();
    let nodes = eig.eigenvalues.iter().copied().collect();
    let weights = (0..n).map(|i| eig.eigenvectors[(0, i)].powi(2)).collect();
    (nodes, weights)
}

struct Lattice {
    start: f64,
    h: f64,
    n: usize,
}

impl Lattice {
    fn centered(lo: f64, hi: f64, h: f64) -> Result<Self> {
        let n = ((hi - lo) / h).ceil() as usize + 1;
        if n > MAX_LATTICE {
            return Err(CavityError::invalid(format!(
                "source lattice needs {n} points per axis; the smoothing width is too small for direct quadrature"
            )));
        }
        let mid = 0.5 * (lo + hi);
        Ok(Self { start: mid - 0.5 * (n - 1) as f64 * h, h, n })
    }

    fn at(&self, i: usize) -> f64 {
        self.start + i as f64 * self.h
    }
}

/// Rows p, columns x.
fn sample(f: &(dyn Fn(Complex64) -> f64 + Sync), lx: &Lattice, lp: &Lattice) -> DMatrix<f64> {
    let mut rows = vec![0.0; lx.n * lp.n];
    rows.par_chunks_mut(lx.n).enumerate().for_each(|(j, row)| {
        let p = lp.at(j);
        for (i, v) in row.iter_mut().enumerate() {
            *v = f(Complex64::new(lx.at(i), p));
        }
    });
    DMatrix::from_row_slice(lp.n, lx.n, &rows)
}

/// T[I, i] = g(out_I − λ·src_i − shift)·h for the 1-D Gaussian of variance s/4.
fn gaussian_matrix(out: &[f64], src: &Lattice, lambda: f64, shift: f64, s: f64) -> DMatrix<f64> {
    DMatrix::from_fn(out.len(), src.n, |a, i| gauss_1d(out[a] - lambda * src.at(i) - shift, s) * src.h)
}

fn to_grid(spec: &GridSpec, w: &DMatrix<f64>) -> WignerGrid {
    let m = spec.resolution;
    let mut values = vec![0.0; m * m];
    for j in 0..m {
        for i in 0..m {
            values[j * m + i] = w[(j, i)];
        }
    }
    WignerGrid { center: spec.center, half_extent: spec.half_extent, resolution: m, values }
}

/// W_out(α) = ∫d²y F(y)·(2/πs)·exp(−2|λy + shift − α|²/s).
pub(crate) fn gaussian_smoothing(
    d: &Density<'_>,
    lambda: f64,
    shift: Complex64,
    s: f64,
    spec: &GridSpec,
) -> Result<WignerGrid> {
    if s < 1e-14 {
        if lambda == 0.0 {
            return Err(CavityError::invalid("degenerate map: no cavity contribution and no noise"));
        }
        let l2 = lambda * lambda;
        return Ok(WignerGrid::from_fn(spec, |a| (d.f)((a - shift) / lambda) / l2));
    }
    if lambda == 0.0 {
        return Ok(WignerGrid::from_fn(spec, |a| 2.0 / (PI * s) * (-2.0 * (a - shift).norm_sqr() / s).exp()));
    }
    let sigma_g = 0.5 * s.sqrt();
    let sigma_w = lambda * d.feature;
    if sigma_g < 0.25 * sigma_w {
        // narrow kernel: average F over Gaussian nodes around each output point
        let (t, w) = gauss_hermite(HERMITE_ORDER);
        let u: Vec<f64> = t.iter().map(|t| std::f64::consts::SQRT_2 * sigma_g * t).collect();
        let l2 = lambda * lambda;
        return Ok(WignerGrid::from_fn(spec, |a| {
            let base = a - shift;
            let mut acc = 0.0;
            for (ux, wx) in u.iter().zip(&w) {
                for (up, wp) in u.iter().zip(&w) {
                    acc += wx * wp * (d.f)((base + Complex64::new(*ux, *up)) / lambda);
                }
            }
            acc / l2
        }));
    }
    let sigma_gy = sigma_g / lambda;
    let h = (spec.spacing() / lambda).min(0.7 / (d.feature.powi(-2) + sigma_gy.powi(-2)).sqrt());
    let reach = KERNEL_REACH * sigma_g;
    let x_lo = (d.center.re - d.rx).max((spec.x(0) - shift.re - reach) / lambda);
    let x_hi = (d.center.re + d.rx).min((spec.x(spec.resolution - 1) - shift.re + reach) / lambda);
    let p_lo = (d.center.im - d.rp).max((spec.p(0) - shift.im - reach) / lambda);
    let p_hi = (d.center.im + d.rp).min((spec.p(spec.resolution - 1) - shift.im + reach) / lambda);
    let m = spec.resolution;
    if x_lo >= x_hi || p_lo >= p_hi {
        return Ok(WignerGrid { center: spec.center, half_extent: spec.half_extent, resolution: m, values: vec![0.0; m * m] });
    }
    let lx = Lattice::centered(x_lo, x_hi, h)?;
    let lp = Lattice::centered(p_lo, p_hi, h)?;
    let src = sample(d.f.as_ref(), &lx, &lp);
    let xs: Vec<f64> = (0..m).map(|i| spec.x(i)).collect();
    let ps: Vec<f64> = (0..m).map(|j| spec.p(j)).collect();
    let tx = gaussian_matrix(&xs, &lx, lambda, shift.re, s);
    let tp = gaussian_matrix(&ps, &lp, lambda, shift.im, s);
    Ok(to_grid(spec, &(tp * src * tx.transpose())))
}

/// Distribution of χ·a for a ∼ W: Ŵ(c) = W(c/χ)/|χ|².
pub(crate) struct Piece<'a> {
    density: Density<'a>,
}

impl<'a> Piece<'a> {
    pub fn scaled(state: &'a StateSpec, chi: Complex64) -> Self {
        let (c, rx, rp) = state.support();
        let k = chi.norm();
        let rotated = chi.im != 0.0 || chi.re < 0.0;
        let (rx, rp) = if rotated { (k * rx.max(rp), k * rx.max(rp)) } else { (k * rx, k * rp) };
        let inv = 1.0 / chi;
        let k2 = k * k;
        Piece {
            density: Density {
                f: Box::new(move |a: Complex64| state.wigner(a * inv) / k2),
                center: chi * c,
                rx,
                rp,
                feature: k * state.feature_scale(),
            },
        }
    }
}

/// Values on the lattice points (k0 + i)·h along each axis.
struct Aligned {
    values: DMatrix<f64>,
    kx: i64,
    kp: i64,
}

fn aligned_range(c: f64, r: f64, h: f64) -> Result<(i64, usize)> {
    let lo = ((c - r) / h).floor() as i64;
    let hi = ((c + r) / h).ceil() as i64;
    let n = (hi - lo + 1) as usize;
    if n > MAX_NESTED_LATTICE {
        return Err(CavityError::invalid(format!(
            "nested quadrature needs {n} lattice points per axis; a coupling is too small relative to the state's extent"
        )));
    }
    Ok((lo, n))
}

fn sample_aligned(d: &Density<'_>, h: f64) -> Result<Aligned> {
    let (kx, nx) = aligned_range(d.center.re, d.rx, h)?;
    let (kp, np) = aligned_range(d.center.im, d.rp, h)?;
    let lx = Lattice { start: kx as f64 * h, h, n: nx };
    let lp = Lattice { start: kp as f64 * h, h, n: np };
    Ok(Aligned { values: sample(d.f.as_ref(), &lx, &lp), kx, kp })
}

/// Full discrete convolution along one axis with kernel u: (n_a + n_u − 1)×n_a.
fn toeplitz(u: &[f64], n_a: usize) -> DMatrix<f64> {
    let rows = n_a + u.len() - 1;
    DMatrix::from_fn(rows, n_a, |r, c| if r >= c && r - c < u.len() { u[r - c] } else { 0.0 })
}

/// B ≈ Σ_k u_k v_kᵀ by cross approximation with complete pivoting
/// (Gaussian elimination stopped once the residual is negligible).
fn separable_terms(b: &DMatrix<f64>) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut r = b.clone();
    let scale = b.amax();
    let mut terms = Vec::new();
    if scale == 0.0 {
        return Ok(terms);
    }
    while terms.len() < b.nrows().min(b.ncols()) {
        let (mut pj, mut pi, mut best) = (0, 0, 0.0f64);
        for i in 0..r.ncols() {
            for j in 0..r.nrows() {
                let v = r[(j, i)].abs();
                if v > best {
                    (pj, pi, best) = (j, i, v);
                }
            }
        }
        if best <= 1e-14 * scale {
            return Ok(terms);
        }
        let u: Vec<f64> = r.column(pi).iter().copied().collect();
        let pivot = r[(pj, pi)];
        let v: Vec<f64> = r.row(pj).iter().map(|x| x / pivot).collect();
        for i in 0..r.ncols() {
            for j in 0..r.nrows() {
                r[(j, i)] -= u[j] * v[i];
            }
        }
        terms.push((u, v));
    }
    if r.amax() > 1e-12 * scale {
        return Err(CavityError::Singular("separable expansion of a channel distribution did not converge".into()));
    }
    Ok(terms)
}

fn convolve(a: &Aligned, b: &Aligned, h: f64) -> Result<Aligned> {
    let rows = a.values.nrows() + b.values.nrows() - 1;
    let cols = a.values.ncols() + b.values.ncols() - 1;
    if rows > MAX_NESTED_LATTICE || cols > MAX_NESTED_LATTICE {
        return Err(CavityError::invalid("nested quadrature lattice grew beyond its size limit"));
    }
    let mut out = DMatrix::<f64>::zeros(rows, cols);
    for (up, vx) in separable_terms(&b.values)? {
        let tp = toeplitz(&up, a.values.nrows());
        let tx = toeplitz(&vx, a.values.ncols());
        out += (tp * &a.values * tx.transpose()) * (h * h);
    }
    Ok(trim(Aligned { values: out, kx: a.kx + b.kx, kp: a.kp + b.kp }))
}

/// Drops border rows and columns that carry nothing.
fn trim(a: Aligned) -> Aligned {
    let v = &a.values;
    let peak = v.amax();
    let cut = 1e-16 * peak;
    let row_live = |j: usize| v.row(j).amax() > cut;
    let col_live = |i: usize| v.column(i).amax() > cut;
    let (mut j0, mut j1) = (0, v.nrows());
    while j0 + 1 < j1 && !row_live(j0) {
        j0 += 1;
    }
    while j1 - 1 > j0 && !row_live(j1 - 1) {
        j1 -= 1;
    }
    let (mut i0, mut i1) = (0, v.ncols());
    while i0 + 1 < i1 && !col_live(i0) {
        i0 += 1;
    }
    while i1 - 1 > i0 && !col_live(i1 - 1) {
        i1 -= 1;
    }
    Aligned {
        values: v.view((j0, i0), (j1 - j0, i1 - i0)).into_owned(),
        kx: a.kx + i0 as i64,
        kp: a.kp + j0 as i64,
    }
}

/// Convolves the pieces on a common lattice, then applies the vacuum
/// Gaussian of variance s0/4 while evaluating on the output grid.
pub(crate) fn nested_convolution(pieces: &[Piece<'_>], s0: f64, spec: &GridSpec) -> Result<WignerGrid> {
    if pieces.is_empty() {
        return Ok(WignerGrid::from_fn(spec, |a| 2.0 / (PI * s0) * (-2.0 * a.norm_sqr() / s0).exp()));
    }
    let sigma0 = 0.5 * s0.sqrt();
    let finest = pieces.iter().map(|p| p.density.feature).fold(f64::INFINITY, f64::min);
    let h = spec.spacing().min(0.5 * finest).min(0.7 * sigma0);
    let mut acc = sample_aligned(&pieces[0].density, h)?;
    for p in &pieces[1..] {
        let b = sample_aligned(&p.density, h)?;
        acc = convolve(&acc, &b, h)?;
    }
    let m = spec.resolution;
    let xs: Vec<f64> = (0..m).map(|i| spec.x(i)).collect();
    let ps: Vec<f64> = (0..m).map(|j| spec.p(j)).collect();
    let lx = Lattice { start: acc.kx as f64 * h, h, n: acc.values.ncols() };
    let lp = Lattice { start: acc.kp as f64 * h, h, n: acc.values.nrows() };
    let tx = gaussian_matrix(&xs, &lx, 1.0, 0.0, s0);
    let tp = gaussian_matrix(&ps, &lp, 1.0, 0.0, s0);
    Ok(to_grid(spec, &(tp * &acc.values * tx.transpose())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_moments() {
        let (t, w) = gauss_hermite(HERMITE_ORDER);
        let m0: f64 = w.iter().sum();
        let m2: f64 = t.iter().zip(&w).map(|(t, w)| w * t * t).sum();
        let m4: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(4)).sum();
        assert!((m0 - 1.0).abs() < 1e-13);
        assert!((m2 - 0.5).abs() < 1e-13);
        assert!((m4 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn cross_approximation_reproduces_low_rank_matrices() {
        let b = DMatrix::from_fn(29, 30, |j, i| {
            let (x, p) = (i as f64 * 0.05 - 0.75, j as f64 * 0.05 - 0.7);
            (-50.0 * (x * x + p * p)).exp() + 0.3 * (x * p * 3.0).cos()
        });
        let terms = separable_terms(&b).unwrap();
        let mut rec = DMatrix::<f64>::zeros(29, 30);
        for (u, v) in &terms {
            rec += nalgebra::DVector::from_column_slice(u) * nalgebra::RowDVector::from_row_slice(v);
        }
        assert!((rec - &b).amax() < 1e-12);
        assert!(terms.len() < 29);
    }

    #[test]
    fn toeplitz_is_full_convolution() {
        let t = toeplitz(&[1.0, 2.0], 3);
        let a = nalgebra::DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let c = t * a;
        assert_eq!(c.as_slice(), &[1.0, 2.0, -1.0, -2.0]);
    }
}
