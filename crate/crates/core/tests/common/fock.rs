//! Truncated number-basis oracle: states built from matrix exponentials of
//! ladder-operator generators, Wigner values from the displaced-parity
//! expectation W(α) = (2/π) Σ_m (−1)^m |⟨m|D(−α)|ψ⟩|².

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub fn annihilation(dim: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::zeros(dim, dim);
    for m in 1..dim {
        a[(m - 1, m)] = Complex64::new((m as f64).sqrt(), 0.0);
    }
    a
}

/// D(β) = exp(β a† − β* a) in the truncated space.
pub fn displacement(beta: Complex64, dim: usize) -> DMatrix<Complex64> {
    let a = annihilation(dim);
    let ad = a.adjoint();
    (ad * beta - a * beta.conj()).exp()
}

pub fn number_state(n: usize, dim: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(dim);
    v[n] = Complex64::new(1.0, 0.0);
    v
}

/// S(r)|n⟩ with S(r) = exp[(r/2)(a² − a†²)] when `squeeze_x`, otherwise the
/// opposite sign so that p is squeezed. Built in a larger space and cut to `dim`.
pub fn squeezed_number(n: usize, r: f64, squeeze_x: bool, dim: usize) -> DVector<Complex64> {
    let big = dim + 120;
    let a = annihilation(big);
    let a2 = &a * &a;
    let ad2 = a2.adjoint();
    let s = if squeeze_x { r } else { -r };
    let gen = (a2 - ad2) * Complex64::new(0.5 * s, 0.0);
    let v = gen.exp() * number_state(n, big);
    let tail: f64 = v.iter().skip(dim).map(|x| x.norm_sqr()).sum();
    assert!(tail < 1e-12, "squeezed state truncated at dim {dim}: lost weight {tail:e}");
    v.rows(0, dim).into_owned()
}

pub fn coherent(beta: Complex64, dim: usize) -> DVector<Complex64> {
    let big = dim + 80;
    let v = displacement(beta, big) * number_state(0, big);
    v.rows(0, dim).into_owned()
}

fn parity_sum(v: &DVector<Complex64>) -> f64 {
    v.iter()
        .enumerate()
        .map(|(m, x)| if m % 2 == 0 { x.norm_sqr() } else { -x.norm_sqr() })
        .sum()
}

/// Weight in the top `k` number states.
pub fn tail_weight(v: &DVector<Complex64>, k: usize) -> f64 {
    v.iter().skip(v.len().saturating_sub(k)).map(|x| x.norm_sqr()).sum()
}

/// Wigner function of a pure state on an M×M grid of half-width L around
/// `center` (rows of constant p, x increasing), by stepping displacements.
pub fn wigner_grid_pure(psi: &DVector<Complex64>, center: Complex64, half: f64, m: usize) -> Vec<f64> {
    let dim = psi.len();
    let h = 2.0 * half / (m - 1) as f64;
    let step_x = displacement(Complex64::new(-h, 0.0), dim);
    let step_p = displacement(Complex64::new(0.0, -h), dim);
    let corner = center - Complex64::new(half, half);
    let mut row_start = displacement(-corner, dim) * psi;
    let mut out = vec![0.0; m * m];
    for j in 0..m {
        let mut v = row_start.clone();
        for i in 0..m {
            assert!(tail_weight(&v, 10) < 1e-8, "displaced state reaches the truncation edge");
            out[j * m + i] = 2.0 / std::f64::consts::PI * parity_sum(&v);
            if i + 1 < m {
                v = &step_x * v;
            }
        }
        if j + 1 < m {
            row_start = &step_p * row_start;
        }
    }
    out
}

/// Mixture Σ p_i |ψ_i⟩⟨ψ_i|.
pub fn wigner_grid_mixed(parts: &[(f64, DVector<Complex64>)], center: Complex64, half: f64, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for (p, psi) in parts {
        for (o, w) in out.iter_mut().zip(wigner_grid_pure(psi, center, half, m)) {
            *o += p * w;
        }
    }
    out
}

/// Thermal state as a list of number-state components with p_m ≥ 1e-14.
pub fn thermal_components(nbar: f64, dim: usize) -> Vec<(f64, DVector<Complex64>)> {
    let mut parts = Vec::new();
    let q = nbar / (1.0 + nbar);
    let mut p = 1.0 / (1.0 + nbar);
    let mut m = 0;
    while p > 1e-14 && m < dim {
        parts.push((p, number_state(m, dim)));
        p *= q;
        m += 1;
    }
    parts
}

/// Pure-loss channel with amplitude transmissivity `eta` applied to |ψ⟩,
/// returned as normalized Kraus branches A_k|ψ⟩ with their weights, where
/// A_k|m⟩ = √C(m,k) η^{m−k} (1−η²)^{k/2} |m−k⟩.
pub fn pure_loss_components(psi: &DVector<Complex64>, eta: f64) -> Vec<(f64, DVector<Complex64>)> {
    let dim = psi.len();
    let mut ln_fact = vec![0.0f64; dim + 1];
    for m in 1..=dim {
        ln_fact[m] = ln_fact[m - 1] + (m as f64).ln();
    }
    let (le, lr) = (eta.ln(), (1.0 - eta * eta).ln());
    let mut parts = Vec::new();
    for k in 0..dim {
        let mut v = DVector::<Complex64>::zeros(dim);
        for m in k..dim {
            let ln_c = 0.5 * (ln_fact[m] - ln_fact[k] - ln_fact[m - k]);
            let amp = if eta == 0.0 {
                if m == k { (0.5 * k as f64 * lr).exp() } else { 0.0 }
            } else {
                (ln_c + (m - k) as f64 * le + 0.5 * k as f64 * lr).exp()
            };
            v[m - k] = psi[m] * amp;
        }
        let w = v.norm_squared();
        if w > 1e-15 {
            parts.push((w, v / Complex64::new(w.sqrt(), 0.0)));
        }
    }
    parts
}
