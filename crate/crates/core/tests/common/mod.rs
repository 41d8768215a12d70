//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

pub mod fock;

use cavity_states::layered_optics::CavityGeometry;
use cavity_states::resonances::{locate_resonance, ResonanceOptions, ResonantMode};
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// High-Q lossy-plate geometry used for extraction checks: quarter-wave
/// plate of index 100 + 0.1i at the k = 100 resonance.
pub fn extraction_geometry() -> CavityGeometry {
    CavityGeometry::uniform(1.0, 5e-5, c(1.0, 0.0), c(100.0, 0.1)).unwrap()
}

pub fn extraction_mode() -> ResonantMode {
    locate_resonance(&extraction_geometry(), 100, &ResonanceOptions::default()).unwrap()
}

pub fn lossless_mode() -> ResonantMode {
    let g = CavityGeometry::uniform(1.0, 5e-5, c(1.0, 0.0), c(100.0, 0.0)).unwrap();
    locate_resonance(&g, 100, &ResonanceOptions::default()).unwrap()
}

/// Composite coefficients (r13, t13, r31, t31) from the boundary conditions
/// of a two-interface slab: tangential E and H continuous, fields written as
/// A e^{iβz} + B e^{−iβz} with the plate on 0 ≤ z ≤ d and layer-3 amplitudes
/// referenced to z = d.
pub fn boundary_value_stack(n1: Complex64, n2: Complex64, d: f64, w: f64) -> (Complex64, Complex64, Complex64, Complex64) {
    let (b1, b2, b3) = (n1 * w, n2 * w, c(w, 0.0));
    let e = (I * b2 * d).exp();
    let ei = 1.0 / e;
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    // unknowns: [B1 (reflected in 1), A2, B2, A3/B3 (transmitted in 3)]
    let solve = |from_left: bool| {
        let m = if from_left {
            Matrix4::new(
                -one, one, one, zero, //
                b1, b2, -b2, zero, //
                zero, e, ei, -one, //
                zero, b2 * e, -b2 * ei, -b3,
            )
        } else {
            // incoming from 3 towards −z; unknowns [T1 (left-going in 1), A2, B2, R3 (right-going in 3)]
            Matrix4::new(
                -one, one, one, zero, //
                b1, b2, -b2, zero, //
                zero, e, ei, -one, //
                zero, b2 * e, -b2 * ei, -b3,
            )
        };
        let rhs = if from_left {
            Vector4::new(one, b1, zero, zero)
        } else {
            Vector4::new(zero, zero, one, -b3)
        };
        m.lu().solve(&rhs).unwrap()
    };
    let l = solve(true);
    let r = solve(false);
    (l[0], l[3], r[3], r[0])
}

/// Adaptive-free reference integral of a smooth function on [a, b] by
/// composite 20-point Gauss–Legendre on many equal panels.
pub fn panel_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    // nodes from the Golub–Welsch eigenproblem, independent of the library rule
    let n = 20;
    let mut jm = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let bi = i as f64 / ((4 * i * i - 1) as f64).sqrt();
        jm[(i, i - 1)] = bi;
        jm[(i - 1, i)] = bi;
    }
    let eig = jm.symmetric_eigen();
    let nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let weights: Vec<f64> = (0..n).map(|i| 2.0 * eig.eigenvectors[(0, i)].powi(2)).collect();
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let mid = a + h * (p as f64 + 0.5);
        for (x, w) in nodes.iter().zip(&weights) {
            s += 0.5 * h * w * f(mid + 0.5 * h * x);
        }
    }
    s
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
