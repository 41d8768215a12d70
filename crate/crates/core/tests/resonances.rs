mod common;

use std::f64::consts::PI;

use cavity_states::layered_optics::{stack_coefficients, CavityGeometry};
use cavity_states::resonances::{
    cavity_response, coupling_constants, decay_decomposition, locate_resonance, locate_resonances, mode_profile,
    ResonanceOptions,
};
use common::{c, extraction_geometry, rel};
use proptest::prelude::*;

fn opts() -> ResonanceOptions {
    ResonanceOptions::default()
}

fn plate(n2: num_complex::Complex64, d: f64) -> CavityGeometry {
    CavityGeometry::uniform(1.0, d, c(1.0, 0.0), n2).unwrap()
}

#[test]
fn located_roots_zero_the_cavity_denominator() {
    for (g, k0, k1) in [(extraction_geometry(), 98, 102), (plate(c(1.5, 1e-3), 0.05), 10, 14)] {
        let modes = locate_resonances(&g, k0, k1, &opts()).unwrap();
        assert_eq!(modes.len() as i64, k1 - k0 + 1);
        for m in &modes {
            let d1 = cavity_response(&g, m.omega_complex).unwrap();
            assert!(d1.norm() < 1e-10, "k = {}: |D1| = {:e}", m.k, d1.norm());
            assert!(m.gamma_k > 0.0);
            assert!((m.gamma_k + 2.0 * m.omega_complex.im).abs() < 1e-15 * m.omega_k);
            assert!(m.interval.0 < m.omega_k && m.omega_k < m.interval.1);
            assert!((m.validity_ratio - m.gamma_k / m.width()).abs() < 1e-15);
        }
        assert!(modes.windows(2).all(|w| w[0].omega_k < w[1].omega_k));
    }
}

#[test]
fn highly_reflective_plate_approaches_closed_cavity() {
    let mut last = f64::INFINITY;
    for n2 in [30.0, 100.0, 300.0, 1000.0] {
        // fixed optical thickness 0.3 rad, away from quarter wave
        let d = 0.3 / (n2 * 7.0 * PI);
        let m = locate_resonance(&plate(c(n2, 0.0), d), 7, &opts()).unwrap();
        let err = (m.omega_k - 7.0 * PI).abs() / (7.0 * PI);
        assert!(err < last, "n2 = {n2}: {err:e}");
        last = err;
    }
    assert!(last < 1e-3);
}

#[test]
fn high_q_closure_holds() {
    let m = locate_resonance(&extraction_geometry(), 100, &opts()).unwrap();
    assert!(m.valid);
    assert!(m.closure_residual < 0.05);
    let lossless = locate_resonance(&plate(c(100.0, 0.0), 5e-5), 100, &opts()).unwrap();
    assert_eq!(lossless.gamma_abs, 0.0);
    assert!(rel(lossless.gamma_rad, lossless.gamma_k) < 0.05);
}

/// Lossless low-index plate: Γ_k from the root should match γ_rad within 5%.
#[test]
fn lossless_glass_plate_closure() {
    let modes = locate_resonances(&plate(c(1.5, 0.0), 0.05), 10, 14, &opts()).unwrap();
    for m in &modes {
        assert_eq!(m.gamma_abs, 0.0);
        assert!(
            rel(m.gamma_rad, m.gamma_k) < 0.05,
            "k = {}: Γ = {:.4e}, γ_rad = {:.4e} (Γ/Δω = {:.3})",
            m.k,
            m.gamma_k,
            m.gamma_rad,
            m.validity_ratio
        );
    }
}

#[test]
fn closure_residual_falls_with_plate_loss() {
    for (n2, d, k) in [(100.0, 5e-5, 100), (1.5, 0.05, 12)] {
        let a = locate_resonance(&plate(c(n2, if n2 > 10.0 { 0.1 } else { 1e-3 }), d), k, &opts()).unwrap();
        let b = locate_resonance(&plate(c(n2, if n2 > 10.0 { 0.05 } else { 5e-4 }), d), k, &opts()).unwrap();
        assert!(b.closure_residual < a.closure_residual, "{} !< {}", b.closure_residual, a.closure_residual);
    }
}

#[test]
fn closure_residual_falls_as_q_rises() {
    // plate thicknesses approaching quarter wave raise the reflectivity
    let mut last = (f64::INFINITY, 0.0);
    for d in [9e-5, 8e-5, 7e-5, 6e-5, 5e-5] {
        let m = locate_resonance(&plate(c(100.0, 0.1), d), 100, &opts()).unwrap();
        let q = m.omega_k / m.gamma_k;
        assert!(q > last.1);
        assert!(m.closure_residual < last.0, "d = {d}: {:e}", m.closure_residual);
        last = (m.closure_residual, q);
    }
}

#[test]
fn absorption_grows_with_plate_loss() {
    let mut last = -1.0;
    for i in 0..12 {
        let n2i = 0.02 * i as f64;
        let m = locate_resonance(&plate(c(100.0, n2i), 5e-5), 100, &opts()).unwrap();
        assert!(m.gamma_abs >= last, "n2'' = {n2i}");
        assert!(m.gamma_lambda.plus >= 0.0 && m.gamma_lambda.minus >= 0.0 && m.gamma_lambda.cav == 0.0);
        last = m.gamma_abs;
    }
}

#[test]
fn output_radiative_rate_equals_input_rate_across_sweep() {
    for (g, lo, hi) in [(extraction_geometry(), 300.0, 330.0), (plate(c(1.5, 1e-3), 0.05), 30.0, 45.0)] {
        for i in 0..20 {
            let w = lo + (hi - lo) * i as f64 / 19.0;
            let cp = coupling_constants(&g, w).unwrap();
            let s = stack_coefficients(&g, c(w, 0.0)).unwrap();
            assert_eq!(cp.r_out, s.r31);
            assert!(rel(cp.t_out.norm_sqr(), cp.t.norm_sqr()) < 1e-10, "ω = {w}");
            let r = decay_decomposition(&cp, c(1.0, 0.0), 1.0);
            assert!(rel(r.gamma_rad_out, r.gamma_rad) < 1e-10);
        }
    }
    let m = locate_resonance(&extraction_geometry(), 100, &opts()).unwrap();
    assert!(rel(m.gamma_rad_out, m.gamma_rad) < 1e-10);
}

#[test]
fn mode_profile_has_node_at_mirror_and_is_smooth() {
    let g = extraction_geometry();
    let m = locate_resonance(&g, 100, &opts()).unwrap();
    assert_eq!(mode_profile(&m, &g, 0.0).unwrap().norm(), 0.0);
    assert!(mode_profile(&m, &g, 1.5).is_err());
    let f = |z: f64| mode_profile(&m, &g, z).unwrap();
    let amp = (0..2001).map(|i| f(i as f64 / 2000.0).norm()).fold(0.0, f64::max);
    let h = 1e-6;
    for z in [0.1, 0.33, 0.77] {
        assert!((f(z + h) - f(z)).norm() < 1e-3 * amp);
    }
    // n1 real and β1 l ≈ kπ: the midpoint sits on a node or an antinode of sin(kz·π)
    let mid = f(0.5).norm() / amp;
    assert!(mid < 1e-3 || (mid - 1.0).abs() < 1e-3, "{mid}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn modes_satisfy_rate_invariants(n2r in 20.0f64..200.0, n2i in 0.0f64..0.3, k in 20i64..120) {
        let d = PI / 2.0 / (n2r * k as f64 * PI);
        let g = plate(c(n2r, n2i), d);
        let m = locate_resonance(&g, k, &opts()).unwrap();
        prop_assert!(m.root_residual < 1e-10);
        prop_assert!(m.gamma_k > 0.0 && m.gamma_rad >= 0.0 && m.gamma_abs >= 0.0);
        prop_assert!(m.gamma_lambda.cav >= 0.0 && m.gamma_lambda.plus >= 0.0 && m.gamma_lambda.minus >= 0.0);
        prop_assert!((m.gamma_abs - m.gamma_lambda.total()).abs() <= 1e-15 * m.gamma_k.max(1.0));
        prop_assert!(rel(m.gamma_rad_out, m.gamma_rad) < 1e-10);
        prop_assert!(m.closure_residual < 0.05);
    }
}
