mod common;

use cavity_states::layered_optics::{
    interface_coefficients, propagation_constant, spectral_denominators, stack_coefficients, CavityGeometry,
    OpticalMedium,
};
use common::{boundary_value_stack, c};
use num_complex::Complex64;
use proptest::prelude::*;

fn medium(n: Complex64) -> OpticalMedium {
    OpticalMedium::constant(n).unwrap()
}

fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

#[test]
fn propagation_constant_examples() {
    assert_eq!(propagation_constant(&medium(c(1.5, 0.0)), c(2.0, 0.0)).unwrap(), c(3.0, 0.0));
    assert_eq!(propagation_constant(&OpticalMedium::vacuum(), c(7.25, 0.0)).unwrap(), c(7.25, 0.0));
    assert_eq!(propagation_constant(&medium(c(1.5, 0.1)), c(1.0, 0.0)).unwrap(), c(1.5, 0.1));
}

#[test]
fn air_to_glass_fresnel_conserves_power() {
    let (r, t) = interface_coefficients(&OpticalMedium::vacuum(), &medium(c(1.5, 0.0)), c(3.0, 0.0)).unwrap();
    assert!(close(r, c(-0.2, 0.0), 1e-15));
    assert!(close(t, c(0.8, 0.0), 1e-15));
    assert!((r.norm_sqr() + 1.5 * t.norm_sqr() - 1.0).abs() < 1e-15);
}

#[test]
fn identical_media_have_no_interface() {
    let m = medium(c(1.3, 0.02));
    let (r, t) = interface_coefficients(&m, &m, c(2.0, 0.0)).unwrap();
    assert_eq!((r, t), (c(0.0, 0.0), c(1.0, 0.0)));
}

#[test]
fn vacuum_plate_has_transparent_outer_interface() {
    let g = CavityGeometry::uniform(1.0, 0.1, c(1.5, 0.0), c(1.0, 0.0)).unwrap();
    let s = stack_coefficients(&g, c(4.0, 0.0)).unwrap();
    assert_eq!(s.r23, c(0.0, 0.0));
    assert_eq!(s.t23, c(1.0, 0.0));
}

#[test]
fn vanishing_plate_reduces_to_single_interface() {
    let n1 = c(1.4, 0.003);
    let w = 5.0;
    let direct_r = (n1 - 1.0) / (n1 + 1.0);
    let direct_t = 2.0 * n1 / (n1 + 1.0);
    let mut last = f64::INFINITY;
    for d in [1e-2, 1e-4, 1e-6, 1e-9] {
        let g = CavityGeometry::uniform(1.0, d, n1, c(2.5, 0.1)).unwrap();
        let s = stack_coefficients(&g, c(w, 0.0)).unwrap();
        let err = (s.r13 - direct_r).norm() + (s.t13 - direct_t).norm();
        assert!(err <= last + 1e-15);
        last = err;
    }
    assert!(last < 1e-7);
}

#[test]
fn fully_matched_stack_has_unit_cavity_denominator() {
    let g = CavityGeometry::uniform(1.0, 0.2, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
    let (d1, d2) = spectral_denominators(&g, c(3.3, -0.01)).unwrap();
    assert!(close(d1, c(1.0, 0.0), 1e-15));
    assert!(close(d2, c(1.0, 0.0), 1e-15));
}

#[test]
fn nonpositive_frequency_rejected() {
    let g = CavityGeometry::uniform(1.0, 0.2, c(1.0, 0.0), c(1.5, 0.0)).unwrap();
    assert!(stack_coefficients(&g, c(0.0, -1.0)).is_err());
    assert!(stack_coefficients(&g, c(-2.0, 0.0)).is_err());
}

#[test]
fn coefficients_are_smooth_in_frequency() {
    let g = CavityGeometry::uniform(1.0, 0.05, c(1.0, 0.0), c(1.5, 1e-3)).unwrap();
    let f = |w: f64| stack_coefficients(&g, c(w, 0.0)).unwrap().r13;
    for w in [10.0, 31.4, 47.0] {
        // second differences shrink as h²
        let d2 = |h: f64| (f(w + h) - 2.0 * f(w) + f(w - h)).norm();
        let (a, b) = (d2(1e-2), d2(5e-3));
        assert!(a > 0.0 && (a / b - 4.0).abs() < 0.2, "ratio {}", a / b);
    }
}

fn passive() -> impl Strategy<Value = Complex64> {
    (1.0f64..4.0, 0.0f64..0.5).prop_map(|(re, im)| c(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn matches_boundary_value_solution(n1 in passive(), n2 in passive(), d in 1e-6f64..0.3, w in 0.5f64..40.0) {
        let g = CavityGeometry::uniform(1.0, d, n1, n2).unwrap();
        let s = stack_coefficients(&g, c(w, 0.0)).unwrap();
        let (r13, t13, r31, t31) = boundary_value_stack(n1, n2, d, w);
        prop_assert!(close(s.r13, r13, 1e-10), "r13 {} vs {}", s.r13, r13);
        prop_assert!(close(s.t13, t13, 1e-10), "t13 {} vs {}", s.t13, t13);
        prop_assert!(close(s.r31, r31, 1e-10), "r31 {} vs {}", s.r31, r31);
        prop_assert!(close(s.t31, t31, 1e-10), "t31 {} vs {}", s.t31, t31);
    }

    #[test]
    fn reciprocity_for_all_pairs(n1 in passive(), n2 in passive(), d in 1e-6f64..0.3, wr in 0.5f64..40.0, wi in -0.2f64..0.0) {
        let g = CavityGeometry::uniform(1.0, d, n1, n2).unwrap();
        let s = stack_coefficients(&g, c(wr, wi)).unwrap();
        let tol = 1e-13;
        prop_assert!(close(s.t12 * s.beta2, s.t21 * s.beta1, tol));
        prop_assert!(close(s.t23 * s.beta3, s.t32 * s.beta2, tol));
        prop_assert!(close(s.t13 * s.beta3, s.t31 * s.beta1, tol));
    }

    #[test]
    fn reflection_magnitudes_bounded(n1 in passive(), n2 in passive(), d in 1e-6f64..0.3, w in 0.5f64..40.0) {
        let g = CavityGeometry::uniform(1.0, d, n1, n2).unwrap();
        let s = stack_coefficients(&g, c(w, 0.0)).unwrap();
        for r in [s.r12, s.r21, s.r23, s.r32, s.r13, s.r31] {
            prop_assert!(r.norm() <= 1.0 + 1e-12, "|r| = {}", r.norm());
        }
    }

    #[test]
    fn lossless_stack_conserves_power(n1 in 1.0f64..4.0, n2 in 1.0f64..4.0, d in 1e-6f64..0.3, w in 0.5f64..40.0) {
        let g = CavityGeometry::uniform(1.0, d, c(n1, 0.0), c(n2, 0.0)).unwrap();
        let s = stack_coefficients(&g, c(w, 0.0)).unwrap();
        prop_assert!((s.r31.norm_sqr() + n1 * s.t31.norm_sqr() - 1.0).abs() < 1e-10);
        prop_assert!((s.r13.norm_sqr() + s.t13.norm_sqr() / n1 - 1.0).abs() < 1e-10);
        prop_assert!(s.den.norm() >= 1.0 - (s.r21 * s.r23).norm() - 1e-14);
    }
}
