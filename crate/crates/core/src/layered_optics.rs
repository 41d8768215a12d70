//! Normal-incidence optics of the planar stack
//! perfect mirror | layer 1 (cavity, length l) | layer 2 (plate, thickness d) | vacuum.
//!
//! Natural units c = 1 throughout, so a propagation constant is n(ω)·ω.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Linear-interpolated dispersion curve sampled at increasing real frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionTable {
    pub omega: Vec<f64>,
    pub index: Vec<Complex64>,
}

impl DispersionTable {
    pub fn new(omega: Vec<f64>, index: Vec<Complex64>) -> Result<Self> {
        if omega.len() != index.len() || omega.is_empty() {
            return Err(CavityError::invalid(
                "dispersion table needs equal, nonzero numbers of frequencies and indices",
            ));
        }
        if omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CavityError::invalid(
                "dispersion table frequencies must be strictly increasing",
            ));
        }
        let table = DispersionTable { omega, index };
        for n in &table.index {
            check_passive(*n)?;
        }
        Ok(table)
    }

    /// Evaluates at Re ω. Tables are never continued into the complex plane,
    /// so a root search holds n at its real-frequency value.
    pub fn at(&self, omega: f64) -> Complex64 {
        let w = &self.omega;
        if omega <= w[0] {
            return self.index[0];
        }
        if omega >= w[w.len() - 1] {
            return self.index[w.len() - 1];
        }
        let j = w.partition_point(|&x| x <= omega);
        let (w0, w1) = (w[j - 1], w[j]);
        let s = (omega - w0) / (w1 - w0);
        self.index[j - 1] * (1.0 - s) + self.index[j] * s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OpticalMedium {
    Constant(Complex64),
    Tabulated(DispersionTable),
}

fn check_passive(n: Complex64) -> Result<()> {
    if !(n.re > 0.0) || !(n.im >= 0.0) || !n.is_finite() {
        return Err(CavityError::invalid(format!(
            "refractive index {n} is not passive (need n' > 0, n'' >= 0)"
        )));
    }
    Ok(())
}

impl OpticalMedium {
    pub fn constant(n: Complex64) -> Result<Self> {
        check_passive(n)?;
        Ok(OpticalMedium::Constant(n))
    }

    pub fn vacuum() -> Self {
        OpticalMedium::Constant(ONE)
    }

    pub fn index(&self, omega: Complex64) -> Complex64 {
        match self {
            OpticalMedium::Constant(n) => *n,
            OpticalMedium::Tabulated(t) => t.at(omega.re),
        }
    }

    /// True when the medium has no absorption anywhere.
    pub fn is_lossless(&self) -> bool {
        match self {
            OpticalMedium::Constant(n) => n.im == 0.0,
            OpticalMedium::Tabulated(t) => t.index.iter().all(|n| n.im == 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OpticalMedium::Constant(n) => check_passive(*n),
            OpticalMedium::Tabulated(t) => t.index.iter().try_for_each(|n| check_passive(*n)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    pub l: f64,
    pub d: f64,
    pub medium1: OpticalMedium,
    pub medium2: OpticalMedium,
}

impl CavityGeometry {
    pub fn new(l: f64, d: f64, medium1: OpticalMedium, medium2: OpticalMedium) -> Result<Self> {
        let g = CavityGeometry { l, d, medium1, medium2 };
        g.validate()?;
        Ok(g)
    }

    /// Constant-index convenience constructor.
    pub fn uniform(l: f64, d: f64, n1: Complex64, n2: Complex64) -> Result<Self> {
        Self::new(l, d, OpticalMedium::constant(n1)?, OpticalMedium::constant(n2)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(CavityError::invalid(format!("cavity length l = {} must be > 0", self.l)));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(CavityError::invalid(format!("plate thickness d = {} must be > 0", self.d)));
        }
        self.medium1.validate()?;
        self.medium2.validate()
    }

    pub fn n1(&self, omega: Complex64) -> Complex64 {
        self.medium1.index(omega)
    }

    pub fn n2(&self, omega: Complex64) -> Complex64 {
        self.medium2.index(omega)
    }
}

/// β = n(ω)·ω for complex ω with Re ω > 0.
pub fn propagation_constant(medium: &OpticalMedium, omega: Complex64) -> Result<Complex64> {
    if !(omega.re > 0.0) {
        return Err(CavityError::NonPositiveFrequency(omega));
    }
    Ok(medium.index(omega) * omega)
}

fn fresnel(beta_a: Complex64, beta_b: Complex64) -> Result<(Complex64, Complex64)> {
    let sum = beta_a + beta_b;
    if sum.norm() == 0.0 {
        return Err(CavityError::Singular("beta_A + beta_B = 0 at interface".into()));
    }
    Ok(((beta_a - beta_b) / sum, 2.0 * beta_a / sum))
}

/// Single-interface reflection and transmission (r_AB, t_AB) for a wave
/// travelling from A into B.
pub fn interface_coefficients(
    medium_a: &OpticalMedium,
    medium_b: &OpticalMedium,
    omega: Complex64,
) -> Result<(Complex64, Complex64)> {
    fresnel(
        propagation_constant(medium_a, omega)?,
        propagation_constant(medium_b, omega)?,
    )
}

/// Interface and composite coefficients of the stack at one frequency.
/// Indices: 1 cavity, 2 plate, 3 outside vacuum. `den` is the plate's own
/// Airy denominator 1 − r21·r23·e^{2iβ2 d}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StackCoefficients {
    pub beta1: Complex64,
    pub beta2: Complex64,
    pub beta3: Complex64,
    pub r12: Complex64,
    pub t12: Complex64,
    pub r21: Complex64,
    pub t21: Complex64,
    pub r23: Complex64,
    pub t23: Complex64,
    pub r32: Complex64,
    pub t32: Complex64,
    pub r13: Complex64,
    pub t13: Complex64,
    pub r31: Complex64,
    pub t31: Complex64,
    pub den: Complex64,
}

pub fn stack_coefficients(geom: &CavityGeometry, omega: Complex64) -> Result<StackCoefficients> {
    let beta1 = propagation_constant(&geom.medium1, omega)?;
    let beta2 = propagation_constant(&geom.medium2, omega)?;
    let beta3 = omega;
    let (r12, t12) = fresnel(beta1, beta2)?;
    let (r21, t21) = fresnel(beta2, beta1)?;
    let (r23, t23) = fresnel(beta2, beta3)?;
    let (r32, t32) = fresnel(beta3, beta2)?;

    let phase = (I * beta2 * geom.d).exp();
    let phase2 = phase * phase;
    let den = ONE - r21 * r23 * phase2;
    if den.norm() < 1e-300 {
        return Err(CavityError::Singular("plate Airy denominator vanishes".into()));
    }

    Ok(StackCoefficients {
        beta1,
        beta2,
        beta3,
        r12,
        t12,
        r21,
        t21,
        r23,
        t23,
        r32,
        t32,
        r13: r12 + t12 * t21 * r23 * phase2 / den,
        t13: t12 * t23 * phase / den,
        r31: r32 + t32 * t23 * r21 * phase2 / den,
        t31: t32 * t21 * phase / den,
        den,
    })
}

/// (D1, D2′): the cavity denominator 1 + r13·e^{2iβ1 l}, whose zeros are the
/// resonances, and the plate denominator 1 − r21·r23·e^{2iβ2 d}.
pub fn spectral_denominators(geom: &CavityGeometry, omega: Complex64) -> Result<(Complex64, Complex64)> {
    let s = stack_coefficients(geom, omega)?;
    Ok((cavity_denominator(geom, &s), s.den))
}

pub(crate) fn cavity_denominator(geom: &CavityGeometry, s: &StackCoefficients) -> Complex64 {
    ONE + s.r13 * (2.0 * I * s.beta1 * geom.l).exp()
}
