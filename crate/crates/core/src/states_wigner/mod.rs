//! Single-mode phase-space states and the maps from the intracavity state
//! to the state of the dominant outgoing wave packet.
//!
//! Conventions: α = x + ip with vacuum quadrature variance 1/4, Wigner
//! functions normalized to ∫W d²α = 1, characteristic function
//! C(β) = ⟨D(β)⟩ = ∫d²α W(α) e^{βα*−β*α}.

mod grid;
mod smoothing;

pub use grid::{GridSpec, WignerGrid};

use std::f64::consts::FRAC_2_PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};
use crate::extraction::ExtractionResult;
use smoothing::{gaussian_smoothing, nested_convolution, Density, Piece};

/// |W| may exceed 2/π by at most this much.
pub const WIGNER_BOUND_SLACK: f64 = 1e-6;
const NORM_TOL: f64 = 1e-3;
const SUM_RULE_TOL: f64 = 1e-8;
/// Most non-Gaussian channel states the nested quadrature accepts.
pub const MAX_GENERAL_CHANNELS: usize = 2;

/// Which quadrature a positive squeeze parameter compresses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SqueezeAxis {
    /// p variance e^{−2r}/4, x stretched.
    #[default]
    P,
    X,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Vacuum,
    Coherent {
        amplitude: Complex64,
    },
    Thermal {
        mean_photons: f64,
    },
    SqueezedNumber {
        squeeze: f64,
        photons: u32,
        #[serde(default)]
        axis: SqueezeAxis,
    },
    Grid {
        grid: WignerGrid,
    },
}

/// Laguerre polynomial L_n(x) by the three-term recurrence.
pub fn laguerre(n: u32, x: f64) -> f64 {
    let (mut l0, mut l1) = (1.0, 1.0 - x);
    if n == 0 {
        return l0;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 - x) * l1 - k * l0) / (k + 1.0);
        l0 = l1;
        l1 = next;
    }
    l1
}

fn number_wigner(n: u32, a2: f64) -> f64 {
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    FRAC_2_PI * sign * laguerre(n, 4.0 * a2) * (-2.0 * a2).exp()
}

/// Symplectic rescaling (x, p) → (x e^{s}, p e^{−s}) that maps a squeezed
/// number state onto the number state.
fn squeeze_exponent(r: f64, axis: SqueezeAxis) -> f64 {
    match axis {
        SqueezeAxis::X => r,
        SqueezeAxis::P => -r,
    }
}

impl StateSpec {
    pub fn coherent(amplitude: Complex64) -> Self {
        StateSpec::Coherent { amplitude }
    }

    pub fn thermal(mean_photons: f64) -> Self {
        StateSpec::Thermal { mean_photons }
    }

    pub fn squeezed_number(squeeze: f64, photons: u32) -> Self {
        StateSpec::SqueezedNumber { squeeze, photons, axis: SqueezeAxis::default() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StateSpec::Vacuum => Ok(()),
            StateSpec::Coherent { amplitude } => {
                if amplitude.is_finite() {
                    Ok(())
                } else {
                    Err(CavityError::invalid("coherent amplitude must be finite"))
                }
            }
            StateSpec::Thermal { mean_photons } => {
                if mean_photons.is_finite() && *mean_photons >= 0.0 {
                    Ok(())
                } else {
                    Err(CavityError::invalid(format!("mean photon number {mean_photons} must be finite and ≥ 0")))
                }
            }
            StateSpec::SqueezedNumber { squeeze, .. } => {
                if squeeze.is_finite() {
                    Ok(())
                } else {
                    Err(CavityError::invalid("squeeze parameter must be finite"))
                }
            }
            StateSpec::Grid { grid } => {
                grid.validate()?;
                let norm = grid.integral();
                if (norm - 1.0).abs() > NORM_TOL {
                    return Err(CavityError::invalid(format!(
                        "grid state integrates to {norm}, not 1 within {NORM_TOL}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Closed-form (or interpolated, for grid states) Wigner function.
    pub fn wigner(&self, alpha: Complex64) -> f64 {
        match self {
            StateSpec::Vacuum => FRAC_2_PI * (-2.0 * alpha.norm_sqr()).exp(),
            StateSpec::Coherent { amplitude } => FRAC_2_PI * (-2.0 * (alpha - amplitude).norm_sqr()).exp(),
            StateSpec::Thermal { mean_photons } => {
                let v = 2.0 * mean_photons + 1.0;
                FRAC_2_PI / v * (-2.0 * alpha.norm_sqr() / v).exp()
            }
            StateSpec::SqueezedNumber { squeeze, photons, axis } => {
                let e = squeeze_exponent(*squeeze, *axis).exp();
                let a2 = (alpha.re * e).powi(2) + (alpha.im / e).powi(2);
                number_wigner(*photons, a2)
            }
            StateSpec::Grid { grid } => grid.interpolate(alpha),
        }
    }

    /// C(β) = ⟨D(β)⟩.
    pub fn characteristic(&self, beta: Complex64) -> Complex64 {
        let b2 = beta.norm_sqr();
        match self {
            StateSpec::Vacuum => Complex64::new((-0.5 * b2).exp(), 0.0),
            StateSpec::Coherent { amplitude } => {
                (beta * amplitude.conj() - beta.conj() * amplitude).exp() * (-0.5 * b2).exp()
            }
            StateSpec::Thermal { mean_photons } => Complex64::new((-(mean_photons + 0.5) * b2).exp(), 0.0),
            StateSpec::SqueezedNumber { squeeze, photons, axis } => {
                let e = squeeze_exponent(*squeeze, *axis).exp();
                let t2 = (beta.re * e).powi(2) + (beta.im / e).powi(2);
                Complex64::new((-0.5 * t2).exp() * laguerre(*photons, t2), 0.0)
            }
            StateSpec::Grid { grid } => grid.characteristic(beta),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, StateSpec::Vacuum | StateSpec::Coherent { .. } | StateSpec::Thermal { .. })
            || matches!(self, StateSpec::SqueezedNumber { photons: 0, .. })
    }

    /// Smallest length over which W changes appreciably.
    pub fn feature_scale(&self) -> f64 {
        match self {
            StateSpec::Vacuum | StateSpec::Coherent { .. } => 0.5,
            StateSpec::Thermal { mean_photons } => 0.5 * (2.0 * mean_photons + 1.0).sqrt(),
            StateSpec::SqueezedNumber { squeeze, photons, .. } => {
                (-squeeze.abs()).exp() / (2.0 * (2.0 * *photons as f64 + 1.0).sqrt())
            }
            StateSpec::Grid { grid } => 2.0 * grid.spacing(),
        }
    }

    /// Centre and half-widths (x, p) of a box outside which |W| < 1e−10.
    pub fn support(&self) -> (Complex64, f64, f64) {
        let zero = Complex64::new(0.0, 0.0);
        match self {
            StateSpec::Vacuum => (zero, 3.5, 3.5),
            StateSpec::Coherent { amplitude } => (*amplitude, 3.5, 3.5),
            StateSpec::Thermal { mean_photons } => {
                let r = 3.5 * (2.0 * mean_photons + 1.0).sqrt();
                (zero, r, r)
            }
            StateSpec::SqueezedNumber { squeeze, photons, axis } => {
                let rho = (*photons as f64 + 1.0).sqrt() + 2.5;
                let e = squeeze_exponent(*squeeze, *axis).exp();
                (zero, rho / e, rho * e)
            }
            StateSpec::Grid { grid } => (grid.center, grid.half_extent, grid.half_extent),
        }
    }

    /// Displacement plus spread used for the grid-extent warning.
    fn coverage_radius(&self, center: Complex64) -> f64 {
        let spread = match self {
            StateSpec::Thermal { mean_photons } => (2.0 * mean_photons + 1.0).sqrt(),
            StateSpec::SqueezedNumber { squeeze, photons, .. } => {
                squeeze.abs().exp() * (2.0 * *photons as f64 + 1.0).sqrt()
            }
            StateSpec::Grid { .. } => return 0.0,
            _ => 1.0,
        };
        1.0 + (self.support().0 - center).norm() + spread
    }
}

/// A grid together with the diagnostics gathered while producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerMap {
    pub grid: WignerGrid,
    pub warnings: Vec<String>,
}

fn resolution_warnings(state: &StateSpec, scale: f64, spec: &GridSpec, what: &str) -> Vec<String> {
    let mut w = Vec::new();
    let feature = scale * state.feature_scale();
    if spec.spacing() > feature {
        w.push(format!(
            "{what}: cell size {:.3e} exceeds the state's feature scale {:.3e}",
            spec.spacing(),
            feature
        ));
    }
    w
}

/// Sanity checks on every produced grid.
fn output_warnings(grid: &WignerGrid) -> Vec<String> {
    let mut w = Vec::new();
    let norm = grid.integral();
    if (norm - 1.0).abs() > NORM_TOL {
        w.push(format!("output grid integrates to {norm:.6}, outside 1 ± {NORM_TOL}"));
    }
    let peak = grid.max_abs();
    if peak > FRAC_2_PI + WIGNER_BOUND_SLACK {
        w.push(format!("|W| reaches {peak:.8}, above the single-mode bound 2/π"));
    }
    w
}

/// Evaluates `eval` on the requested grid and, when allowed, widens the
/// extent by 1.25× (same cell size) while mass sits within three cells of
/// the border.
fn with_auto_expansion(
    spec: &GridSpec,
    mut eval: impl FnMut(&GridSpec) -> Result<WignerGrid>,
) -> Result<WignerMap> {
    let mut current = spec.clone();
    let mut warnings = Vec::new();
    for _ in 0..8 {
        let grid = eval(&current)?;
        if !current.auto_expand || grid.border_mass(3) <= 1e-6 {
            warnings.extend(output_warnings(&grid));
            return Ok(WignerMap { grid, warnings });
        }
        let expanded = current.expanded(1.25);
        warnings.push(format!(
            "mass within 3 cells of the boundary; half extent widened from {:.4} to {:.4}",
            current.half_extent, expanded.half_extent
        ));
        current = expanded;
    }
    let grid = eval(&current)?;
    warnings.push("grid still clips the state after repeated expansion".to_string());
    warnings.extend(output_warnings(&grid));
    Ok(WignerMap { grid, warnings })
}

pub fn wigner_of(state: &StateSpec, spec: &GridSpec) -> Result<WignerMap> {
    state.validate()?;
    spec.validate()?;
    let mut warnings = resolution_warnings(state, 1.0, spec, "input state");
    let need = state.coverage_radius(spec.center);
    if spec.half_extent < need {
        warnings.push(format!(
            "half extent {} is smaller than the state's extent {:.3}",
            spec.half_extent, need
        ));
    }
    let grid = WignerGrid::from_fn(spec, |a| state.wigner(a));
    warnings.extend(output_warnings(&grid));
    Ok(WignerMap { grid, warnings })
}

/// Prescribed couplings come straight from a scenario; derived ones from an
/// extraction run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    #[default]
    Prescribed,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCoupling {
    /// Channel label with basis index, e.g. `in:0`.
    pub channel: String,
    pub chi: Complex64,
    pub state: StateSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub eta: f64,
    #[serde(default)]
    pub couplings: Vec<ChannelCoupling>,
    #[serde(default)]
    pub mode: CouplingMode,
}

impl ChannelConfig {
    pub fn new(eta: f64, couplings: Vec<ChannelCoupling>) -> Self {
        Self { eta, couplings, mode: CouplingMode::Prescribed }
    }

    /// η and χ taken from an extraction run; `state_of` assigns each
    /// channel's basis modes their initial state.
    pub fn from_extraction(
        result: &ExtractionResult,
        state_of: impl Fn(crate::extraction::Channel) -> StateSpec,
    ) -> Self {
        let mut couplings = Vec::new();
        for (ch, chis) in &result.chi {
            for (i, chi) in chis.iter().enumerate() {
                if chi.norm() > 0.0 {
                    couplings.push(ChannelCoupling {
                        channel: format!("{}:{i}", ch.name()),
                        chi: *chi,
                        state: state_of(*ch),
                    });
                }
            }
        }
        Self { eta: result.eta, couplings, mode: CouplingMode::Derived }
    }

    pub fn chi_norm_sqr(&self) -> f64 {
        self.couplings.iter().map(|c| c.chi.norm_sqr()).sum()
    }

    /// 1 − η² − Σ|χ|², the vacuum-noise weight left over by the couplings.
    pub fn leftover(&self) -> f64 {
        1.0 - self.eta * self.eta - self.chi_norm_sqr()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && (0.0..=1.0).contains(&self.eta)) {
            return Err(CavityError::invalid(format!("η = {} outside [0, 1]", self.eta)));
        }
        for c in &self.couplings {
            if !c.chi.is_finite() {
                return Err(CavityError::invalid(format!("χ of channel {} is not finite", c.channel)));
            }
            c.state.validate()?;
        }
        let excess = -self.leftover();
        if excess > SUM_RULE_TOL {
            return Err(CavityError::SumRule(excess));
        }
        Ok(())
    }
}

/// C_out(β) = exp[−½|β|²(1−η²−Σ|χ|²)]·C_cav(ηβ)·Π C_σi(χ_σi β).
pub fn output_characteristic(cavity: &StateSpec, channels: &ChannelConfig, beta: Complex64) -> Result<Complex64> {
    channels.validate()?;
    cavity.validate()?;
    let mut c = Complex64::new((-0.5 * beta.norm_sqr() * channels.leftover()).exp(), 0.0);
    c *= cavity.characteristic(beta * channels.eta);
    for ch in &channels.couplings {
        c *= ch.state.characteristic(ch.chi * beta);
    }
    Ok(c)
}

fn cavity_density(cavity: &StateSpec, displacement: Complex64) -> Density<'_> {
    let (center, rx, rp) = cavity.support();
    Density {
        f: Box::new(move |a: Complex64| cavity.wigner(a - displacement)),
        center: center + displacement,
        rx,
        rp,
        feature: cavity.feature_scale(),
    }
}

/// Output Wigner function for the channel configuration: a single Gaussian
/// smoothing when every channel state is Gaussian, nested quadrature
/// otherwise. Channel σi enters through χ*_σi α_σi, the variable whose
/// characteristic function is C_σi(χ_σi β).
pub fn output_wigner(cavity: &StateSpec, channels: &ChannelConfig, spec: &GridSpec) -> Result<WignerMap> {
    channels.validate()?;
    cavity.validate()?;
    spec.validate()?;
    if !channels.couplings.iter().all(|c| c.state.is_gaussian() && !matches!(c.state, StateSpec::SqueezedNumber { .. })) {
        return output_wigner_direct(cavity, channels, spec);
    }
    let mut noise = 0.0;
    let mut shift = Complex64::new(0.0, 0.0);
    for c in &channels.couplings {
        match &c.state {
            StateSpec::Thermal { mean_photons } => noise += 2.0 * mean_photons * c.chi.norm_sqr(),
            StateSpec::Coherent { amplitude } => shift += c.chi.conj() * amplitude,
            _ => {}
        }
    }
    let eta = channels.eta;
    let s = 1.0 - eta * eta + noise;
    let mut map = if eta > 0.0 {
        // substitute b = ηα′ so the source lattice lives in output units
        let (center, rx, rp) = cavity.support();
        let scaled = Density {
            f: Box::new(move |b: Complex64| cavity.wigner(b / eta) / (eta * eta)),
            center: center * eta,
            rx: rx * eta,
            rp: rp * eta,
            feature: cavity.feature_scale() * eta,
        };
        with_auto_expansion(spec, |g| gaussian_smoothing(&scaled, 1.0, shift, s, g))?
    } else {
        let d = cavity_density(cavity, Complex64::new(0.0, 0.0));
        with_auto_expansion(spec, |g| gaussian_smoothing(&d, 0.0, shift, s, g))?
    };
    let mut warnings =
        if eta > 0.0 { resolution_warnings(cavity, eta, spec, "scaled cavity state") } else { Vec::new() };
    warnings.append(&mut map.warnings);
    map.warnings = warnings;
    Ok(map)
}

/// Direct nested quadrature of the Wigner convolution formula: the scaled
/// cavity and channel distributions are convolved on a common lattice and
/// the leftover vacuum Gaussian is applied last.
pub fn output_wigner_direct(cavity: &StateSpec, channels: &ChannelConfig, spec: &GridSpec) -> Result<WignerMap> {
    channels.validate()?;
    cavity.validate()?;
    spec.validate()?;
    let general = channels.couplings.iter().filter(|c| !c.state.is_gaussian()).count();
    if general > MAX_GENERAL_CHANNELS {
        return Err(CavityError::invalid(format!(
            "{general} non-Gaussian channel states; at most {MAX_GENERAL_CHANNELS} are supported"
        )));
    }
    let s0 = channels.leftover();
    if s0 <= 1e-12 {
        return Err(CavityError::invalid(format!(
            "direct quadrature needs 1 − η² − Σ|χ|² > 0, got {s0:e}"
        )));
    }
    let mut pieces = Vec::new();
    let eta = channels.eta;
    if eta > 0.0 {
        pieces.push(Piece::scaled(cavity, Complex64::new(eta, 0.0)));
    }
    for c in &channels.couplings {
        if c.chi.norm() > 0.0 {
            pieces.push(Piece::scaled(&c.state, c.chi.conj()));
        }
    }
    with_auto_expansion(spec, |g| nested_convolution(&pieces, s0, g))
}

/// Output for thermal input and channel states, integrating over the
/// unscaled cavity argument α′.
pub fn thermal_output_wigner(cavity: &StateSpec, eta: f64, noise_sum: f64, spec: &GridSpec) -> Result<WignerMap> {
    smoothing_in_cavity_units(cavity, eta, noise_sum, Complex64::new(0.0, 0.0), spec)
}

/// Output when two input modes carry coherent states β and −iβ with common
/// coupling χ_in: the cavity Wigner function enters at α′ − (βχ*_in/η)(1−i).
pub fn cat_output_wigner(
    cavity: &StateSpec,
    eta: f64,
    chi_in: Complex64,
    beta: Complex64,
    noise: f64,
    spec: &GridSpec,
) -> Result<WignerMap> {
    if eta == 0.0 {
        return Err(CavityError::invalid("η = 0: the displaced cavity argument is undefined"));
    }
    if !chi_in.is_finite() || !beta.is_finite() {
        return Err(CavityError::invalid("χ_in and β must be finite"));
    }
    let d = beta * chi_in.conj() * Complex64::new(1.0, -1.0) / eta;
    smoothing_in_cavity_units(cavity, eta, noise, d, spec)
}

fn smoothing_in_cavity_units(
    cavity: &StateSpec,
    eta: f64,
    noise: f64,
    displacement: Complex64,
    spec: &GridSpec,
) -> Result<WignerMap> {
    cavity.validate()?;
    spec.validate()?;
    if !(eta.is_finite() && (0.0..=1.0).contains(&eta)) {
        return Err(CavityError::invalid(format!("η = {eta} outside [0, 1]")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(CavityError::invalid(format!("noise term {noise} must be finite and ≥ 0")));
    }
    let s = 1.0 - eta * eta + noise;
    let d = cavity_density(cavity, displacement);
    let mut map = with_auto_expansion(spec, |g| gaussian_smoothing(&d, eta, Complex64::new(0.0, 0.0), s, g))?;
    if eta > 0.0 {
        let mut w = resolution_warnings(cavity, eta, spec, "scaled cavity state");
        w.append(&mut map.warnings);
        map.warnings = w;
    }
    Ok(map)
}

/// η²/(1 − η² + noise); +∞ when the denominator vanishes.
pub fn fidelity_condition(eta: f64, noise_sum: f64) -> f64 {
    let num = eta * eta;
    if num == 0.0 {
        return 0.0;
    }
    let den = 1.0 - num + noise_sum;
    if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityMetrics {
    pub min_value: f64,
    pub negative_volume: f64,
}

pub fn negativity_metrics(grid: &WignerGrid) -> NegativityMetrics {
    let area = grid.cell_area();
    let min_value = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
    let negative_volume = grid.values.iter().map(|w| (-w).max(0.0)).sum::<f64>() * area;
    NegativityMetrics { min_value, negative_volume }
}

/// Sign changes of W along the row of constant p nearest `p`, skipping
/// values with |W| ≤ `floor`.
pub fn sign_changes_along_x(grid: &WignerGrid, p: f64, floor: f64) -> usize {
    let j = grid.row_index(p);
    let mut last = 0i8;
    let mut changes = 0;
    for i in 0..grid.resolution {
        let w = grid.at(i, j);
        if w.abs() <= floor {
            continue;
        }
        let s = if w > 0.0 { 1 } else { -1 };
        if last != 0 && s != last {
            changes += 1;
        }
        last = s;
    }
    changes
}

/// Bound check |W| ≤ 2/π + slack.
pub fn within_wigner_bound(grid: &WignerGrid) -> bool {
    grid.max_abs() <= FRAC_2_PI + WIGNER_BOUND_SLACK
}
