//! Time-dependent extraction of the cavity state into the outgoing field:
//! filter function f_k, kernel υ_k, the kernels G_kσ, the dominant output
//! mode φ_out and its efficiency η(t), and the mode couplings χ_σ^(i)(t).
//!
//! Discretization: with nodes ω_j and weights w_j the weighted vectors
//! φ̃_j = √w_j φ(ω_j) turn every double integral into a matrix product
//! χ = φ̃^H K̃ ψ̃, K̃_ij = √w_i √w_j s_σ υ(ω_i, ω_j) + δ_ij D_σ e^{iω_j τ}.
//! The δ lines of G_in and G_± are contracted analytically into the diagonal.

pub mod basis;
pub mod quadrature;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};
use crate::resonances::ResonantMode;

pub use basis::{BasisKind, ModeBasis};
pub use quadrature::QuadratureRule;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    In,
    Cav,
    Plus,
    Minus,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::In, Channel::Cav, Channel::Plus, Channel::Minus];

    pub fn name(&self) -> &'static str {
        match self {
            Channel::In => "in",
            Channel::Cav => "cav",
            Channel::Plus => "plus",
            Channel::Minus => "minus",
        }
    }
}

/// Node placement over (Δ_k).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridKind {
    /// `quad_order` nodes from [`QuadratureRule::resonance_adapted`].
    Adapted,
    /// Fully resolved tails; the node count follows from τ.
    Resolved { nodes_per_period: f64 },
    /// Plain Gauss–Legendre with `quad_order` nodes.
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionSettings {
    pub t0: f64,
    pub t: f64,
    pub delta_t: f64,
    pub quad_order: usize,
    pub basis_size: usize,
    pub basis: BasisKind,
    pub grid: GridKind,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        ExtractionSettings {
            t0: 0.0,
            t: 0.0,
            delta_t: 0.0,
            quad_order: 128,
            basis_size: 16,
            basis: BasisKind::Svd,
            grid: GridKind::Adapted,
        }
    }
}

impl ExtractionSettings {
    pub fn at_time(t: f64) -> Self {
        ExtractionSettings { t, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= self.t0) || !self.t.is_finite() || !self.t0.is_finite() {
            return Err(CavityError::invalid(format!("need t >= t0, got t = {}, t0 = {}", self.t, self.t0)));
        }
        if !(self.delta_t >= 0.0) {
            return Err(CavityError::invalid(format!("delta_t = {} must be >= 0", self.delta_t)));
        }
        if self.quad_order < 16 {
            return Err(CavityError::invalid(format!("quad_order = {} must be >= 16", self.quad_order)));
        }
        if self.basis_size > self.quad_order && !matches!(self.grid, GridKind::Resolved { .. }) {
            return Err(CavityError::invalid(format!(
                "basis_size = {} exceeds quad_order = {}",
                self.basis_size, self.quad_order
            )));
        }
        if let GridKind::Resolved { nodes_per_period } = self.grid {
            if !(nodes_per_period >= 1.0) {
                return Err(CavityError::invalid("nodes_per_period must be >= 1"));
            }
        }
        Ok(())
    }

    /// τ = t − t0
    pub fn tau(&self) -> f64 {
        self.t - self.t0
    }

    /// τ + Δt, the time over which the mode has decayed.
    pub fn tau_total(&self) -> f64 {
        self.t - self.t0 + self.delta_t
    }
}

/// e^z − 1 without cancellation for small |z|.
fn expm1c(z: Complex64) -> Complex64 {
    let (a, b) = (z.re, z.im);
    let s = (0.5 * b).sin();
    Complex64::new(a.exp_m1() * b.cos() - 2.0 * s * s, a.exp() * b.sin())
}

/// g(x) = (e^{−ixτ′} − 1)/x and g′(x).
fn g_and_derivative(x: Complex64, tau_total: f64) -> (Complex64, Complex64) {
    let z = -I * tau_total;
    if (x * tau_total).norm() < 0.5 {
        // power series in x: g = Σ_{m≥1} z^m x^{m−1}/m!
        let mut g = ZERO;
        let mut dg = ZERO;
        let mut zm_over_fact = z; // z^m/m!
        let mut xp = Complex64::new(1.0, 0.0); // x^{m−1}
        let mut xpm = ZERO; // x^{m−2}
        for m in 1..40 {
            g += zm_over_fact * xp;
            if m >= 2 {
                dg += zm_over_fact * (m - 1) as f64 * xpm;
            }
            xpm = xp;
            xp *= x;
            zm_over_fact *= z / (m + 1) as f64;
        }
        (g, dg)
    } else {
        let em1 = expm1c(z * x);
        let e = em1 + 1.0;
        let g = em1 / x;
        (g, (z * e) / x - em1 / (x * x))
    }
}

/// κ = c/(2 n1* l)
fn kappa(mode: &ResonantMode) -> Complex64 {
    1.0 / (2.0 * mode.n1.conj() * mode.l)
}

/// f_k(ω, t) = (e^{−i(ω−Ω*)(t+Δt−t0)} − 1)/(ω − Ω*) · e^{iω(t−t0)}
pub fn filter_function(mode: &ResonantMode, settings: &ExtractionSettings, omega: f64) -> Complex64 {
    filter_and_derivative(mode, settings, omega).0
}

/// (f, ∂f/∂ω) at real ω.
pub fn filter_and_derivative(mode: &ResonantMode, settings: &ExtractionSettings, omega: f64) -> (Complex64, Complex64) {
    let (h, dh) = reduced_filter(mode, settings, omega);
    let p0 = carrier(mode, settings);
    (p0 * h, p0 * dh)
}

/// e^{iω_k(t−t0)}, the phase common to every f value.
fn carrier(mode: &ResonantMode, settings: &ExtractionSettings) -> Complex64 {
    (I * mode.omega_k * settings.tau()).exp()
}

/// f and ∂f/∂ω with the carrier e^{iω_k τ} removed. Only the offset ω − ω_k
/// enters a phase, which keeps difference quotients between close nodes
/// accurate when ω_k τ is large.
fn reduced_filter(mode: &ResonantMode, settings: &ExtractionSettings, omega: f64) -> (Complex64, Complex64) {
    let tau = settings.tau();
    let offset = omega - mode.omega_k;
    // ω − Ω*_k
    let x = Complex64::new(offset, -0.5 * mode.gamma_k);
    let (g, dg) = g_and_derivative(x, settings.tau_total());
    let ph = (I * offset * tau).exp();
    let h = g * ph;
    (h, dg * ph + I * tau * h)
}

/// υ(ω, ω′, t) = (κ/2π)[f(ω) − f(ω′)e^{i(ω′−ω)Δt}]/(ω − ω′), with the
/// removable diagonal taken from the analytic derivative of f.
pub fn upsilon_kernel(mode: &ResonantMode, settings: &ExtractionSettings, omega: f64, omega_p: f64) -> Complex64 {
    let pre = kappa(mode) / (2.0 * PI) * carrier(mode, settings);
    let (h, dh) = reduced_filter(mode, settings, omega);
    if omega == omega_p {
        return pre * (dh + I * settings.delta_t * h);
    }
    let (hp, _) = reduced_filter(mode, settings, omega_p);
    pre * (h - hp * (I * (omega_p - omega) * settings.delta_t).exp()) / (omega - omega_p)
}

/// F_k(ω, t) = (i/√2π)·κ^{1/2}·T^(o)*·f_k(ω, t)
pub fn capital_f(mode: &ResonantMode, settings: &ExtractionSettings, omega: f64) -> Complex64 {
    f_prefactor(mode) * filter_function(mode, settings, omega)
}

fn f_prefactor(mode: &ResonantMode) -> Complex64 {
    I / (2.0 * PI).sqrt() * kappa(mode).sqrt() * mode.t_k_out.conj()
}

/// G_kσ split into the coefficient of υ_k and the weight of the
/// e^{iω′(t−t0)}δ(ω−ω′) line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelG {
    pub smooth: Complex64,
    pub delta: Complex64,
}

impl KernelG {
    pub fn smooth_value(&self, mode: &ResonantMode, settings: &ExtractionSettings, omega: f64, omega_p: f64) -> Complex64 {
        self.smooth * upsilon_kernel(mode, settings, omega, omega_p)
    }
}

pub fn kernel_g(mode: &ResonantMode, channel: Channel) -> KernelG {
    let to = mode.t_k_out.conj();
    match channel {
        Channel::In => KernelG { smooth: to * mode.t_k.conj(), delta: mode.r_k_out.conj() },
        Channel::Cav => KernelG { smooth: to * mode.a_k_cav.conj(), delta: ZERO },
        Channel::Plus => KernelG { smooth: to * mode.a_k_plus.conj(), delta: mode.a_k_plus_out.conj() },
        Channel::Minus => KernelG { smooth: to * mode.a_k_minus.conj(), delta: mode.a_k_minus_out.conj() },
    }
}

/// η² = γ_rad^(o)/(γ_rad + γ_abs)·[1 − e^{−(γ_rad+γ_abs)(t+Δt−t0)}]
pub fn eta_squared_closed_form(mode: &ResonantMode, settings: &ExtractionSettings) -> f64 {
    let gamma = mode.gamma_rad + mode.gamma_abs;
    if gamma == 0.0 {
        return 0.0;
    }
    mode.gamma_rad_out / gamma * -(-gamma * settings.tau_total()).exp_m1()
}

pub fn eta_closed_form(mode: &ResonantMode, settings: &ExtractionSettings) -> f64 {
    eta_squared_closed_form(mode, settings).sqrt()
}

/// Quadrature grid over (Δ_k) for the given settings.
pub fn build_grid(mode: &ResonantMode, settings: &ExtractionSettings) -> QuadratureRule {
    let (lo, hi) = mode.interval;
    let scale = settings.tau().max(settings.delta_t);
    match settings.grid {
        GridKind::Adapted => {
            QuadratureRule::resonance_adapted(settings.quad_order, mode.omega_k, mode.gamma_k, lo, hi, scale)
        }
        GridKind::Resolved { nodes_per_period } => {
            QuadratureRule::resolved(mode.omega_k, mode.gamma_k, lo, hi, scale, nodes_per_period)
        }
        GridKind::Plain => QuadratureRule::gauss_legendre(settings.quad_order, lo, hi),
    }
}

/// Dominant output mode sampled on the grid, with its efficiency.
#[derive(Debug, Clone)]
pub struct OutputMode {
    pub rule: QuadratureRule,
    /// f and ∂f/∂ω at the nodes divided by the carrier e^{iω_k τ}.
    pub f_reduced: Vec<Complex64>,
    pub df_reduced: Vec<Complex64>,
    pub carrier: Complex64,
    pub eta: f64,
    /// φ_out = F/η; `None` marks "no output" (η = 0).
    pub phi_out: Option<Vec<Complex64>>,
    pub warnings: Vec<String>,
}

fn grid_warnings(mode: &ResonantMode, rule: &QuadratureRule) -> Vec<String> {
    let mut w = Vec::new();
    let need = 16.0 * mode.width() / mode.gamma_k;
    if (rule.len() as f64) < need {
        w.push(format!(
            "quadrature uses {} nodes, fewer than 16·Δω/Γ = {:.0}; accuracy relies on the resonance-adapted node placement",
            rule.len(),
            need
        ));
    }
    if !mode.valid {
        w.push(format!(
            "mode {} has Γ/Δω = {:.3e}, outside the high-Q regime",
            mode.k, mode.validity_ratio
        ));
    }
    w
}

pub fn output_mode_and_eta(mode: &ResonantMode, settings: &ExtractionSettings) -> Result<OutputMode> {
    settings.validate()?;
    let rule = build_grid(mode, settings);
    let (f_reduced, df_reduced): (Vec<_>, Vec<_>) =
        rule.nodes.iter().map(|&w| reduced_filter(mode, settings, w)).unzip();
    let pre = f_prefactor(mode);
    let carrier = carrier(mode, settings);
    let eta2: f64 = f_reduced.iter().zip(&rule.weights).map(|(h, w)| w * (pre * h).norm_sqr()).sum();
    let eta = eta2.sqrt();
    let phi_out = if eta > 0.0 && eta.is_finite() {
        Some(f_reduced.iter().map(|h| pre * carrier * h / eta).collect())
    } else {
        None
    };
    let warnings = grid_warnings(mode, &rule);
    Ok(OutputMode { rule, f_reduced, df_reduced, carrier, eta, phi_out, warnings })
}

/// Reduced υ between nodes i and j, without κ/2π and the carrier.
#[inline]
fn upsilon_reduced(out: &OutputMode, shift: &[Complex64], dt: f64, i: usize, j: usize) -> Complex64 {
    let nodes = &out.rule.nodes;
    if i == j {
        out.df_reduced[i] + I * dt * out.f_reduced[i]
    } else {
        // f(ω_j)e^{i(ω_j−ω_i)Δt} with phases measured from ω_k
        (out.f_reduced[i] - out.f_reduced[j] * shift[j] * shift[i].conj()) / (nodes[i] - nodes[j])
    }
}

fn delta_shifts(mode: &ResonantMode, settings: &ExtractionSettings, out: &OutputMode) -> Vec<Complex64> {
    let dt = settings.delta_t;
    out.rule.nodes.iter().map(|&w| (I * (w - mode.omega_k) * dt).exp()).collect()
}

/// Row vector φ̃^H K̃_υ with K̃_υ,ij = √w_i √w_j υ(ω_i, ω_j), in reduced
/// phases; shared by all channels since their smooth parts differ only by
/// a scalar.
fn phi_upsilon_row(mode: &ResonantMode, settings: &ExtractionSettings, out: &OutputMode, phi: &[Complex64]) -> Vec<Complex64> {
    let pre = kappa(mode) / (2.0 * PI);
    let n = out.rule.len();
    let sw: Vec<f64> = out.rule.weights.iter().map(|w| w.sqrt()).collect();
    let left: Vec<Complex64> = phi.iter().zip(&out.rule.weights).map(|(p, w)| p.conj() * *w).collect();
    let shift = delta_shifts(mode, settings, out);
    let dt = settings.delta_t;
    (0..n)
        .into_par_iter()
        .map(|j| {
            let acc: Complex64 = left.iter().enumerate().map(|(i, l)| l * upsilon_reduced(out, &shift, dt, i, j)).sum();
            acc * pre * sw[j]
        })
        .collect()
}

/// Weighted coupling rows u_σ = φ̃^H K̃_σ for each channel, for an output
/// function `phi` sampled on the grid of `out`.
pub fn coupling_rows(
    mode: &ResonantMode,
    settings: &ExtractionSettings,
    out: &OutputMode,
    phi: &[Complex64],
) -> BTreeMap<Channel, Vec<Complex64>> {
    // the carrier in K̃ cancels against the one in φ*
    let c = out.carrier.conj();
    let phi: Vec<Complex64> = phi.iter().map(|p| p * c).collect();
    let v = phi_upsilon_row(mode, settings, out, &phi);
    let tau = settings.tau();
    let sw: Vec<f64> = out.rule.weights.iter().map(|w| w.sqrt()).collect();
    let phases: Vec<Complex64> = out.rule.nodes.iter().map(|&w| (I * (w - mode.omega_k) * tau).exp()).collect();
    let mut rows = BTreeMap::new();
    for ch in Channel::ALL {
        let g = kernel_g(mode, ch);
        let row: Vec<Complex64> = (0..v.len())
            .map(|j| {
                let mut u = g.smooth * v[j];
                if g.delta != ZERO {
                    u += g.delta * phases[j] * phi[j].conj() * sw[j];
                }
                u
            })
            .collect();
        rows.insert(ch, row);
    }
    rows
}

/// Dense quadrature-weighted kernel matrix K̃_σ (row index ω, column ω′).
pub fn weighted_kernel_matrix(
    mode: &ResonantMode,
    settings: &ExtractionSettings,
    out: &OutputMode,
    channel: Channel,
) -> nalgebra::DMatrix<Complex64> {
    let n = out.rule.len();
    let g = kernel_g(mode, channel);
    let pre = kappa(mode) / (2.0 * PI);
    let sw: Vec<f64> = out.rule.weights.iter().map(|w| w.sqrt()).collect();
    let shift = delta_shifts(mode, settings, out);
    let dt = settings.delta_t;
    let tau = settings.tau();
    let c = out.carrier;
    nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let mut k = g.smooth * pre * upsilon_reduced(out, &shift, dt, i, j) * sw[i] * sw[j];
        if i == j && g.delta != ZERO {
            k += g.delta * (I * (out.rule.nodes[j] - mode.omega_k) * tau).exp();
        }
        c * k
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractionResult {
    pub k: i64,
    pub t: f64,
    pub eta: f64,
    pub eta_closed_form: f64,
    pub phi_out: Option<Vec<Complex64>>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub chi: BTreeMap<Channel, Vec<Complex64>>,
    /// 1 − η² − Σ|χ|²
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl ExtractionResult {
    pub fn chi_norm_sqr(&self) -> f64 {
        self.chi.values().flatten().map(|c| c.norm_sqr()).sum()
    }

    /// η² + Σ|χ|²
    pub fn coupling_sum(&self) -> f64 {
        self.eta * self.eta + self.chi_norm_sqr()
    }
}

/// η, φ_out and χ_σ^(i) over the given input basis.
pub fn mode_couplings(mode: &ResonantMode, settings: &ExtractionSettings, basis: &ModeBasis) -> Result<ExtractionResult> {
    let out = output_mode_and_eta(mode, settings)?;
    let eta_cf = eta_closed_form(mode, settings);
    let mut chi = BTreeMap::new();
    if let Some(phi) = &out.phi_out {
        let rows = coupling_rows(mode, settings, &out, phi);
        for (ch, row) in rows {
            let values = basis.project(mode, settings, &out, ch, &row)?;
            chi.insert(ch, values);
        }
    } else {
        for ch in Channel::ALL {
            chi.insert(ch, Vec::new());
        }
    }
    let mut result = ExtractionResult {
        k: mode.k,
        t: settings.t,
        eta: out.eta,
        eta_closed_form: eta_cf,
        phi_out: out.phi_out.clone(),
        nodes: out.rule.nodes.clone(),
        weights: out.rule.weights.clone(),
        chi,
        residual: 0.0,
        warnings: out.warnings.clone(),
    };
    result.residual = 1.0 - result.coupling_sum();
    Ok(result)
}

/// Couplings with the basis named in the settings.
pub fn extract(mode: &ResonantMode, settings: &ExtractionSettings) -> Result<ExtractionResult> {
    let basis = match settings.basis {
        BasisKind::Svd => ModeBasis::Svd(settings.basis_size),
        BasisKind::Legendre => ModeBasis::Legendre(settings.basis_size),
        BasisKind::Grid => ModeBasis::Grid,
    };
    mode_couplings(mode, settings, &basis)
}
