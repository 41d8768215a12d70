//! Complex resonances Ω_k = ω_k − iΓ_k/2 of the cavity, their inward and
//! outward coupling constants and the decay-rate split Γ_k ≈ γ_rad + γ_abs.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};
use crate::layered_optics::{cavity_denominator, stack_coefficients, CavityGeometry};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResonanceOptions {
    /// Required |D1(Ω_k)| at an accepted root.
    pub tol: f64,
    pub max_iter: usize,
    /// Γ_k/Δω_k above which a mode is flagged as outside the high-Q regime.
    pub validity_threshold: f64,
    /// Accepted relative mismatch between Γ_k and γ_rad + γ_abs.
    pub closure_tolerance: f64,
    /// Frequency at which a dispersive cavity index is read for the initial guess.
    pub estimate_omega: Option<f64>,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        ResonanceOptions {
            tol: 1e-10,
            max_iter: 100,
            validity_threshold: 0.1,
            closure_tolerance: 0.05,
            estimate_omega: None,
        }
    }
}

/// Per-channel rates for the three absorption channels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelRates {
    pub cav: f64,
    pub plus: f64,
    pub minus: f64,
}

impl ChannelRates {
    pub fn total(&self) -> f64 {
        self.cav + self.plus + self.minus
    }
}

/// Noise normalizations α_cav, α_±. A lossless medium gives `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseNormalizations {
    pub cav: f64,
    pub plus: f64,
    pub minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub t: Complex64,
    pub a_plus: Complex64,
    pub a_minus: Complex64,
    pub a_cav: Complex64,
    pub t_out: Complex64,
    pub a_plus_out: Complex64,
    pub a_minus_out: Complex64,
    pub r_out: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    pub gamma_rad: f64,
    pub gamma_abs: f64,
    pub gamma_lambda: ChannelRates,
    pub gamma_rad_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonantMode {
    pub k: i64,
    pub omega_k: f64,
    pub gamma_k: f64,
    #[serde(rename = "Omega_k")]
    pub omega_complex: Complex64,
    /// (Δ_k): halfway to the neighbouring resonances on either side.
    pub interval: (f64, f64),
    #[serde(rename = "T_k")]
    pub t_k: Complex64,
    #[serde(rename = "A_k_plus")]
    pub a_k_plus: Complex64,
    #[serde(rename = "A_k_minus")]
    pub a_k_minus: Complex64,
    #[serde(rename = "A_k_cav")]
    pub a_k_cav: Complex64,
    #[serde(rename = "T_k_out")]
    pub t_k_out: Complex64,
    #[serde(rename = "A_k_plus_out")]
    pub a_k_plus_out: Complex64,
    #[serde(rename = "A_k_minus_out")]
    pub a_k_minus_out: Complex64,
    #[serde(rename = "R_k_out")]
    pub r_k_out: Complex64,
    pub gamma_rad: f64,
    pub gamma_rad_out: f64,
    pub gamma_abs: f64,
    pub gamma_lambda: ChannelRates,
    /// |Γ_k − γ_rad − γ_abs| / Γ_k
    pub closure_residual: f64,
    /// Γ_k / Δω_k with Δω_k the width of (Δ_k).
    pub validity_ratio: f64,
    pub valid: bool,
    /// |D1(Ω_k)| at the accepted root.
    pub root_residual: f64,
    /// Cavity index at ω_k, kept for the filter-function prefactors.
    pub n1: Complex64,
    pub l: f64,
}

impl ResonantMode {
    pub fn width(&self) -> f64 {
        self.interval.1 - self.interval.0
    }

    pub fn couplings(&self) -> Couplings {
        Couplings {
            t: self.t_k,
            a_plus: self.a_k_plus,
            a_minus: self.a_k_minus,
            a_cav: self.a_k_cav,
            t_out: self.t_k_out,
            a_plus_out: self.a_k_plus_out,
            a_minus_out: self.a_k_minus_out,
            r_out: self.r_k_out,
        }
    }

    pub fn closure_ok(&self, tolerance: f64) -> bool {
        self.closure_residual < tolerance
    }
}

/// D1(ω) = 1 + r13·e^{2iβ1 l}.
pub fn cavity_response(geom: &CavityGeometry, omega: Complex64) -> Result<Complex64> {
    let s = stack_coefficients(geom, omega)?;
    Ok(cavity_denominator(geom, &s))
}

fn initial_guess(geom: &CavityGeometry, k: i64, opts: &ResonanceOptions) -> f64 {
    let est = opts.estimate_omega.unwrap_or(k as f64 * PI / geom.l);
    let n = geom.n1(Complex64::new(est, 0.0)).re;
    k as f64 * PI / (n * geom.l)
}

fn muller(
    geom: &CavityGeometry,
    start: Complex64,
    scale: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Complex64, f64, usize)> {
    let f = |w: Complex64| cavity_response(geom, w);
    let mut x0 = start - scale;
    let mut x1 = start + scale;
    let mut x2 = start;
    let (mut f0, mut f1, mut f2) = (f(x0)?, f(x1)?, f(x2)?);
    for it in 0..max_iter {
        if f2.norm() < tol * 1e-3 {
            return Ok((x2, f2.norm(), it));
        }
        let h0 = x1 - x0;
        let h1 = x2 - x1;
        let d0 = (f1 - f0) / h0;
        let d1 = (f2 - f1) / h1;
        let a = (d1 - d0) / (h1 + h0);
        let b = a * h1 + d1;
        let disc = (b * b - 4.0 * a * f2).sqrt();
        let den = if (b + disc).norm() > (b - disc).norm() { b + disc } else { b - disc };
        if den.norm() == 0.0 {
            break;
        }
        let dx = -2.0 * f2 / den;
        let x3 = x2 + dx;
        if !(x3.re > 0.0) || !x3.is_finite() {
            break;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        x2 = x3;
        f2 = f(x2)?;
        if dx.norm() <= 1e-15 * x2.norm() {
            return Ok((x2, f2.norm(), it + 1));
        }
    }
    Ok((x2, f2.norm(), max_iter))
}

/// Damped Newton on D1 with a central-difference derivative, falling back to
/// Muller's method when no damped step reduces |D1|.
pub fn find_root(geom: &CavityGeometry, k: i64, opts: &ResonanceOptions) -> Result<(Complex64, f64)> {
    if k < 1 {
        return Err(CavityError::invalid(format!("mode index k = {k} must be >= 1")));
    }
    let guess = initial_guess(geom, k, opts);
    let spacing = PI / (geom.n1(Complex64::new(guess, 0.0)).re * geom.l);
    let max_step = 0.25 * spacing;

    let mut w = Complex64::new(guess, 0.0);
    let mut fw = cavity_response(geom, w)?;
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let h = 1e-6 * w.norm();
        let df = (cavity_response(geom, w + h)? - cavity_response(geom, w - h)?) / (2.0 * h);
        let mut step = fw / df;
        if !step.is_finite() {
            stalled = true;
            break;
        }
        if step.norm() > max_step {
            step *= max_step / step.norm();
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = w - step * lambda;
            if cand.re > 0.0 {
                let fc = cavity_response(geom, cand)?;
                if fc.norm() < fw.norm() {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                let moved = (cand - w).norm();
                w = cand;
                fw = fc;
                if fw.norm() < opts.tol && moved <= 1e-14 * w.norm() {
                    break;
                }
            }
            None => {
                stalled = true;
                break;
            }
        }
    }

    if fw.norm() >= opts.tol && (stalled || iterations >= opts.max_iter) {
        let (wm, rm, used) = muller(geom, w, 1e-3 * spacing, opts.tol, opts.max_iter)?;
        iterations += used;
        if rm < fw.norm() {
            w = wm;
            fw = cavity_response(geom, w)?;
        }
    }
    if !(fw.norm() < opts.tol) {
        return Err(CavityError::NonConvergence {
            k,
            iterations,
            last: w,
            residual: fw.norm(),
        });
    }
    if w.im >= 0.0 {
        return Err(CavityError::NonDecaying { k, omega: w });
    }
    Ok((w, fw.norm()))
}

/// α_cav and α_± at real ω. Lossless layers give infinity, which makes the
/// matching absorption coupling exactly zero.
pub fn noise_normalizations(geom: &CavityGeometry, omega: f64) -> Result<NoiseNormalizations> {
    if !(omega > 0.0) {
        return Err(CavityError::NonPositiveFrequency(Complex64::new(omega, 0.0)));
    }
    let w = Complex64::new(omega, 0.0);
    let n1 = geom.n1(w);
    let n2 = geom.n2(w);
    let (b1, b2) = (n1 * omega, n2 * omega);
    let (l, d) = (geom.l, geom.d);

    let cav = if n1.im == 0.0 {
        f64::INFINITY
    } else {
        let rad = n1.re * (2.0 * b1.im * l).sinh() - n1.im * (2.0 * b1.re * l).sin();
        assert!(rad > 0.0, "negative radicand in cavity noise normalization");
        2.0 * 2f64.sqrt() * n1.norm() / rad.sqrt()
    };
    let (plus, minus) = if n2.im == 0.0 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let sh = n2.re * (b2.im * d).sinh();
        let sn = n2.im * (b2.re * d).sin();
        assert!(sh - sn.abs() > 0.0, "negative radicand in plate noise normalization");
        let pre = n2.norm() * (b2.im * d / 2.0).exp();
        (pre / (sh + sn).sqrt(), pre / (sh - sn).sqrt())
    };
    Ok(NoiseNormalizations { cav, plus, minus })
}

fn over_alpha(x: Complex64, alpha: f64) -> Complex64 {
    if alpha.is_infinite() {
        Complex64::new(0.0, 0.0)
    } else {
        x / alpha
    }
}

/// Inward {T, A±, A_cav} and outward {T^(o), A±^(o), R^(o)} coupling
/// functions at real ω, outside medium vacuum.
pub fn coupling_constants(geom: &CavityGeometry, omega: f64) -> Result<Couplings> {
    let w = Complex64::new(omega, 0.0);
    let s = stack_coefficients(geom, w)?;
    let alpha = noise_normalizations(geom, omega)?;
    let n1 = geom.n1(w);
    let sqrt_n1 = n1.sqrt();
    let e1 = (I * s.beta1 * geom.l).exp();
    let e2 = (I * s.beta2 * geom.d).exp();

    let a_pm = |sign: f64| -s.t21 * sqrt_n1 / s.den * (s.r23 * e2 + sign) * e1;
    let a_pm_out = |sign: f64| s.t23 / s.den * (1.0 + sign * s.r21 * e2);

    Ok(Couplings {
        t: -s.t31 * sqrt_n1 * e1,
        a_plus: over_alpha(a_pm(1.0), alpha.plus),
        a_minus: over_alpha(a_pm(-1.0), alpha.minus),
        a_cav: over_alpha(-4.0 * I * sqrt_n1, alpha.cav),
        t_out: s.t13 / sqrt_n1 * e1,
        a_plus_out: over_alpha(a_pm_out(1.0), alpha.plus),
        a_minus_out: over_alpha(a_pm_out(-1.0), alpha.minus),
        r_out: s.r31,
    })
}

/// Rates c|X|²/(2|n1|l) for every coupling X.
pub fn decay_decomposition(couplings: &Couplings, n1: Complex64, l: f64) -> DecayRates {
    let pre = 1.0 / (2.0 * n1.norm() * l);
    let gamma_lambda = ChannelRates {
        cav: pre * couplings.a_cav.norm_sqr(),
        plus: pre * couplings.a_plus.norm_sqr(),
        minus: pre * couplings.a_minus.norm_sqr(),
    };
    DecayRates {
        gamma_rad: pre * couplings.t.norm_sqr(),
        gamma_abs: gamma_lambda.total(),
        gamma_lambda,
        gamma_rad_out: pre * couplings.t_out.norm_sqr(),
    }
}

fn build_mode(
    geom: &CavityGeometry,
    k: i64,
    root: (Complex64, f64),
    interval: (f64, f64),
    opts: &ResonanceOptions,
) -> Result<ResonantMode> {
    let (omega, residual) = root;
    let omega_k = omega.re;
    let gamma_k = -2.0 * omega.im;
    let c = coupling_constants(geom, omega_k)?;
    let n1 = geom.n1(Complex64::new(omega_k, 0.0));
    let rates = decay_decomposition(&c, n1, geom.l);
    let validity_ratio = gamma_k / (interval.1 - interval.0);
    Ok(ResonantMode {
        k,
        omega_k,
        gamma_k,
        omega_complex: omega,
        interval,
        t_k: c.t,
        a_k_plus: c.a_plus,
        a_k_minus: c.a_minus,
        a_k_cav: c.a_cav,
        t_k_out: c.t_out,
        a_k_plus_out: c.a_plus_out,
        a_k_minus_out: c.a_minus_out,
        r_k_out: c.r_out,
        gamma_rad: rates.gamma_rad,
        gamma_rad_out: rates.gamma_rad_out,
        gamma_abs: rates.gamma_abs,
        gamma_lambda: rates.gamma_lambda,
        closure_residual: (gamma_k - rates.gamma_rad - rates.gamma_abs).abs() / gamma_k,
        validity_ratio,
        valid: validity_ratio <= opts.validity_threshold,
        root_residual: residual,
        n1,
        l: geom.l,
    })
}

/// Per-k outcome of a resonance search; neighbours outside the range are
/// located internally to bound the edge intervals.
pub fn locate_resonances_each(
    geom: &CavityGeometry,
    k_min: i64,
    k_max: i64,
    opts: &ResonanceOptions,
) -> Result<Vec<(i64, Result<ResonantMode>)>> {
    geom.validate()?;
    if k_min < 1 || k_max < k_min {
        return Err(CavityError::invalid(format!("empty or invalid k range {k_min}..={k_max}")));
    }
    let ks: Vec<i64> = (k_min - 1..=k_max + 1).filter(|&k| k >= 1).collect();
    let roots: Vec<(i64, Result<(Complex64, f64)>)> =
        ks.par_iter().map(|&k| (k, find_root(geom, k, opts))).collect();
    let root_of = |k: i64| roots.iter().find(|(kk, _)| *kk == k).map(|(_, r)| r);

    let mut out = Vec::new();
    for k in k_min..=k_max {
        let here = match root_of(k) {
            Some(Ok(r)) => *r,
            Some(Err(e)) => {
                out.push((k, Err(clone_err(e))));
                continue;
            }
            None => unreachable!(),
        };
        let w = here.0.re;
        let below = if k == 1 { Some(0.0) } else { root_of(k - 1).and_then(|r| r.as_ref().ok()).map(|r| r.0.re) };
        let above = root_of(k + 1).and_then(|r| r.as_ref().ok()).map(|r| r.0.re);
        let (lo, hi) = match (below, above) {
            (Some(b), Some(a)) => (0.5 * (b + w), 0.5 * (w + a)),
            (Some(b), None) => (0.5 * (b + w), w + 0.5 * (w - b)),
            (None, Some(a)) => (w - 0.5 * (a - w), 0.5 * (w + a)),
            (None, None) => {
                let half = 0.5 * PI / (geom.n1(Complex64::new(w, 0.0)).re * geom.l);
                (w - half, w + half)
            }
        };
        if !(lo < w && w < hi) {
            out.push((k, Err(CavityError::Singular(format!(
                "mode {k} root {w} is not separated from its neighbours"
            )))));
            continue;
        }
        out.push((k, build_mode(geom, k, here, (lo, hi), opts)));
    }
    Ok(out)
}

/// All modes in k_min..=k_max, sorted by ω_k; fails on the first solver error.
pub fn locate_resonances(
    geom: &CavityGeometry,
    k_min: i64,
    k_max: i64,
    opts: &ResonanceOptions,
) -> Result<Vec<ResonantMode>> {
    let mut modes = locate_resonances_each(geom, k_min, k_max, opts)?
        .into_iter()
        .map(|(_, r)| r)
        .collect::<Result<Vec<_>>>()?;
    modes.sort_by(|a, b| a.omega_k.total_cmp(&b.omega_k));
    Ok(modes)
}

pub fn locate_resonance(geom: &CavityGeometry, k: i64, opts: &ResonanceOptions) -> Result<ResonantMode> {
    Ok(locate_resonances(geom, k, k, opts)?.remove(0))
}

fn clone_err(e: &CavityError) -> CavityError {
    match e {
        CavityError::NonConvergence { k, iterations, last, residual } => CavityError::NonConvergence {
            k: *k,
            iterations: *iterations,
            last: *last,
            residual: *residual,
        },
        CavityError::NonDecaying { k, omega } => CavityError::NonDecaying { k: *k, omega: *omega },
        other => CavityError::Singular(other.to_string()),
    }
}

/// Standing-wave mode function E_k(z) = iω_k [1/(ε1 l ω_k)]^{1/2} sin(β1 z)
/// with ħ = ε0 = 𝒜 = 1.
pub fn mode_profile(mode: &ResonantMode, geom: &CavityGeometry, z: f64) -> Result<Complex64> {
    if !(0.0..=geom.l).contains(&z) {
        return Err(CavityError::invalid(format!("z = {z} outside [0, {}]", geom.l)));
    }
    let w = Complex64::new(mode.omega_k, 0.0);
    let n1 = geom.n1(w);
    let norm = (1.0 / (n1 * n1 * geom.l * mode.omega_k)).sqrt();
    Ok(I * mode.omega_k * norm * (n1 * mode.omega_k * z).sin())
}
