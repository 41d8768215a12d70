//! Quadrature rules over a resonance interval (Δ_k).
//!
//! A plain Gauss–Legendre rule cannot see a Lorentzian of width Γ ≪ Δω with a
//! modest node count, so the working rules map θ ∈ (θ_lo, θ_hi) to
//! ω = ω_k + a·tan θ and apply Gauss–Legendre in θ. That places nodes with
//! density ∝ 1/((ω−ω_k)² + a²), matching the line shape. Far in the tails the
//! integrands oscillate like e^{iωτ}; there a single node aliases the phase, so
//! [`QuadratureRule::resonance_adapted`] splits every far node into a pair a
//! quarter period apart that averages the oscillation out. When the tails must
//! be fully resolved (complete-basis sums), [`QuadratureRule::resolved`] uses
//! composite panels a few nodes per oscillation period.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> Self {
        let (x, w) = gauss_legendre(n);
        let (half, mid) = (0.5 * (hi - lo), 0.5 * (hi + lo));
        QuadratureRule {
            nodes: x.iter().map(|&s| mid + half * s).collect(),
            weights: w.iter().map(|&v| half * v).collect(),
        }
    }

    /// Gauss–Legendre in θ for ω = center + a·tan θ, restricted to [lo, hi].
    pub fn cauchy_mapped(n: usize, center: f64, a: f64, lo: f64, hi: f64) -> Self {
        let (x, w) = gauss_legendre(n);
        let t_lo = ((lo - center) / a).atan();
        let t_hi = ((hi - center) / a).atan();
        let (half, mid) = (0.5 * (t_hi - t_lo), 0.5 * (t_hi + t_lo));
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (&s, &v) in x.iter().zip(&w) {
            let th = mid + half * s;
            let c = th.cos();
            nodes.push(center + a * th.tan());
            weights.push(half * v * a / (c * c));
        }
        QuadratureRule { nodes, weights }
    }

    /// At most `n` nodes on (Δ_k) for integrands with a Lorentzian of width
    /// `gamma` at `center` multiplied by phases e^{iωτ}. Core scale
    /// a = max(Γ/2, 4/τ); nodes whose phase offset |ω−ω_k|τ exceeds 20 rad
    /// become pairs at ±π/(2τ) carrying half the weight each.
    pub fn resonance_adapted(n: usize, center: f64, gamma: f64, lo: f64, hi: f64, tau: f64) -> Self {
        const CORE_PERIODS: f64 = 4.0;
        const PAIR_PHASE: f64 = 20.0;
        let a = if tau > 0.0 { (0.5 * gamma).max(CORE_PERIODS / tau) } else { 0.5 * gamma };
        if tau <= 0.0 {
            return Self::cauchy_mapped(n, center, a, lo, hi);
        }
        let far = |x: f64| (x - center).abs() * tau > PAIR_PHASE;
        let mut base = Self::cauchy_mapped(n, center, a, lo, hi);
        for m in (2..=n).rev() {
            base = Self::cauchy_mapped(m, center, a, lo, hi);
            let paired = base.nodes.iter().filter(|&&x| far(x)).count();
            if m + paired <= n {
                break;
            }
        }
        let h = PI / (2.0 * tau);
        let mut split: Vec<bool> = base.nodes.iter().map(|&x| far(x)).collect();
        // top up to exactly n nodes by also splitting the next-farthest nodes
        let mut deficit = n - base.len() - split.iter().filter(|&&b| b).count();
        let mut near: Vec<usize> = (0..base.len()).filter(|&i| !split[i]).collect();
        near.sort_by(|&i, &j| (base.nodes[j] - center).abs().total_cmp(&(base.nodes[i] - center).abs()));
        for i in near {
            if deficit == 0 {
                break;
            }
            split[i] = true;
            deficit -= 1;
        }
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(n);
        for ((&x, &w), &sp) in base.nodes.iter().zip(&base.weights).zip(&split) {
            if sp && hi - lo > 2.0 * h {
                let c = x.clamp(lo + h, hi - h);
                pts.push((c - h, 0.5 * w));
                pts.push((c + h, 0.5 * w));
            } else {
                pts.push((x, w));
            }
        }
        pts.sort_by(|p, q| p.0.total_cmp(&q.0));
        QuadratureRule {
            nodes: pts.iter().map(|p| p.0).collect(),
            weights: pts.iter().map(|p| p.1).collect(),
        }
    }

    /// Rule that resolves e^{iωτ} everywhere on (Δ_k): a 600-node Cauchy-mapped
    /// core within 40a of the peak (a = max(Γ/2, 1/τ)) and 16-point
    /// Gauss–Legendre panels in the tails with about `nodes_per_period` nodes per
    /// period 2π/τ.
    pub fn resolved(center: f64, gamma: f64, lo: f64, hi: f64, tau: f64, nodes_per_period: f64) -> Self {
        const CORE_NODES: usize = 600;
        const PANEL: usize = 16;
        let a = if tau > 0.0 { (0.5 * gamma).max(1.0 / tau) } else { 0.5 * gamma };
        let core = (40.0 * a).min(0.9 * (center - lo).min(hi - center));
        let mut rule = Self::cauchy_mapped(CORE_NODES, center, a, center - core, center + core);
        let (px, pw) = gauss_legendre(PANEL);
        for (p, q) in [(lo, center - core), (center + core, hi)] {
            let len = q - p;
            let nt = (nodes_per_period * len * tau / (2.0 * PI)).ceil() as usize + 50;
            let panels = (nt / PANEL).max(1);
            let step = len / panels as f64;
            for j in 0..panels {
                let a0 = p + step * j as f64;
                for (&s, &v) in px.iter().zip(&pw) {
                    rule.nodes.push(a0 + 0.5 * step * (s + 1.0));
                    rule.weights.push(0.5 * step * v);
                }
            }
        }
        let mut pts: Vec<(f64, f64)> = rule.nodes.into_iter().zip(rule.weights).collect();
        pts.sort_by(|p, q| p.0.total_cmp(&q.0));
        QuadratureRule {
            nodes: pts.iter().map(|p| p.0).collect(),
            weights: pts.iter().map(|p| p.1).collect(),
        }
    }
}
