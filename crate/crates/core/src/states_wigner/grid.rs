use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CavityError, Result};

fn default_center() -> Complex64 {
    Complex64::new(0.0, 0.0)
}
fn default_half_extent() -> f64 {
    6.0
}
fn default_resolution() -> usize {
    257
}
fn default_true() -> bool {
    true
}

/// M×M lattice over [−L, L]² around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_center")]
    pub center: Complex64,
    #[serde(default = "default_half_extent")]
    pub half_extent: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Widen the extent when the result reaches the border.
    #[serde(default = "default_true")]
    pub auto_expand: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            center: default_center(),
            half_extent: default_half_extent(),
            resolution: default_resolution(),
            auto_expand: true,
        }
    }
}

impl GridSpec {
    pub fn new(center: Complex64, half_extent: f64, resolution: usize) -> Self {
        Self { center, half_extent, resolution, auto_expand: true }
    }

    pub fn fixed(mut self) -> Self {
        self.auto_expand = false;
        self
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / (self.resolution - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 3 {
            return Err(CavityError::invalid(format!("grid resolution {} must be at least 3", self.resolution)));
        }
        if !(self.half_extent.is_finite() && self.half_extent > 0.0) {
            return Err(CavityError::invalid(format!("grid half extent {} must be positive", self.half_extent)));
        }
        if !self.center.is_finite() {
            return Err(CavityError::invalid("grid centre must be finite"));
        }
        Ok(())
    }

    /// Same cell size, extent grown by roughly `factor`.
    pub fn expanded(&self, factor: f64) -> Self {
        let h = self.spacing();
        let cells = ((self.resolution - 1) as f64 * factor / 2.0).ceil() as usize * 2;
        Self { resolution: cells + 1, half_extent: 0.5 * cells as f64 * h, ..self.clone() }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.center.re - self.half_extent + i as f64 * self.spacing()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.center.im - self.half_extent + j as f64 * self.spacing()
    }
}

/// Wigner function sampled on an M×M grid; `values[j*M + i]` is W at
/// (x_i, p_j), so rows have constant p and x increases along a row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub center: Complex64,
    pub half_extent: f64,
    pub resolution: usize,
    pub values: Vec<f64>,
}

/// Lagrange weights for nodes −1, 0, 1, 2 at fraction t.
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

impl WignerGrid {
    pub fn from_fn(spec: &GridSpec, f: impl Fn(Complex64) -> f64 + Sync) -> Self {
        let m = spec.resolution;
        let mut values = vec![0.0; m * m];
        values.par_chunks_mut(m).enumerate().for_each(|(j, row)| {
            let p = spec.p(j);
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(Complex64::new(spec.x(i), p));
            }
        });
        Self { center: spec.center, half_extent: spec.half_extent, resolution: m, values }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec::new(self.center, self.half_extent, self.resolution)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec().validate()?;
        if self.values.len() != self.resolution * self.resolution {
            return Err(CavityError::invalid(format!(
                "grid has {} values, expected {}",
                self.values.len(),
                self.resolution * self.resolution
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(CavityError::invalid("grid contains non-finite values"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / (self.resolution - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing().powi(2)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.center.re - self.half_extent + i as f64 * self.spacing()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.center.im - self.half_extent + j as f64 * self.spacing()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.resolution + i]
    }

    /// Riemann sum Σ W·h².
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Sup-norm distance to a grid on the same lattice.
    pub fn sup_distance(&self, other: &WignerGrid) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "grids differ in size");
        self.values.iter().zip(&other.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn row_index(&self, p: f64) -> usize {
        let j = ((p - self.center.im + self.half_extent) / self.spacing()).round();
        j.clamp(0.0, (self.resolution - 1) as f64) as usize
    }

    /// Σ|W|·h² over the outer `cells` rings.
    pub fn border_mass(&self, cells: usize) -> f64 {
        let m = self.resolution;
        let k = cells.min(m / 2);
        let mut s = 0.0;
        for j in 0..m {
            for i in 0..m {
                if i < k || j < k || i + k >= m || j + k >= m {
                    s += self.at(i, j).abs();
                }
            }
        }
        s * self.cell_area()
    }

    fn at_or_zero(&self, i: i64, j: i64) -> f64 {
        let m = self.resolution as i64;
        if i < 0 || j < 0 || i >= m || j >= m {
            0.0
        } else {
            self.at(i as usize, j as usize)
        }
    }

    /// Bicubic Lagrange interpolation on the 4×4 surrounding nodes; the grid
    /// is continued by zeros.
    pub fn interpolate(&self, alpha: Complex64) -> f64 {
        let h = self.spacing();
        let u = (alpha.re - self.center.re + self.half_extent) / h;
        let v = (alpha.im - self.center.im + self.half_extent) / h;
        let last = (self.resolution - 1) as f64;
        if !(0.0..=last).contains(&u) || !(0.0..=last).contains(&v) {
            return 0.0;
        }
        let (i, j) = (u.floor().min(last - 1.0), v.floor().min(last - 1.0));
        let (wu, wv) = (cubic_weights(u - i), cubic_weights(v - j));
        let (i, j) = (i as i64, j as i64);
        let mut acc = 0.0;
        for (b, wb) in wv.iter().enumerate() {
            let row: f64 = wu.iter().enumerate().map(|(a, wa)| wa * self.at_or_zero(i + a as i64 - 1, j + b as i64 - 1)).sum();
            acc += wb * row;
        }
        acc
    }

    /// Riemann-sum Fourier transform Σ W(α) e^{βα*−β*α} h².
    pub fn characteristic(&self, beta: Complex64) -> Complex64 {
        let m = self.resolution;
        // βα* − β*α = 2i(Im β · x − Re β · p), separable in x and p
        let ex: Vec<Complex64> = (0..m).map(|i| Complex64::new(0.0, 2.0 * beta.im * self.x(i)).exp()).collect();
        let mut total = Complex64::new(0.0, 0.0);
        for j in 0..m {
            let ep = Complex64::new(0.0, -2.0 * beta.re * self.p(j)).exp();
            let row: Complex64 = (0..m).map(|i| ex[i] * self.at(i, j)).sum();
            total += ep * row;
        }
        total * self.cell_area()
    }

    /// Plain-text matrix: `# wigner M L center_re center_im`, optional
    /// further `#` lines, then M rows of M values.
    pub fn to_text(&self, extra_header: &[String]) -> String {
        let m = self.resolution;
        let mut s = String::with_capacity(m * m * 24);
        let _ = writeln!(s, "# wigner {} {:e} {:e} {:e}", m, self.half_extent, self.center.re, self.center.im);
        for line in extra_header {
            let _ = writeln!(s, "# {line}");
        }
        for j in 0..m {
            for i in 0..m {
                if i > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{:e}", self.at(i, j));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| CavityError::invalid("empty grid file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "#" || fields[1] != "wigner" {
            return Err(CavityError::invalid(format!("bad grid header: {header:?}")));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| CavityError::invalid(format!("bad number {s:?} in grid header")))
        };
        let m: usize = fields[2]
            .parse()
            .map_err(|_| CavityError::invalid(format!("bad resolution {:?} in grid header", fields[2])))?;
        let half_extent = num(fields[3])?;
        let center = Complex64::new(num(fields[4])?, num(fields[5])?);
        let mut values = Vec::with_capacity(m * m);
        let data = lines.filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
        for (row, line) in data.enumerate() {
            let before = values.len();
            for tok in line.split_whitespace() {
                values.push(
                    tok.parse::<f64>().map_err(|_| CavityError::invalid(format!("bad grid value {tok:?}")))?,
                );
            }
            if values.len() - before != m {
                return Err(CavityError::invalid(format!("grid row {row} has {} values, expected {m}", values.len() - before)));
            }
        }
        let grid = Self { center, half_extent, resolution: m, values };
        grid.validate()?;
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let spec = GridSpec::new(Complex64::new(0.5, -1.0), 2.0, 9);
        let g = WignerGrid::from_fn(&spec, |a| (a.re * 1.7).sin() / 3.0 + a.im);
        let back = WignerGrid::from_text(&g.to_text(&["config abc".into()])).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn expansion_keeps_cell_size() {
        let s = GridSpec::new(Complex64::new(0.0, 0.0), 6.0, 257);
        let e = s.expanded(1.25);
        assert!((e.spacing() - s.spacing()).abs() < 1e-15);
        assert!(e.half_extent >= 7.5 - 1e-12);
        assert_eq!(e.resolution % 2, 1);
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let spec = GridSpec::new(Complex64::new(0.0, 0.0), 1.0, 5);
        let g = WignerGrid::from_fn(&spec, |a| a.re + 2.0 * a.im);
        assert!((g.interpolate(Complex64::new(0.5, -0.5)) - g.at(3, 1)).abs() < 1e-15);
        let cubic = WignerGrid::from_fn(&GridSpec::new(Complex64::new(0.0, 0.0), 2.0, 9), |a| a.re.powi(3) - a.im * a.re);
        let z = Complex64::new(0.13, -0.41);
        assert!((cubic.interpolate(z) - (z.re.powi(3) - z.im * z.re)).abs() < 1e-13);
        // exact for polynomials of degree ≤ 3 away from the border
        assert!((g.interpolate(Complex64::new(0.13, 0.41)) - 0.95).abs() < 1e-14);
        assert_eq!(g.interpolate(Complex64::new(2.0, 0.0)), 0.0);
    }
}
