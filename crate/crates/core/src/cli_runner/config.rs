//! Scenario files: TOML with sections `geometry`, `resonance`, `extraction`,
//! `state` and `output`. Complex numbers are `[re, im]` arrays; relative file
//! paths resolve against the directory holding the scenario file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CavityError, Result};
use crate::extraction::{BasisKind, ExtractionSettings, GridKind};
use crate::layered_optics::{CavityGeometry, DispersionTable, OpticalMedium};
use crate::resonances::ResonanceOptions;
use crate::states_wigner::{ChannelCoupling, ChannelConfig, CouplingMode, GridSpec, SqueezeAxis, StateSpec, WignerGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Grid,
}

impl std::str::FromStr for OutputFormat {
    type Err = CavityError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "grid" => Ok(OutputFormat::Grid),
            other => Err(CavityError::config("format", format!("unknown format {other:?}; use csv, json or grid"))),
        }
    }
}

/// A refractive index given inline or as a `omega,n_re,n_im` CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndexEntry {
    Constant(Complex64),
    Table { table: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub l: f64,
    pub d: f64,
    #[serde(default = "vacuum_index")]
    pub n1: IndexEntry,
    pub n2: IndexEntry,
}

fn vacuum_index() -> IndexEntry {
    IndexEntry::Constant(Complex64::new(1.0, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceSection {
    pub k_range: Option<[i64; 2]>,
    pub tol: f64,
    pub max_iter: usize,
    pub validity_threshold: f64,
    pub closure_tolerance: f64,
    pub estimate_omega: Option<f64>,
    /// Uniform sweep points across each mode interval.
    pub sweep_points: usize,
    /// Extra points within ±`peak_span`·Γ_k of each ω_k.
    pub peak_points: usize,
    pub peak_span: f64,
}

impl Default for ResonanceSection {
    fn default() -> Self {
        let o = ResonanceOptions::default();
        ResonanceSection {
            k_range: None,
            tol: o.tol,
            max_iter: o.max_iter,
            validity_threshold: o.validity_threshold,
            closure_tolerance: o.closure_tolerance,
            estimate_omega: o.estimate_omega,
            sweep_points: 2001,
            peak_points: 401,
            peak_span: 10.0,
        }
    }
}

impl ResonanceSection {
    pub fn options(&self) -> ResonanceOptions {
        ResonanceOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            validity_threshold: self.validity_threshold,
            closure_tolerance: self.closure_tolerance,
            estimate_omega: self.estimate_omega,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionSection {
    /// Mode to extract; defaults to the first k of `resonance.k_range`.
    pub k: Option<i64>,
    pub t0: f64,
    /// Time used by `wigner-map` in derived mode; defaults to the last curve time.
    pub t: Option<f64>,
    /// Explicit curve times. Overrides `decay_times`.
    pub times: Option<Vec<f64>>,
    /// Curve endpoints in units of 1/(γ_rad + γ_abs) after t0.
    pub decay_times: [f64; 2],
    pub points: usize,
    pub delta_t: f64,
    pub quad_order: usize,
    pub basis: BasisKind,
    pub basis_size: usize,
    pub grid: GridKind,
}

impl Default for ExtractionSection {
    fn default() -> Self {
        let s = ExtractionSettings::default();
        ExtractionSection {
            k: None,
            t0: 0.0,
            t: None,
            times: None,
            decay_times: [0.1, 5.0],
            points: 10,
            delta_t: 0.0,
            quad_order: s.quad_order,
            basis: s.basis,
            basis_size: s.basis_size,
            grid: s.grid,
        }
    }
}

impl ExtractionSection {
    pub fn settings_at(&self, t: f64) -> ExtractionSettings {
        ExtractionSettings {
            t0: self.t0,
            t,
            delta_t: self.delta_t,
            quad_order: self.quad_order,
            basis_size: self.basis_size,
            basis: self.basis,
            grid: self.grid,
        }
    }

    /// Curve times for a mode with total rate `rate` = γ_rad + γ_abs.
    pub fn curve_times(&self, rate: f64) -> Vec<f64> {
        if let Some(t) = &self.times {
            return t.clone();
        }
        let [a, b] = self.decay_times;
        let n = self.points;
        (0..n)
            .map(|i| {
                let s = if n == 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 };
                self.t0 + s / rate
            })
            .collect()
    }
}

/// State as written in a scenario: the closed-form kinds, or a grid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateEntry {
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
    GridFile {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub channel: String,
    pub chi: Complex64,
    #[serde(default = "vacuum_state")]
    pub state: StateEntry,
}

fn vacuum_state() -> StateEntry {
    StateEntry::Vacuum
}

/// Figure-style cat generation: two coherent inputs β and −iβ with common
/// coupling χ_in, and thermal noise n̄ through the aggregate coupling χ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatSection {
    pub eta: f64,
    pub chi: f64,
    pub chi_in: Complex64,
    pub beta: Complex64,
    pub mean_photons: f64,
}

impl CatSection {
    /// 2n̄|χ|²
    pub fn noise(&self) -> f64 {
        2.0 * self.mean_photons * self.chi * self.chi
    }

    /// Where the cavity state lands in the output phase space.
    pub fn output_center(&self) -> Complex64 {
        self.beta * self.chi_in.conj() * Complex64::new(1.0, -1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Defaults to the origin, or to the displaced cavity state for cat runs.
    pub center: Option<Complex64>,
    #[serde(default = "default_half_extent")]
    pub half_extent: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_true")]
    pub auto_expand: bool,
}

fn default_half_extent() -> f64 {
    GridSpec::default().half_extent
}

fn default_resolution() -> usize {
    GridSpec::default().resolution
}

fn default_true() -> bool {
    true
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            center: None,
            half_extent: default_half_extent(),
            resolution: default_resolution(),
            auto_expand: true,
        }
    }
}

impl GridSection {
    pub fn spec(&self, fallback_center: Complex64) -> GridSpec {
        GridSpec {
            center: self.center.unwrap_or(fallback_center),
            half_extent: self.half_extent,
            resolution: self.resolution,
            auto_expand: self.auto_expand,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    pub cavity: StateEntry,
    #[serde(default)]
    pub mode: CouplingMode,
    /// Prescribed η for `wigner-map`.
    pub eta: Option<f64>,
    #[serde(default)]
    pub channels: Vec<ChannelEntry>,
    /// Initial state of every basis mode of a channel (`in`, `cav`, `plus`,
    /// `minus`) in derived mode; unlisted channels are in vacuum.
    #[serde(default)]
    pub channel_states: BTreeMap<String, StateEntry>,
    pub cat: Option<CatSection>,
    #[serde(default)]
    pub grid: GridSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Empty means the subcommand's natural formats.
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: PathBuf::from("out"), formats: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub geometry: Option<GeometrySection>,
    #[serde(default)]
    pub resonance: ResonanceSection,
    #[serde(default)]
    pub extraction: ExtractionSection,
    pub state: Option<StateSection>,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory against which relative paths resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// SHA-256 of the scenario text, hex encoded.
    #[serde(skip)]
    pub hash: String,
}

fn default_name() -> String {
    "scenario".to_string()
}

fn in_field<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        CavityError::Config { .. } => e,
        other => CavityError::config(field, other.to_string()),
    })
}

fn require(field: &str, ok: bool, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CavityError::config(field, message))
    }
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CavityError::config("config", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    /// Parses and checks a scenario; `base_dir` anchors relative paths.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CavityError::config("config", e.to_string()))?;
        let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." || path.is_empty() { "config".to_string() } else { path };
            CavityError::config(field, e.into_inner().to_string())
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.hash = hex::encode(Sha256::digest(text.as_bytes()));
        cfg.check()?;
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check(&self) -> Result<()> {
        if let Some(g) = &self.geometry {
            require("geometry.l", g.l.is_finite() && g.l > 0.0, format!("cavity length {} must be positive", g.l))?;
            require("geometry.d", g.d.is_finite() && g.d >= 0.0, format!("plate thickness {} must be >= 0", g.d))?;
            self.geometry()?;
        }
        let r = &self.resonance;
        if let Some([a, b]) = r.k_range {
            require("resonance.k_range", a >= 1 && b >= a, format!("need 1 <= k_min <= k_max, got [{a}, {b}]"))?;
        }
        require("resonance.tol", r.tol > 0.0, "must be positive")?;
        require("resonance.max_iter", r.max_iter > 0, "must be positive")?;
        require("resonance.sweep_points", r.sweep_points >= 2, "need at least 2 points")?;
        require("resonance.peak_span", r.peak_span > 0.0, "must be positive")?;

        let x = &self.extraction;
        require("extraction.points", x.points >= 1, "need at least 1 point")?;
        let [a, b] = x.decay_times;
        require("extraction.decay_times", a >= 0.0 && b >= a, format!("need 0 <= start <= end, got [{a}, {b}]"))?;
        if let Some(ts) = &x.times {
            require("extraction.times", !ts.is_empty(), "empty time list")?;
            for t in ts {
                in_field("extraction.times", x.settings_at(*t).validate())?;
            }
        }
        if let Some(k) = x.k {
            require("extraction.k", k >= 1, format!("mode index {k} must be >= 1"))?;
        }
        in_field("extraction", x.settings_at(x.t.unwrap_or(x.t0)).validate())?;

        if let Some(s) = &self.state {
            in_field("state.cavity", self.state_spec(&s.cavity).and_then(|st| st.validate()))?;
            for (i, c) in s.channels.iter().enumerate() {
                let st = in_field(&format!("state.channels[{i}].state"), self.state_spec(&c.state))?;
                in_field(&format!("state.channels[{i}].state"), st.validate())?;
                require(&format!("state.channels[{i}].chi"), c.chi.is_finite(), "χ must be finite")?;
            }
            for (name, entry) in &s.channel_states {
                let field = format!("state.channel_states.{name}");
                require(&field, matches!(name.as_str(), "in" | "cav" | "plus" | "minus"), "channel must be in, cav, plus or minus")?;
                in_field(&field, self.state_spec(entry).and_then(|st| st.validate()))?;
            }
            if let Some(eta) = s.eta {
                require("state.eta", (0.0..=1.0).contains(&eta), format!("η = {eta} outside [0, 1]"))?;
            }
            if let Some(c) = &s.cat {
                require("state.cat.eta", c.eta > 0.0 && c.eta <= 1.0, format!("η = {} outside (0, 1]", c.eta))?;
                require("state.cat.chi", c.chi.is_finite(), "must be finite")?;
                require("state.cat.chi_in", c.chi_in.is_finite(), "must be finite")?;
                require("state.cat.beta", c.beta.is_finite(), "must be finite")?;
                require("state.cat.mean_photons", c.mean_photons >= 0.0, "must be >= 0")?;
            }
            in_field("state.grid", s.grid.spec(Complex64::new(0.0, 0.0)).validate())?;
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<CavityGeometry> {
        let g = self.geometry.as_ref().ok_or_else(|| CavityError::config("geometry", "section missing"))?;
        let n1 = in_field("geometry.n1", self.medium(&g.n1))?;
        let n2 = in_field("geometry.n2", self.medium(&g.n2))?;
        in_field("geometry", CavityGeometry::new(g.l, g.d, n1, n2))
    }

    fn medium(&self, entry: &IndexEntry) -> Result<OpticalMedium> {
        match entry {
            IndexEntry::Constant(n) => OpticalMedium::constant(*n),
            IndexEntry::Table { table } => {
                let path = self.resolve(table);
                Ok(OpticalMedium::Tabulated(read_dispersion_table(&path)?))
            }
        }
    }

    pub fn k_range(&self) -> Result<(i64, i64)> {
        self.resonance
            .k_range
            .map(|[a, b]| (a, b))
            .ok_or_else(|| CavityError::config("resonance.k_range", "missing"))
    }

    pub fn state_section(&self) -> Result<&StateSection> {
        self.state.as_ref().ok_or_else(|| CavityError::config("state", "section missing"))
    }

    pub fn state_spec(&self, entry: &StateEntry) -> Result<StateSpec> {
        Ok(match entry {
            StateEntry::Vacuum => StateSpec::Vacuum,
            StateEntry::Coherent { amplitude } => StateSpec::Coherent { amplitude: *amplitude },
            StateEntry::Thermal { mean_photons } => StateSpec::Thermal { mean_photons: *mean_photons },
            StateEntry::SqueezedNumber { squeeze, photons, axis } => {
                StateSpec::SqueezedNumber { squeeze: *squeeze, photons: *photons, axis: *axis }
            }
            StateEntry::GridFile { path } => {
                let path = self.resolve(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CavityError::invalid(format!("cannot read grid file {}: {e}", path.display())))?;
                StateSpec::Grid { grid: WignerGrid::from_text(&text)? }
            }
        })
    }

    /// Channel couplings as prescribed in the `state` section.
    pub fn prescribed_channels(&self) -> Result<ChannelConfig> {
        let s = self.state_section()?;
        let eta = s.eta.ok_or_else(|| CavityError::config("state.eta", "missing (needed in prescribed mode)"))?;
        let couplings = s
            .channels
            .iter()
            .map(|c| {
                Ok(ChannelCoupling { channel: c.channel.clone(), chi: c.chi, state: self.state_spec(&c.state)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelConfig::new(eta, couplings))
    }
}

#[derive(Deserialize)]
struct TableRow {
    omega: f64,
    n_re: f64,
    n_im: f64,
}

/// Reads `omega,n_re,n_im` rows.
pub fn read_dispersion_table(path: &Path) -> Result<DispersionTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CavityError::invalid(format!("cannot read dispersion table {}: {e}", path.display())))?;
    let mut omega = Vec::new();
    let mut index = Vec::new();
    for row in rdr.deserialize::<TableRow>() {
        let row = row.map_err(|e| CavityError::invalid(format!("dispersion table {}: {e}", path.display())))?;
        omega.push(row.omega);
        index.push(Complex64::new(row.n_re, row.n_im));
    }
    DispersionTable::new(omega, index)
}
