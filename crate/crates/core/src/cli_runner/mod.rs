//! Scenario-driven runs behind the command-line tool. Each run renders its
//! artifacts in memory; [`write_artifacts`] then writes them one by one, so
//! the same scenario always produces byte-identical files.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{CavityError, Result};
use crate::extraction::{extract, Channel, ExtractionResult};
use crate::layered_optics::CavityGeometry;
use crate::resonances::{cavity_response, locate_resonance, locate_resonances_each, ResonantMode};
use crate::states_wigner::{
    cat_output_wigner, fidelity_condition, negativity_metrics, output_wigner, sign_changes_along_x, within_wigner_bound,
    ChannelConfig, CouplingMode, StateSpec, WignerMap,
};

pub use config::{
    read_dispersion_table, CatSection, ChannelEntry, ExtractionSection, GeometrySection, GridSection, IndexEntry,
    OutputFormat, OutputSection, ResonanceSection, ScenarioConfig, StateEntry, StateSection,
};

/// |W| at or below this is treated as zero when counting sign changes.
pub const SIGN_CHANGE_FLOOR: f64 = 1e-6;

/// The four figure scenarios shipped with the crate, by name.
pub const CANONICAL_CONFIGS: [(&str, &str); 4] = [
    ("fig2a", include_str!("../../configs/fig2a.toml")),
    ("fig2b", include_str!("../../configs/fig2b.toml")),
    ("fig3a", include_str!("../../configs/fig3a.toml")),
    ("fig3b", include_str!("../../configs/fig3b.toml")),
];

pub fn canonical_config(name: &str) -> Option<ScenarioConfig> {
    let (_, text) = CANONICAL_CONFIGS.iter().find(|(n, _)| *n == name)?;
    ScenarioConfig::from_toml(text, Path::new(".")).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Resonances,
    Extraction,
    CatDemo,
    WignerMap,
}

impl Command {
    fn formats(&self) -> (&'static [OutputFormat], &'static [OutputFormat]) {
        use OutputFormat::*;
        match self {
            Command::Resonances | Command::Extraction => (&[Json, Csv], &[Json, Csv]),
            Command::CatDemo | Command::WignerMap => (&[Grid, Json], &[Grid, Json, Csv]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// One-line human summary for the terminal.
    pub summary: String,
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

/// 0 success, 1 numeric failure, 2 configuration problem.
pub fn exit_code(e: &CavityError) -> i32 {
    match e {
        CavityError::Config { .. } | CavityError::InvalidInput(_) => 2,
        _ => 1,
    }
}

/// Turns bad-input errors raised deep inside a run into config errors on `field`.
fn blame<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        CavityError::InvalidInput(m) => CavityError::config(field, m),
        other => other,
    })
}

fn chosen_formats(cmd: Command, cfg: &ScenarioConfig, requested: &[OutputFormat]) -> Result<Vec<OutputFormat>> {
    let (natural, allowed) = cmd.formats();
    let (field, list) = if !requested.is_empty() {
        ("format", requested.to_vec())
    } else if !cfg.output.formats.is_empty() {
        ("output.formats", cfg.output.formats.clone())
    } else {
        ("output.formats", natural.to_vec())
    };
    if let Some(bad) = list.iter().find(|f| !allowed.contains(f)) {
        return Err(CavityError::config(field, format!("{bad:?} output is not available for this subcommand")));
    }
    let mut list = list;
    list.sort();
    list.dedup();
    Ok(list)
}

pub fn run(cmd: Command, cfg: &ScenarioConfig, requested: &[OutputFormat]) -> Result<RunOutput> {
    let formats = chosen_formats(cmd, cfg, requested)?;
    match cmd {
        Command::Resonances => run_resonances(cfg, &formats),
        Command::Extraction => run_extraction(cfg, &formats),
        Command::CatDemo => run_cat_demo(cfg, &formats),
        Command::WignerMap => run_wigner_map(cfg, &formats),
    }
}

/// Creates `dir` if needed and writes every artifact into it.
pub fn write_artifacts(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(out.artifacts.len());
    for a in &out.artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.contents)?;
        written.push(path);
    }
    Ok(written)
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

/// CSV text behind a `# config_sha256=` line.
fn csv_text(hash: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| CavityError::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let body = w.into_inner().map_err(|e| CavityError::Io(std::io::Error::other(e.to_string())))?;
    Ok(format!("# config_sha256={hash}\n{}", String::from_utf8_lossy(&body)))
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data always serializes")
}

fn locate(cfg: &ScenarioConfig, geom: &CavityGeometry, k: i64) -> Result<ResonantMode> {
    blame("resonance", locate_resonance(geom, k, &cfg.resonance.options()))
}

/// Sweep frequencies for one mode: a uniform pass over (Δ_k) merged with a
/// dense one around ω_k.
fn sweep_frequencies(mode: &ResonantMode, r: &ResonanceSection) -> Vec<f64> {
    let (lo, hi) = mode.interval;
    let lin = |a: f64, b: f64, n: usize| -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (a + b)];
        }
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    };
    let mut w = lin(lo, hi, r.sweep_points);
    let half = r.peak_span * mode.gamma_k;
    if r.peak_points > 0 && half > 0.0 {
        w.extend(lin((mode.omega_k - half).max(lo), (mode.omega_k + half).min(hi), r.peak_points));
    }
    w.sort_by(f64::total_cmp);
    w.dedup();
    w
}

pub fn run_resonances(cfg: &ScenarioConfig, formats: &[OutputFormat]) -> Result<RunOutput> {
    let geom = cfg.geometry()?;
    let (k_min, k_max) = cfg.k_range()?;
    let opts = cfg.resonance.options();
    let each = blame("resonance", locate_resonances_each(&geom, k_min, k_max, &opts))?;

    let mut modes = Vec::new();
    let mut failures = Vec::new();
    let mut first_err = None;
    for (k, r) in each {
        match r {
            Ok(m) => modes.push(m),
            Err(e) => {
                failures.push(json!({ "k": k, "error": e.to_string() }));
                first_err.get_or_insert(e);
            }
        }
    }
    if modes.is_empty() {
        return Err(first_err.unwrap_or_else(|| CavityError::Singular("no modes in range".into())));
    }

    let mut warnings = Vec::new();
    let mut mode_values = Vec::new();
    for m in &modes {
        let mut v = to_value(m);
        v["closure_ok"] = json!(m.closure_ok(opts.closure_tolerance));
        mode_values.push(v);
        if !m.valid {
            warnings.push(format!("mode {}: Γ/Δω = {:.3e} outside the high-Q regime", m.k, m.validity_ratio));
        }
        if !m.closure_ok(opts.closure_tolerance) {
            warnings.push(format!("mode {}: decay-rate closure residual {:.3e}", m.k, m.closure_residual));
        }
    }

    let mut artifacts = Vec::new();
    if formats.contains(&OutputFormat::Json) {
        let v = json!({
            "name": cfg.name,
            "config_hash": cfg.hash,
            "k_range": [k_min, k_max],
            "modes": mode_values,
            "failures": failures,
            "warnings": warnings,
        });
        artifacts.push(Artifact { name: format!("{}_resonances.json", cfg.name), contents: json_text(&v) });
    }
    if formats.contains(&OutputFormat::Csv) {
        let mut rows = Vec::new();
        for m in &modes {
            let w = sweep_frequencies(m, &cfg.resonance);
            let vals = w
                .par_iter()
                .map(|&x| cavity_response(&geom, Complex64::new(x, 0.0)).map(|d| 1.0 / d.norm_sqr()))
                .collect::<Result<Vec<f64>>>()?;
            for (x, v) in w.iter().zip(vals) {
                rows.push(vec![m.k.to_string(), num(*x), num(v)]);
            }
        }
        artifacts.push(Artifact {
            name: format!("{}_spectrum.csv", cfg.name),
            contents: csv_text(&cfg.hash, &["k", "omega", "inv_abs_d1_sq"], rows)?,
        });
    }
    let summary = format!("{} of {} modes located", modes.len(), k_max - k_min + 1);
    Ok(RunOutput { artifacts, summary, warnings })
}

fn extraction_mode(cfg: &ScenarioConfig) -> Result<(CavityGeometry, ResonantMode)> {
    let geom = cfg.geometry()?;
    let k = match cfg.extraction.k {
        Some(k) => k,
        None => cfg
            .resonance
            .k_range
            .map(|r| r[0])
            .ok_or_else(|| CavityError::config("extraction.k", "missing (and no resonance.k_range to default from)"))?,
    };
    let mode = locate(cfg, &geom, k)?;
    if !(mode.gamma_rad + mode.gamma_abs > 0.0) {
        return Err(CavityError::Singular(format!("mode {k} has no decay (γ_rad + γ_abs = 0)")));
    }
    Ok((geom, mode))
}

fn chi_value(r: &ExtractionResult) -> Value {
    let mut m = serde_json::Map::new();
    for (ch, v) in &r.chi {
        m.insert(ch.name().to_string(), to_value(v));
    }
    Value::Object(m)
}

fn relative_difference(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        (a - b).abs()
    } else {
        ((a - b) / b).abs()
    }
}

pub fn run_extraction(cfg: &ScenarioConfig, formats: &[OutputFormat]) -> Result<RunOutput> {
    let (_, mode) = extraction_mode(cfg)?;
    let x = &cfg.extraction;
    let rate = mode.gamma_rad + mode.gamma_abs;
    let times = x.curve_times(rate);
    let results = times
        .iter()
        .map(|&t| blame("extraction", extract(&mode, &x.settings_at(t))))
        .collect::<Result<Vec<_>>>()?;

    let mut warnings: Vec<String> = Vec::new();
    for r in &results {
        for w in &r.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
    }
    let decay_time = |t: f64| rate * (t - x.t0 + x.delta_t);

    let mut artifacts = Vec::new();
    if formats.contains(&OutputFormat::Json) {
        let points: Vec<Value> = results
            .iter()
            .map(|r| {
                json!({
                    "t": r.t,
                    "decay_time": decay_time(r.t),
                    "eta": r.eta,
                    "eta_closed_form": r.eta_closed_form,
                    "relative_difference": relative_difference(r.eta, r.eta_closed_form),
                    "coupling_sum": r.coupling_sum(),
                    "residual": r.residual,
                    "chi": chi_value(r),
                    "warnings": r.warnings,
                })
            })
            .collect();
        let v = json!({
            "name": cfg.name,
            "config_hash": cfg.hash,
            "mode": {
                "k": mode.k,
                "omega_k": mode.omega_k,
                "gamma_k": mode.gamma_k,
                "gamma_rad": mode.gamma_rad,
                "gamma_rad_out": mode.gamma_rad_out,
                "gamma_abs": mode.gamma_abs,
                "closure_residual": mode.closure_residual,
                "valid": mode.valid,
            },
            "settings": to_value(x),
            "eta_squared_asymptote": mode.gamma_rad_out / rate,
            "points": points,
            "warnings": warnings,
        });
        artifacts.push(Artifact { name: format!("{}_extraction.json", cfg.name), contents: json_text(&v) });
    }
    if formats.contains(&OutputFormat::Csv) {
        let rows = results.iter().map(|r| {
            vec![
                num(r.t),
                num(decay_time(r.t)),
                num(r.eta),
                num(r.eta_closed_form),
                num(relative_difference(r.eta, r.eta_closed_form)),
                num(r.residual),
            ]
        });
        artifacts.push(Artifact {
            name: format!("{}_eta.csv", cfg.name),
            contents: csv_text(
                &cfg.hash,
                &["t", "decay_time", "eta", "eta_closed_form", "relative_difference", "residual"],
                rows,
            )?,
        });
        let mut rows = Vec::new();
        for r in &results {
            for (ch, chis) in &r.chi {
                for (i, c) in chis.iter().enumerate() {
                    rows.push(vec![num(r.t), ch.name().to_string(), i.to_string(), num(c.re), num(c.im), num(c.norm())]);
                }
            }
        }
        artifacts.push(Artifact {
            name: format!("{}_chi.csv", cfg.name),
            contents: csv_text(&cfg.hash, &["t", "channel", "index", "chi_re", "chi_im", "chi_abs"], rows)?,
        });
    }
    let last = results.last().expect("at least one curve time");
    let summary = format!(
        "mode {}: eta = {:.6} at t = {:e} (closed form {:.6}), residual {:.3e}",
        mode.k, last.eta, last.t, last.eta_closed_form, last.residual
    );
    Ok(RunOutput { artifacts, summary, warnings })
}

fn derived_channels(cfg: &ScenarioConfig, s: &StateSection) -> Result<ChannelConfig> {
    let (_, mode) = extraction_mode(cfg)?;
    let x = &cfg.extraction;
    let t = match x.t {
        Some(t) => t,
        None => *x.curve_times(mode.gamma_rad + mode.gamma_abs).last().expect("nonempty curve"),
    };
    let result = blame("extraction", extract(&mode, &x.settings_at(t)))?;
    let mut states = BTreeMap::new();
    for ch in Channel::ALL {
        let spec = match s.channel_states.get(ch.name()) {
            Some(e) => cfg.state_spec(e)?,
            None => StateSpec::Vacuum,
        };
        states.insert(ch, spec);
    }
    Ok(ChannelConfig::from_extraction(&result, |ch| states[&ch].clone()))
}

fn grid_artifacts(
    cfg: &ScenarioConfig,
    stem: &str,
    map: &WignerMap,
    metadata: Value,
    formats: &[OutputFormat],
) -> Result<Vec<Artifact>> {
    let g = &map.grid;
    let mut out = Vec::new();
    if formats.contains(&OutputFormat::Grid) {
        let header = [format!("config_sha256 {}", cfg.hash), format!("scenario {}", cfg.name)];
        out.push(Artifact { name: format!("{stem}.grid"), contents: g.to_text(&header) });
    }
    if formats.contains(&OutputFormat::Json) {
        let mut v = metadata;
        v["name"] = json!(cfg.name);
        v["config_hash"] = json!(cfg.hash);
        v["grid"] = json!({
            "center": to_value(&g.center),
            "half_extent": g.half_extent,
            "resolution": g.resolution,
            "spacing": g.spacing(),
        });
        v["normalization"] = json!(g.integral());
        v["max_abs_W"] = json!(g.max_abs());
        v["within_bound"] = json!(within_wigner_bound(g));
        v["warnings"] = json!(map.warnings);
        out.push(Artifact { name: format!("{stem}.json"), contents: json_text(&v) });
    }
    if formats.contains(&OutputFormat::Csv) {
        let m = g.resolution;
        let rows = (0..m).flat_map(|j| (0..m).map(move |i| (i, j))).map(|(i, j)| vec![num(g.x(i)), num(g.p(j)), num(g.at(i, j))]);
        out.push(Artifact { name: format!("{stem}.csv"), contents: csv_text(&cfg.hash, &["x", "p", "W"], rows)? });
    }
    Ok(out)
}

pub fn run_cat_demo(cfg: &ScenarioConfig, formats: &[OutputFormat]) -> Result<RunOutput> {
    let s = cfg.state_section()?;
    let cat = s.cat.as_ref().ok_or_else(|| CavityError::config("state.cat", "section missing"))?;
    let cavity = cfg.state_spec(&s.cavity)?;
    let spec = s.grid.spec(cat.output_center());
    let noise = cat.noise();
    let map = blame("state", cat_output_wigner(&cavity, cat.eta, cat.chi_in, cat.beta, noise, &spec))?;

    let neg = negativity_metrics(&map.grid);
    let row_p = spec.center.im;
    let changes = sign_changes_along_x(&map.grid, row_p, SIGN_CHANGE_FLOOR);
    let fidelity = fidelity_condition(cat.eta, noise);
    let metadata = json!({
        "kind": "cat_demo",
        "cavity": to_value(&cavity_summary(&cavity)),
        "eta": cat.eta,
        "chi": cat.chi,
        "chi_in": to_value(&cat.chi_in),
        "beta": to_value(&cat.beta),
        "mean_photons": cat.mean_photons,
        "noise_sum": noise,
        "coupling_sum": cat.eta * cat.eta + 2.0 * cat.chi_in.norm_sqr() + cat.chi * cat.chi,
        "min_W": neg.min_value,
        "negative_volume": neg.negative_volume,
        "fidelity_condition": fidelity,
        "sign_changes": changes,
        "sign_change_row_p": map.grid.p(map.grid.row_index(row_p)),
        "sign_change_floor": SIGN_CHANGE_FLOOR,
    });
    let artifacts = grid_artifacts(cfg, &format!("{}_cat", cfg.name), &map, metadata, formats)?;
    let summary = format!(
        "{}: min W = {:.4e}, negative volume = {:.4e}, {} sign changes, fidelity condition = {:.4}",
        cfg.name, neg.min_value, neg.negative_volume, changes, fidelity
    );
    Ok(RunOutput { artifacts, summary, warnings: map.warnings })
}

/// Grid states are summarized rather than echoed in full.
fn cavity_summary(state: &StateSpec) -> Value {
    match state {
        StateSpec::Grid { grid } => json!({
            "kind": "grid",
            "resolution": grid.resolution,
            "half_extent": grid.half_extent,
            "center": to_value(&grid.center),
        }),
        other => to_value(other),
    }
}

pub fn run_wigner_map(cfg: &ScenarioConfig, formats: &[OutputFormat]) -> Result<RunOutput> {
    let s = cfg.state_section()?;
    let cavity = cfg.state_spec(&s.cavity)?;
    let channels = match s.mode {
        CouplingMode::Prescribed => cfg.prescribed_channels()?,
        CouplingMode::Derived => derived_channels(cfg, s)?,
    };
    let spec = s.grid.spec(Complex64::new(0.0, 0.0));
    let map = blame("state", output_wigner(&cavity, &channels, &spec))?;
    let neg = negativity_metrics(&map.grid);
    let couplings: Vec<Value> = channels
        .couplings
        .iter()
        .map(|c| json!({ "channel": c.channel, "chi": to_value(&c.chi), "state": cavity_summary(&c.state) }))
        .collect();
    let metadata = json!({
        "kind": "wigner_map",
        "mode": to_value(&channels.mode),
        "cavity": cavity_summary(&cavity),
        "eta": channels.eta,
        "couplings": couplings,
        "leftover": channels.leftover(),
        "min_W": neg.min_value,
        "negative_volume": neg.negative_volume,
    });
    let artifacts = grid_artifacts(cfg, &format!("{}_wigner", cfg.name), &map, metadata, formats)?;
    let summary = format!(
        "{}: output map on {}x{} grid, min W = {:.4e}, normalization {:.6}",
        cfg.name,
        map.grid.resolution,
        map.grid.resolution,
        neg.min_value,
        map.grid.integral()
    );
    Ok(RunOutput { artifacts, summary, warnings: map.warnings })
}
