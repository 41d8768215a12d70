//! Python bindings: resonances, extraction couplings, closed-form Wigner
//! functions and the scenario runner.

use std::path::PathBuf;

use cavity_states::cli_runner::{self, Command, ScenarioConfig};
use cavity_states::extraction::{extract, BasisKind, ExtractionSettings};
use cavity_states::layered_optics::CavityGeometry;
use cavity_states::resonances::{locate_resonance, ResonanceOptions, ResonantMode};
use cavity_states::states_wigner::{self, GridSpec, SqueezeAxis, StateSpec};
use cavity_states::CavityError;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: CavityError) -> PyErr {
    if cli_runner::exit_code(&e) == 2 {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn geometry(l: f64, d: f64, n1: Complex64, n2: Complex64) -> PyResult<CavityGeometry> {
    CavityGeometry::uniform(l, d, n1, n2).map_err(to_py)
}

fn mode_dict<'py>(py: Python<'py>, m: &ResonantMode) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("k", m.k)?;
    d.set_item("omega_k", m.omega_k)?;
    d.set_item("gamma_k", m.gamma_k)?;
    d.set_item("Omega_k", m.omega_complex)?;
    d.set_item("interval", m.interval)?;
    d.set_item("T_k", m.t_k)?;
    d.set_item("T_k_out", m.t_k_out)?;
    d.set_item("gamma_rad", m.gamma_rad)?;
    d.set_item("gamma_rad_out", m.gamma_rad_out)?;
    d.set_item("gamma_abs", m.gamma_abs)?;
    d.set_item("closure_residual", m.closure_residual)?;
    d.set_item("valid", m.valid)?;
    Ok(d)
}

/// Resonance k of a cavity of length l closed by a plate of thickness d.
#[pyfunction]
#[pyo3(signature = (l, d, n1, n2, k))]
fn resonance<'py>(py: Python<'py>, l: f64, d: f64, n1: Complex64, n2: Complex64, k: i64) -> PyResult<Bound<'py, PyDict>> {
    let geom = geometry(l, d, n1, n2)?;
    let m = locate_resonance(&geom, k, &ResonanceOptions::default()).map_err(to_py)?;
    mode_dict(py, &m)
}

/// η(t), its closed form, the residual 1 − η² − Σ|χ|² and the couplings χ per channel.
#[pyfunction]
#[pyo3(signature = (l, d, n1, n2, k, t, quad_order = 128, basis = "svd", basis_size = 16))]
#[allow(clippy::too_many_arguments)]
fn extraction<'py>(
    py: Python<'py>,
    l: f64,
    d: f64,
    n1: Complex64,
    n2: Complex64,
    k: i64,
    t: f64,
    quad_order: usize,
    basis: &str,
    basis_size: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let geom = geometry(l, d, n1, n2)?;
    let mode = locate_resonance(&geom, k, &ResonanceOptions::default()).map_err(to_py)?;
    let basis = match basis {
        "svd" => BasisKind::Svd,
        "legendre" => BasisKind::Legendre,
        "grid" => BasisKind::Grid,
        other => return Err(PyValueError::new_err(format!("unknown basis {other:?}"))),
    };
    let settings = ExtractionSettings { t, quad_order, basis, basis_size, ..Default::default() };
    let r = extract(&mode, &settings).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("eta", r.eta)?;
    out.set_item("eta_closed_form", r.eta_closed_form)?;
    out.set_item("residual", r.residual)?;
    let chi = PyDict::new(py);
    for (ch, v) in &r.chi {
        chi.set_item(ch.name(), v.clone())?;
    }
    out.set_item("chi", chi)?;
    out.set_item("warnings", r.warnings.clone())?;
    Ok(out)
}

fn state_from(kind: &str, amplitude: Complex64, mean_photons: f64, squeeze: f64, photons: u32, axis: &str) -> PyResult<StateSpec> {
    let axis = match axis {
        "p" => SqueezeAxis::P,
        "x" => SqueezeAxis::X,
        other => return Err(PyValueError::new_err(format!("unknown squeeze axis {other:?}"))),
    };
    let s = match kind {
        "vacuum" => StateSpec::Vacuum,
        "coherent" => StateSpec::Coherent { amplitude },
        "thermal" => StateSpec::Thermal { mean_photons },
        "squeezed_number" => StateSpec::SqueezedNumber { squeeze, photons, axis },
        other => return Err(PyValueError::new_err(format!("unknown state kind {other:?}"))),
    };
    s.validate().map_err(to_py)?;
    Ok(s)
}

/// Closed-form Wigner function W(α) of a single-mode state.
#[pyfunction]
#[pyo3(signature = (kind, alpha, amplitude = Complex64::new(0.0, 0.0), mean_photons = 0.0, squeeze = 0.0, photons = 0, axis = "p"))]
fn wigner(
    kind: &str,
    alpha: Complex64,
    amplitude: Complex64,
    mean_photons: f64,
    squeeze: f64,
    photons: u32,
    axis: &str,
) -> PyResult<f64> {
    Ok(state_from(kind, amplitude, mean_photons, squeeze, photons, axis)?.wigner(alpha))
}

/// Output Wigner grid of the cat scheme for a squeezed number state in the
/// cavity. Returns metrics and the grid as a list of rows of constant p.
#[pyfunction]
#[pyo3(signature = (squeeze, photons, eta, chi, chi_in, beta, mean_photons, half_extent = 6.0, resolution = 257))]
#[allow(clippy::too_many_arguments)]
fn cat_output<'py>(
    py: Python<'py>,
    squeeze: f64,
    photons: u32,
    eta: f64,
    chi: f64,
    chi_in: Complex64,
    beta: Complex64,
    mean_photons: f64,
    half_extent: f64,
    resolution: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cavity = StateSpec::squeezed_number(squeeze, photons);
    let noise = 2.0 * mean_photons * chi * chi;
    let center = beta * chi_in.conj() * Complex64::new(1.0, -1.0);
    let spec = GridSpec::new(center, half_extent, resolution);
    let map = states_wigner::cat_output_wigner(&cavity, eta, chi_in, beta, noise, &spec).map_err(to_py)?;
    let g = &map.grid;
    let neg = states_wigner::negativity_metrics(g);
    let out = PyDict::new(py);
    out.set_item("min_W", neg.min_value)?;
    out.set_item("negative_volume", neg.negative_volume)?;
    out.set_item("fidelity_condition", states_wigner::fidelity_condition(eta, noise))?;
    out.set_item(
        "sign_changes",
        states_wigner::sign_changes_along_x(g, center.im, cli_runner::SIGN_CHANGE_FLOOR),
    )?;
    out.set_item("normalization", g.integral())?;
    out.set_item("center", g.center)?;
    out.set_item("half_extent", g.half_extent)?;
    let rows: Vec<Vec<f64>> = g.values.chunks(g.resolution).map(<[f64]>::to_vec).collect();
    out.set_item("values", rows)?;
    out.set_item("warnings", map.warnings.clone())?;
    Ok(out)
}

#[pyfunction]
fn fidelity_condition(eta: f64, noise_sum: f64) -> f64 {
    states_wigner::fidelity_condition(eta, noise_sum)
}

/// Runs a scenario file like the command-line tool and returns the summary,
/// warnings and written paths.
#[pyfunction]
#[pyo3(signature = (command, config, out = None))]
fn run_scenario<'py>(py: Python<'py>, command: &str, config: PathBuf, out: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let cmd = match command {
        "resonances" => Command::Resonances,
        "extraction" => Command::Extraction,
        "cat-demo" => Command::CatDemo,
        "wigner-map" => Command::WignerMap,
        other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    };
    let cfg = ScenarioConfig::from_path(&config).map_err(to_py)?;
    let result = py.detach(|| cli_runner::run(cmd, &cfg, &[])).map_err(to_py)?;
    let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
    let written = cli_runner::write_artifacts(&dir, &result).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("summary", result.summary.clone())?;
    d.set_item("warnings", result.warnings.clone())?;
    d.set_item("files", written)?;
    d.set_item("config_hash", cfg.hash.clone())?;
    Ok(d)
}

#[pymodule]
fn pycavity(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(resonance, m)?)?;
    m.add_function(wrap_pyfunction!(extraction, m)?)?;
    m.add_function(wrap_pyfunction!(wigner, m)?)?;
    m.add_function(wrap_pyfunction!(cat_output, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_condition, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
