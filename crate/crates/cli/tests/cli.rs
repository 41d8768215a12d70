use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cavity-sim"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/configs")
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV artifact, skipping the hash line and the header.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_sha256="));
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn cat_metrics(name: &str) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let o = run("cat-demo", &configs().join(format!("{name}.toml")), dir.path(), &[]);
    ok(&o);
    let m = json(&dir.path().join(format!("{name}_cat.json")));
    let grid = fs::read_to_string(dir.path().join(format!("{name}_cat.grid"))).unwrap();
    assert!(grid.starts_with("# wigner "));
    assert!(grid.lines().nth(1).unwrap().starts_with("# config_sha256 "));
    m
}

#[test]
fn fig2a_shows_negative_fringes() {
    let m = cat_metrics("fig2a");
    assert!(m["min_W"].as_f64().unwrap() < 0.0);
    assert!(m["sign_changes"].as_u64().unwrap() >= 2);
    assert!((m["normalization"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert!(m["within_bound"].as_bool().unwrap());
    assert!((m["fidelity_condition"].as_f64().unwrap() - 0.81 / (0.19 + 2e-5)).abs() < 1e-9);
}

#[test]
fn fig2b_loses_negativity() {
    let m = cat_metrics("fig2b");
    assert!(m["min_W"].as_f64().unwrap() > -0.01);
    assert!(m["sign_changes"].as_u64().unwrap() < 2);
}

#[test]
fn fig3_pair_behaves_like_fig2_pair() {
    let a = cat_metrics("fig3a");
    assert!(a["min_W"].as_f64().unwrap() < 0.0);
    assert!(a["sign_changes"].as_u64().unwrap() >= 2);
    let b = cat_metrics("fig3b");
    assert!(b["min_W"].as_f64().unwrap() > -0.01);
    assert!(b["sign_changes"].as_u64().unwrap() < 2);
}

#[test]
fn malformed_config_exits_2_naming_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[geometry]\nl = 1.0\nd = \"thin\"\nn2 = [1.5, 0.0]\n[resonance]\nk_range = [1, 2]\n").unwrap();
    let o = run("resonances", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("geometry.d"));

    fs::write(&cfg, "[geometry]\nl = 1.0\nd = 0.01\nn2 = [1.5, 0.0]\n").unwrap();
    let o = run("resonances", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("resonance.k_range"));

    let o = run("resonances", &dir.path().join("missing.toml"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unsupported_format_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("resonances", &configs().join("lossless.toml"), dir.path(), &["--format", "grid"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("format"));
}

#[test]
fn all_roots_failing_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hard.toml");
    fs::write(
        &cfg,
        "[geometry]\nl = 1.0\nd = 5e-5\nn2 = [100.0, 0.1]\n[resonance]\nk_range = [5, 6]\ntol = 1e-300\nmax_iter = 1\n",
    )
    .unwrap();
    let o = run("resonances", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn lossless_plate_has_no_absorption() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run("resonances", &configs().join("lossless.toml"), dir.path(), &[]));
    let r = json(&dir.path().join("lossless_resonances.json"));
    let modes = r["modes"].as_array().unwrap();
    assert_eq!(modes.len(), 5);
    for m in modes {
        assert_eq!(m["gamma_abs"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn spectrum_peaks_within_a_width_of_each_resonance() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run("resonances", &configs().join("reference.toml"), dir.path(), &[]));
    let r = json(&dir.path().join("reference_resonances.json"));
    let rows = csv_rows(&dir.path().join("reference_spectrum.csv"));
    for m in r["modes"].as_array().unwrap() {
        let k = m["k"].as_i64().unwrap().to_string();
        let (w_k, g_k) = (m["omega_k"].as_f64().unwrap(), m["gamma_k"].as_f64().unwrap());
        let pts: Vec<(f64, f64)> =
            rows.iter().filter(|r| r[0] == k).map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap())).collect();
        let local_max = pts
            .windows(3)
            .filter(|w| w[1].1 >= w[0].1 && w[1].1 >= w[2].1)
            .any(|w| (w[1].0 - w_k).abs() <= g_k);
        assert!(local_max, "no |D1|^-2 maximum within Γ of mode {k}");
    }
}

#[test]
fn extraction_curve_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run("extraction", &configs().join("reference.toml"), dir.path(), &[]));
    let rows = csv_rows(&dir.path().join("reference_eta.csv"));
    assert_eq!(rows.len(), 10);
    let f = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();
    let mut last = 0.0;
    for r in &rows {
        let (eta, cf) = (f(r, 2), f(r, 3));
        assert!(((eta - cf) / cf).abs() < 1e-3, "η = {eta}, closed form {cf}");
        assert!(cf >= last);
        last = cf;
    }
    let j = json(&dir.path().join("reference_extraction.json"));
    let asym = j["eta_squared_asymptote"].as_f64().unwrap();
    let end = rows.last().unwrap();
    assert!((f(end, 1) - 5.0).abs() < 1e-12);
    assert!((f(end, 3).powi(2) / asym - 1.0).abs() < 0.01);
    let chi = csv_rows(&dir.path().join("reference_chi.csv"));
    assert_eq!(chi.len(), 10 * 4 * 16);
}

#[test]
fn outputs_are_deterministic_and_carry_the_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("reference.toml");
    for d in [a.path(), b.path()] {
        ok(&run("resonances", &cfg, d, &[]));
        ok(&run("extraction", &cfg, d, &[]));
        ok(&run("wigner-map", &cfg, d, &["--format", "grid", "--format", "json", "--format", "csv"]));
    }
    let hash = json(&a.path().join("reference_resonances.json"))["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 8);
    for n in names {
        let x = fs::read(a.path().join(&n)).unwrap();
        let y = fs::read(b.path().join(&n)).unwrap();
        assert!(x == y, "{n:?} differs between runs");
        assert!(String::from_utf8_lossy(&x).contains(&hash), "{n:?} lacks the config hash");
    }
}

#[test]
fn wigner_map_accepts_a_grid_file_state() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run("cat-demo", &configs().join("fig2a.toml"), dir.path(), &["--format", "grid"]));
    let cfg = dir.path().join("from_grid.toml");
    fs::write(
        &cfg,
        "name = \"lossy\"\n[state]\ncavity = { kind = \"grid_file\", path = \"fig2a_cat.grid\" }\neta = 0.8\n\
         [state.grid]\ncenter = [1.8, -1.8]\nhalf_extent = 6.0\nresolution = 129\n",
    )
    .unwrap();
    let o = run("wigner-map", &cfg, dir.path(), &[]);
    ok(&o);
    let m = json(&dir.path().join("lossy_wigner.json"));
    assert!((m["normalization"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert!(m["within_bound"].as_bool().unwrap());
}
