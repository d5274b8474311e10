use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_jjosc");

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/spiral_device.toml")
}

fn jjosc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("JJOSC_THREADS").output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn manifest(out: &Path) -> Value {
    let mut p = out.as_os_str().to_os_string();
    p.push(".manifest.json");
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const UNIT_SUFFIXES: [&str; 18] = [
    "_a", "_v", "_hz", "_w", "_s", "_rad", "_c", "_f", "_ohm", "_ratio", "_rad_per_s", "_v2_per_hz", "_a2_per_hz",
    "_w_per_hz", "_rad2", "region", "flag", "operation",
];

fn assert_unit_headers(header: &[String]) {
    for h in header {
        assert!(
            UNIT_SUFFIXES.iter().any(|s| h.ends_with(s)) || h == "locked",
            "column `{h}` has no unit suffix"
        );
    }
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

#[test]
fn sweep_bias_step_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let c = config();
    ok(&jjosc(&["sweep-bias", "--config", c.to_str().unwrap(), "--ib", "0e-6:25e-6:0.1e-6", "--out", out.to_str().unwrap()]));
    let (header, rows) = read_csv(&out);
    assert_unit_headers(&header);
    assert_eq!(rows.len(), 251);
    let (ib, region, f) = (col(&header, "ib_a"), col(&header, "region"), col(&header, "f_emit_hz"));
    let step: Vec<f64> = rows.iter().filter(|r| r[region] == "ShapiroStep").map(|r| r[ib].parse().unwrap()).collect();
    let (lo, hi) = (step[0], *step.last().unwrap());
    assert!(lo > 11.5e-6 && lo < 13.5e-6 && (hi - 18e-6).abs() < 0.2e-6, "{lo} {hi}");
    for r in rows.iter().filter(|r| r[region] != "ShapiroStep") {
        assert!(r[f].is_empty());
    }
    // 17 significant digits
    let mantissa = rows[5][ib].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);

    let m = manifest(&out);
    assert_eq!(m["command"], "sweep-bias");
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["tool_version"], env!("CARGO_PKG_VERSION"));
    assert!(m["started_utc"].as_str().unwrap().ends_with('Z'));
    assert_eq!(m["rows"], 251);
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 2, "temporary files left behind: {names:?}");
}

#[test]
fn empty_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let c = config();
    let o = jjosc(&["sweep-bias", "--config", c.to_str().unwrap(), "--ib", "5e-6:1e-6:1e-6", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let rec: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(rec["error"], "ConfigParse");
    assert!(!out.exists());
}

#[test]
fn config_errors_are_path_qualified() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(config()).unwrap().replace("cs_f = 1.92e-10", "cs_f = 0.0");
    std::fs::write(&bad, text).unwrap();
    let out = dir.path().join("x.csv");
    let o = jjosc(&["operating-point", "--config", bad.to_str().unwrap(), "--ib", "16e-6", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("junction.cs_f"));

    let o = jjosc(&["operating-point", "--config", "/no/such/file.toml", "--ib", "16e-6", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));

    // bias outside the step is a numeric failure
    let c = config();
    let o = jjosc(&["operating-point", "--config", c.to_str().unwrap(), "--ib", "22e-6", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn design_optimize_inverts_the_power_formula() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    ok(&jjosc(&["design-optimize", "--target-power", "28e-12", "--freq", "5.35e9", "--cs", "192e-12", "--out", out.to_str().unwrap()]));
    let (header, rows) = read_csv(&out);
    assert_unit_headers(&header);
    let v = |name: &str| -> f64 { rows[0][col(&header, name)].parse().unwrap() };
    let phi0 = 2.067_833_848_461_929e-15;
    let ic = 28e-12 / (0.581_865_2 * phi0 * 5.35e9);
    assert!((v("required_ic_a") / ic - 1.0).abs() < 1e-6);
    assert!((v("max_power_w") / 28e-12 - 1.0).abs() < 1e-9);
    // r1 = hbar omega <I_J> / (e I1^2) with <I_J> = max|J1| Ic and I1 = x* Phi0 omega^2 Cs / 2 pi
    let omega = 2.0 * std::f64::consts::PI * 5.35e9;
    let expect = 4.0 * 0.581_865_2 / 1.841_183_8f64.powi(2) * std::f64::consts::PI * ic
        / (phi0 * omega.powi(3) * 192e-12f64.powi(2));
    assert!((v("optimal_r1_ohm") / expect - 1.0).abs() < 1e-5, "{} {expect}", v("optimal_r1_ohm"));
}

#[test]
fn rerun_reproduces_noise_free_outputs_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dev.toml");
    std::fs::copy(config(), &cfg).unwrap();
    let out = dir.path().join("trace.csv");
    ok(&jjosc(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--ib", "16.5e-6", "--duration", "0.2e-6", "--temperature", "0",
        "--decimate", "10", "--out", out.to_str().unwrap(),
    ]));
    let first = std::fs::read(&out).unwrap();
    let (header, rows) = read_csv(&out);
    assert_unit_headers(&header);
    assert_eq!(rows.len(), 1001);
    let mpath = dir.path().join("trace.csv.manifest.json");
    let m = manifest(&out);
    assert!(m["seed"].is_null());
    assert!(m["results"]["steady_state"]["f_emit_hz"].as_f64().unwrap() > 5.3e9);

    std::fs::remove_file(&out).unwrap();
    ok(&jjosc(&["rerun", "--manifest", mpath.to_str().unwrap()]));
    assert_eq!(std::fs::read(&out).unwrap(), first);

    let edited = std::fs::read_to_string(&cfg).unwrap().replace("temperature_k = 0.015", "temperature_k = 0.02");
    std::fs::write(&cfg, edited).unwrap();
    let o = jjosc(&["rerun", "--manifest", mpath.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn noisy_runs_follow_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let c = config();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        ok(&jjosc(&[
            "simulate", "--config", c.to_str().unwrap(), "--ib", "16.5e-6", "--duration", "0.05e-6", "--temperature", "0.1",
            "--decimate", "10", "--seed", seed, "--out", out.to_str().unwrap(),
        ]));
        assert_eq!(manifest(&out)["seed"].as_u64().unwrap().to_string(), seed);
        std::fs::read(out).unwrap()
    };
    let a = run("7", "a.csv");
    let b = run("7", "b.csv");
    let c2 = run("8", "c.csv");
    assert_eq!(a, b);
    assert_ne!(a, c2);
}

#[test]
fn spectrum_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let c = config();
    ok(&jjosc(&[
        "spectrum", "--config", c.to_str().unwrap(), "--ib", "16.5e-6", "--duration", "1e-6", "--temperature", "0",
        "--band", "5.2e9:5.5e9", "--fit", "gaussian", "--out", out.to_str().unwrap(),
    ]));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["f_hz", "psd_w_per_hz"]);
    assert!(rows.len() > 10);
    let m = manifest(&out);
    let center = m["results"]["fit"]["center_hz"].as_f64().unwrap();
    let rbw = m["results"]["rbw_hz"].as_f64().unwrap();
    assert!((center - 5.3474e9).abs() < rbw, "{center}");
}

#[test]
fn fidelity_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    ok(&jjosc(&["fidelity", "--tau", "1e-3:1e-2:x10", "--out", out.to_str().unwrap()]));
    let (header, rows) = read_csv(&out);
    assert_unit_headers(&header);
    assert_eq!(rows.len(), 6);
    let inf = col(&header, "infidelity_ratio");
    for r in &rows {
        let v: f64 = r[inf].parse().unwrap();
        assert!(v > 2e-4 && v < 5e-3, "{r:?}");
    }
    let o = jjosc(&["fidelity", "--anchors", "1e6:-90,1e5:-80", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = jjosc(&["fidelity", "--ops", "hadamard", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn adler_fit_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    let k = 3e11;
    let mut text = String::from("p_inj_dbm,lock_range_hz\n");
    for dbm in [-100.0, -94.0, -88.0, -80.0f64] {
        let p = 1e-3 * 10f64.powf(dbm / 10.0);
        text.push_str(&format!("{dbm},{}\n", k * p.sqrt()));
    }
    std::fs::write(&input, text).unwrap();
    let out = dir.path().join("fit.csv");
    ok(&jjosc(&["adler-fit", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let m = manifest(&out);
    assert!((m["results"]["k_hz_per_sqrt_w"].as_f64().unwrap() / k - 1.0).abs() < 1e-9);
    assert!(m["results"]["r2"].as_f64().unwrap() > 0.999_999);
    std::fs::write(&input, "p_inj_w,width\n1,2\n").unwrap();
    let o = jjosc(&["adler-fit", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn injection_map_locks_at_the_free_running_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("map.csv");
    let spectra = dir.path().join("spectra.csv");
    let c = config();
    ok(&jjosc(&[
        "injection-map", "--config", c.to_str().unwrap(), "--ib", "16.5e-6", "--p-inj-dbm", "-60", "--f-offset",
        "-2e6:2e6:1e6", "--duration", "6e-6", "--temperature", "0", "--out", out.to_str().unwrap(), "--spectra",
        spectra.to_str().unwrap(),
    ]));
    let (header, rows) = read_csv(&out);
    assert_unit_headers(&header);
    let locked: Vec<&str> = rows.iter().map(|r| r[col(&header, "locked")].as_str()).collect();
    assert_eq!(locked, ["0", "0", "1", "0", "0"]);
    let m = manifest(&out);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    let (sh, srows) = read_csv(&spectra);
    assert_unit_headers(&sh);
    assert!(!srows.is_empty());
}

#[test]
fn thread_cap_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let o = Command::new(BIN)
        .args(["fidelity", "--tau", "1e-3", "--out", out.to_str().unwrap()])
        .env("JJOSC_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(BIN)
        .args(["fidelity", "--tau", "1e-3", "--out", out.to_str().unwrap()])
        .env("JJOSC_THREADS", "1")
        .output()
        .unwrap();
    ok(&o);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = jjosc(&["fidelity", "--tau", "1e-3", "--out", blocker.join("f.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}
