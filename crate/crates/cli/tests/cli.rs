use std::path::Path;
use std::process::{Command, Output};

fn catsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("CATQ_KAPPA_B")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const PURE_LOSS: &str = r#"
[model]
rung = "one_mode"
alpha_sq = 1.0
truncations = [17]

[params]
g2 = 0.0
chi_aa = 0.0

[scan]
kind = "evolve"
initial = "coherent"
horizon = 10.0
samples = 11
observables = ["a", "n"]
"#;

#[test]
fn params_show_lists_registry_and_derived_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = catsim(dir.path(), &["params", "show"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("chi_qa = 0.72"), "{s}");
    assert!(s.contains("kappa_b = 13"), "{s}");
    let k2: f64 = s
        .lines()
        .find_map(|l| l.strip_prefix("kappa2 = "))
        .expect("derived kappa2 line")
        .parse()
        .unwrap();
    assert!((k2 - 4.0 * 0.36 * 0.36 / 13.0).abs() < 1e-12);
}

#[test]
fn params_show_json_parses() {
    let dir = tempfile::tempdir().unwrap();
    let o = catsim(dir.path(), &["params", "show", "--json", "--set", "g2=0.4"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["g2"].as_f64(), Some(0.4));
}

#[test]
fn overriding_buffer_linewidth_halves_kappa2_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    assert!(catsim(dir.path(), &["run", "c1_kappa2_chain", "--out", "base.csv"]).status.success());
    let o = catsim(dir.path(), &["run", "c1_kappa2_chain", "--out", "wide.csv", "--set", "kappa_b=26"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let base = manifest(&dir.path().join("base.csv.manifest.json"));
    let wide = manifest(&dir.path().join("wide.csv.manifest.json"));
    let k0 = base["derived"]["kappa2_mhz"].as_f64().unwrap();
    let k1 = wide["derived"]["kappa2_mhz"].as_f64().unwrap();
    assert!((k1 / k0 - 0.5).abs() < 1e-12);
    assert_eq!(wide["overrides"][0]["key"], "kappa_b");
    assert_eq!(wide["kind"], "derived");
}

#[test]
fn environment_override_matches_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_catsim"))
        .args(["params", "show"])
        .current_dir(dir.path())
        .env("CATQ_KAPPA_B", "26")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("kappa_b = 26"), "{}", stdout(&o));
}

#[test]
fn unknown_override_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let o = catsim(dir.path(), &["params", "show", "--set", "nope=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope"), "{}", stderr(&o));
}

#[test]
fn non_numeric_override_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = catsim(dir.path(), &["params", "show", "--set", "g2=fast"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = PURE_LOSS.replace("samples = 11", "samples = 11\ncolour = 3");
    std::fs::write(dir.path().join("bad.toml"), bad).unwrap();
    let o = catsim(dir.path(), &["run", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
    assert!(!dir.path().join("bad.csv").exists());
}

#[test]
fn too_small_truncation_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.toml"), PURE_LOSS.replace("[17]", "[8]")).unwrap();
    let o = catsim(dir.path(), &["validate", "s.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("truncation"), "{}", stderr(&o));
}

#[test]
fn pure_loss_amplitude_decays_at_half_kappa_a() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("loss.toml"), PURE_LOSS).unwrap();
    let o = catsim(dir.path(), &["run", "loss.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,a_re,a_im,n_re,n_im"));
    let kappa_a = 2.0 * std::f64::consts::PI * 0.053;
    let mut rows = 0;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        let (t, a, n) = (v[0], v[1], v[3]);
        assert!((a - (-kappa_a * t / 2.0).exp()).abs() < 1e-6, "t={t} a={a}");
        assert!((n - (-kappa_a * t).exp()).abs() < 1e-6, "t={t} n={n}");
        rows += 1;
    }
    assert_eq!(rows, 11);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("loss.toml"), PURE_LOSS).unwrap();
    assert!(catsim(dir.path(), &["run", "loss.toml", "--out", "a.csv"]).status.success());
    assert!(catsim(dir.path(), &["run", "loss.toml", "--out", "b.csv", "--jobs", "1"]).status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn every_builtin_validates() {
    let dir = tempfile::tempdir().unwrap();
    let list = catsim(dir.path(), &["run", "--list"]);
    assert!(list.status.success());
    let names: Vec<String> =
        stdout(&list).lines().filter_map(|l| l.split_whitespace().next().map(str::to_string)).collect();
    assert_eq!(names.len(), 12);
    for n in &names {
        let o = catsim(dir.path(), &["validate", n]);
        assert!(o.status.success(), "{n}: {}", stderr(&o));
    }
}

#[test]
fn sectioned_override_reaches_scan() {
    let dir = tempfile::tempdir().unwrap();
    let o = catsim(dir.path(), &["validate", "c9_wigner", "--set", "scan.half_extent=9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid corner"), "{}", stderr(&o));
}

#[test]
fn unknown_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = catsim(dir.path(), &["run", "no_such_thing"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wigner_scenario_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = catsim(dir.path(), &["run", "c9_wigner", "--set", "scan.resolution=11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("c9_wigner.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 11 * 11);
}
