use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ncpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncpt")).args(args).current_dir(root()).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn model_info() {
    let o = ncpt(&["model-info", "models/z4.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("ℓ = [0.0, 2.0, 4.0, 2.0]"), "{}", stdout(&o));

    let o = ncpt(&["model-info", "models/torus5.json"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("twist: (1, 5)"));

    let o = ncpt(&["model-info", "models/z4_negative_control.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cnd"));
}

#[test]
fn malformed_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"kind\": \"twisted_group\",\n \"orders\": [4,\n").unwrap();
    let o = ncpt(&["model-info", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    assert_eq!(ncpt(&["model-info", "models/missing.json"]).status.code(), Some(2));
    assert_eq!(ncpt(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(ncpt(&["gamma", "models/z4.json", "--element", "[[0,0],[1,0]]"]).status.code(), Some(2));
    assert_eq!(ncpt(&["suite", "configs/z4.json", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(ncpt(&["suite", "configs/z4.json", "--tol", "markovian"]).status.code(), Some(2));
}

#[test]
fn zero_threads_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_ncpt"))
        .args(["model-info", "models/z4.json"])
        .env("NCPT_THREADS", "0")
        .current_dir(root())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn potential_of_the_trivial_character() {
    let o = ncpt(&["potential", "models/z4.json", "--trivial-character"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert!((v["energy_content"].as_f64().unwrap() - 28.0 / 15.0).abs() < 1e-12);
    assert_eq!(v["is_potential"], true);

    let o = ncpt(&["potential", "models/z4.json", "--zero"]);
    let v = json(&o);
    assert_eq!(v["energy_content"].as_f64(), Some(0.0));
    for c in v["potential"].as_array().unwrap() {
        assert_eq!(c[0].as_f64(), Some(0.0));
        assert_eq!(c[1].as_f64(), Some(0.0));
    }

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = ncpt(&["potential", "models/z4.json", "--functional", "functionals/z4_trace.json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("potential.json")).unwrap()).unwrap();
    assert!((v["energy_content"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(out.join("potential.csv").exists());
}

#[test]
fn deny_gamma_and_multipliers() {
    let dir = tempfile::tempdir().unwrap();
    let o = ncpt(&["deny", "models/z4.json", "--trivial-character", "--trials", "50", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(json(&o)["saturation_gap"].as_f64().unwrap() < 1e-8);

    let o = ncpt(&["gamma", "models/z4.json", "--element", "[[0,0],[1,0],[0,0],[0,0]]"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert!((v["mass"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(v["cross_route_residual"].as_f64().unwrap() < 1e-10);

    let o = ncpt(&["gamma", "models/torus5.json", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = ncpt(&["mult-norm", "models/z4.json", "--trivial-character", "--trials", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["pass"], true);
    assert!(v["left_norm"].as_f64().unwrap() <= v["norm_bound"].as_f64().unwrap());
}

fn report_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "metadata.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn suite_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = ncpt(&["suite", "configs/z4.json", "--trials", "100", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let (fa, fb) = (report_files(&a), report_files(&b));
    assert!(fa.iter().any(|(n, _)| n == "summary.csv"));
    assert!(fa.iter().any(|(n, _)| n == "markovian.json"));
    assert_eq!(fa, fb);
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(a.join("metadata.json")).unwrap()).unwrap();
    assert!(meta["errors"].as_object().unwrap().is_empty());
    assert!(!dir.path().read_dir().unwrap().any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn negative_control_suite_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = ncpt(&["suite", "configs/z4_negative_control.json", "--trials", "50", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("markovian"), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("markovian,") && l.ends_with(",false")), "{summary}");
}
