use std::path::{Path, PathBuf};

use fockbridge_cli::run;
use serde_json::Value;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_args(args: &[&str]) -> i32 {
    run(std::iter::once("fockbridge").chain(args.iter().copied()))
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn verify_algebra_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("algebra.json");
    let code = run_args(&[
        "verify-algebra",
        "--modes",
        "2",
        "--max-degree",
        "4",
        "--trials",
        "100",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r = read_json(&out);
    assert_eq!(r["passed"], true);
    assert_eq!(r["seed"], 7);
    assert_eq!(r["results"]["trials"], 100);
    assert_eq!(r["results"]["bracket_nonzero_residuals"], 0);
}

#[test]
fn harmonic_compare_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("compare.json");
    let cfg = configs().join("harmonic.toml");
    assert_eq!(run_args(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let r = read_json(&out);
    let gap = r["results"]["gaps"]["max"].as_f64().unwrap();
    assert!(gap <= 1e-5, "{gap}");
    assert_eq!(r["results"]["times"].as_array().unwrap().len(), 101);
}

#[test]
fn compare_csv_has_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("compare.json");
    let cfg = configs().join("harmonic.toml");
    let code = run_args(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--t-max",
        "1",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("t,"));
    assert_eq!(lines.len(), 12);
}

#[test]
fn malformed_weights_report_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "seed = 1\nhamiltonian = \"0.5*pi1^2 + 0.5*phi1^2\"\n[system]\nmodes = 1\ncutoff = 20\n\
         [ensemble]\npoints = [{ phi = [0.1], pi = [0.0] }, { phi = [0.2], pi = [0.0] }]\nweights = [0.5, 0.6]\n",
    )
    .unwrap();
    let out = dir.path().join("bad.json");
    assert_eq!(run_args(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    let r = read_json(&out);
    assert_eq!(r["passed"], false);
    assert_eq!(r["results"]["pointer"], "/ensemble/weights");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "seed = 1\n[system]\nmodes = 1\ncutof = 20\n").unwrap();
    let out = dir.path().join("typo.json");
    assert_eq!(run_args(&["encode", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert_eq!(read_json(&out)["results"]["pointer"], "/system/cutof");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run_args(&["no-such-command"]), 2);
    assert_eq!(run_args(&["compare", "--format", "xml"]), 2);
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("encode.toml");
    let mut bytes = Vec::new();
    for tag in ["a", "b"] {
        let out = dir.path().join(format!("{tag}.json"));
        assert_eq!(run_args(&["encode", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
        bytes.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn seed_override_changes_sampled_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("encode.toml");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(run_args(&["encode", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]), 0);
    assert_eq!(
        run_args(&["encode", "--config", cfg.to_str().unwrap(), "--seed", "8", "--out", b.to_str().unwrap()]),
        0
    );
    let (a, b) = (read_json(&a), read_json(&b));
    assert_eq!(b["seed"], 8);
    assert_ne!(a["results"]["traces"], b["results"]["traces"]);
}

#[test]
fn tail_refusal_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tail.toml");
    std::fs::write(
        &cfg,
        "seed = 1\nhamiltonian = \"0.5*pi1^2 + 0.5*phi1^2\"\n[system]\nmodes = 1\ncutoff = 4\n\
         [ensemble]\npoints = [{ phi = [2.0], pi = [1.0] }]\n",
    )
    .unwrap();
    let out = dir.path().join("tail.json");
    let code = run_args(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_ne!(code, 0);
    let r = read_json(&out);
    assert_eq!(r["passed"], false);
    assert!(!r["error"].as_str().unwrap().is_empty());
}
