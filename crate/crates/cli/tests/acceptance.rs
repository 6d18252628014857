//! Acceptance criteria 1-9. Runs without the libtest harness and prints one
//! line per criterion; exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use fockbridge::fock::{FockSpace, PhasePoint};
use fockbridge_cli::config::{load_value, ExperimentConfig};
use fockbridge_cli::report::RunReport;
use fockbridge_cli::suites;
use serde_json::Value;

const SEED: u64 = 20260;

type Check = Result<(bool, String), String>;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn config(name: &str) -> Result<ExperimentConfig, String> {
    let v = load_value(&config_path(name)).map_err(|e| e.to_string())?;
    ExperimentConfig::from_value(&v).map_err(|e| e.to_string())
}

fn summarize(report: &RunReport) -> (bool, String) {
    let failed: Vec<String> = report
        .failures()
        .iter()
        .map(|a| format!("{}={:.3e} (limit {:.1e})", a.name, a.value, a.tolerance))
        .collect();
    let detail = if failed.is_empty() {
        format!("{} assertions", report.assertions.len())
    } else {
        format!("failed: {}", failed.join(", "))
    };
    (report.passed(), detail)
}

fn value_of(report: &RunReport, name: &str) -> f64 {
    report.assertions.iter().find(|a| a.name == name).map_or(f64::NAN, |a| a.value)
}

fn criterion(n: usize, limit_secs: f64, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = f();
    let secs = start.elapsed().as_secs_f64();
    let (ok, detail) = match outcome {
        Ok((ok, d)) => (ok && secs < limit_secs, d),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "criterion {n}: {} | {detail} | {secs:.2}s (limit {limit_secs}s)",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn ccr_suite() -> Check {
    let ccr = (1..=3).map(suites::ccr_residual).try_fold(0.0f64, |m, r| r.map(|r| m.max(r))).map_err(|e| e.to_string())?;
    let power = suites::power_rule_residual(5).map_err(|e| e.to_string())?;
    Ok((ccr == 0.0 && power == 0.0, format!("ccr n<=3 {ccr:e}, power rule m<=5 {power:e}")))
}

fn bracket_suite() -> Check {
    let s = suites::bracket_suite(SEED, 2, 4, 100).map_err(|e| e.to_string())?;
    Ok((
        s.max_residual == 0.0 && s.nonzero_residuals == 0,
        format!("{} trials, max residual {:e}, nonzero {}", s.trials, s.max_residual, s.nonzero_residuals),
    ))
}

fn coherent_eigen() -> Check {
    let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let one = FockSpace::new(1, 30).map_err(|e| e.to_string())?;
    let two = FockSpace::new(2, 30).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for &phi in &grid {
        for &pi in &grid {
            let p = PhasePoint { phi: vec![phi], pi: vec![pi] };
            worst = worst.max(suites::coherent_eigen_residual(one, &p).map_err(|e| e.to_string())?);
        }
    }
    for (phi, pi) in [([1.0, -1.0], [1.0, 1.0]), ([0.3, -0.7], [-1.0, 0.5])] {
        let p = PhasePoint { phi: phi.to_vec(), pi: pi.to_vec() };
        worst = worst.max(suites::coherent_eigen_residual(two, &p).map_err(|e| e.to_string())?);
    }
    Ok((worst <= 1e-8, format!("max residual {worst:.3e} at cutoff 30")))
}

fn trace_identities() -> Check {
    let worst = suites::trace_identity_trials(SEED, 50, 30).map_err(|e| e.to_string())?;
    Ok((worst <= 1e-7, format!("50 pairs, max residual {worst:.3e}")))
}

fn harmonic() -> Check {
    let cfg = config("harmonic.toml")?;
    let evolve = cfg.evolve.clone().ok_or("harmonic config has no evolve block")?;
    if cfg.cutoff != Some(40) || evolve.dt != 1e-3 || evolve.t_max != 10.0 {
        return Err("harmonic config does not match cutoff 40, dt 1e-3, t_max 10".into());
    }
    let r = suites::run_compare(&cfg).map_err(|e| e.to_string())?;
    let gap = value_of(&r, "max_gap");
    let (ok, detail) = summarize(&r);
    Ok((ok && gap <= 1e-5, format!("max gap {gap:.3e}; {detail}")))
}

fn quartic() -> Check {
    let cfg = config("quartic.toml")?;
    let r = suites::run_compare(&cfg).map_err(|e| e.to_string())?;
    let inst = value_of(&r, "instantaneous_identity");
    let order3 = r.results["derivative_residuals"]["phi1"]
        .as_array()
        .and_then(|rows| rows.iter().find(|row| row["order"] == 3))
        .and_then(|row| row["residual"].as_f64());
    let (ok, detail) = summarize(&r);
    Ok((
        ok,
        format!(
            "instantaneous {inst:.3e}, order-3 gap {}; {detail}",
            order3.map_or("n/a".to_string(), |v| format!("{v:.3e}"))
        ),
    ))
}

fn appendix_a() -> Check {
    let cfg = config("appendix_a.toml")?;
    if cfg.cutoff != Some(24) {
        return Err("appendix-a config must use cutoff 24".into());
    }
    let r = suites::run_appendix_a(&cfg).map_err(|e| e.to_string())?;
    Ok(summarize(&r))
}

fn lattice() -> Check {
    let cfg = config("lattice.toml")?;
    let r = suites::run_lattice(&cfg).map_err(|e| e.to_string())?;
    let (ok, detail) = summarize(&r);
    Ok((
        ok,
        format!(
            "calibration {:.2e}, dispersion {:.2e}; {detail}",
            value_of(&r, "calibration_residual"),
            value_of(&r, "dispersion")
        ),
    ))
}

fn run_to_bytes(dir: &std::path::Path, sub: &str, cfg: &str, tag: &str) -> Result<Vec<u8>, String> {
    let out = dir.join(format!("{sub}-{tag}.json"));
    let path = config_path(cfg);
    let code = fockbridge_cli::run([
        "fockbridge",
        sub,
        "--config",
        path.to_str().ok_or("non-utf8 path")?,
        "--out",
        out.to_str().ok_or("non-utf8 path")?,
    ]);
    if code != 0 {
        return Err(format!("{sub} exited {code}"));
    }
    std::fs::read(&out).map_err(|e| e.to_string())
}

fn reproducibility() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut identical = true;
    for (sub, cfg) in [("compare", "harmonic.toml"), ("encode", "encode.toml"), ("lattice", "lattice.toml")] {
        identical &= run_to_bytes(dir.path(), sub, cfg, "a")? == run_to_bytes(dir.path(), sub, cfg, "b")?;
    }
    let compare: Value = serde_json::from_slice(&run_to_bytes(dir.path(), "compare", "harmonic.toml", "c")?)
        .map_err(|e| e.to_string())?;
    let lattice: Value = serde_json::from_slice(&run_to_bytes(dir.path(), "lattice", "lattice.toml", "c")?)
        .map_err(|e| e.to_string())?;
    let rk4 = compare["results"]["rk4_halving_ratio"].as_f64().unwrap_or(f64::NAN);
    let lf = lattice["results"]["leapfrog"]["halving_ratio"].as_f64().unwrap_or(f64::NAN);
    let ok = identical && (8.0..=32.0).contains(&rk4) && (2.0..=8.0).contains(&lf);
    Ok((ok, format!("byte-identical {identical}, rk4 ratio {rk4:.3}, leapfrog ratio {lf:.3}")))
}

fn main() {
    let results = [
        criterion(1, 5.0, ccr_suite),
        criterion(2, 30.0, bracket_suite),
        criterion(3, 5.0, coherent_eigen),
        criterion(4, 120.0, trace_identities),
        criterion(5, 120.0, harmonic),
        criterion(6, 120.0, quartic),
        criterion(7, 300.0, appendix_a),
        criterion(8, 300.0, lattice),
        criterion(9, 600.0, reproducibility),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
