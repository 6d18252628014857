//! Batch experiment runner: config in, deterministic report out.
//!
//! Exit codes: 0 when every assertion passes, 1 when an assertion or a
//! numerical guard fails, 2 for usage, config and truncation-budget errors.

pub mod config;
pub mod report;
pub mod sampler;
pub mod suites;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::{ConfigError, ExperimentConfig};
use report::RunReport;
use suites::SuiteError;

#[derive(Parser, Debug)]
#[command(name = "fockbridge", version, about = "Classical ensembles in Fock space: verification runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Commutation relations and bracket identities on random polynomials.
    VerifyAlgebra {
        #[command(flatten)]
        common: Common,
        /// Largest total degree of the random polynomials.
        #[arg(long)]
        max_degree: Option<usize>,
        /// Number of random polynomials.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Coherent encodings, density matrix and trace identities.
    Encode {
        #[command(flatten)]
        common: Common,
    },
    /// Classical ensemble against Heisenberg evolution.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Expanded (a, b) space: reification, gain and energy operators.
    AppendixA {
        #[command(flatten)]
        common: Common,
    },
    /// Lattice fields: calibration, field operators, leapfrog.
    Lattice {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML config (JSON if the extension is .json).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report path; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// csv: per-sample trajectory table for compare, assertion table otherwise.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub modes: Option<usize>,
    /// Per-mode occupation cutoff.
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn load(common: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut value = match &common.config {
        Some(p) => config::load_value(p)?,
        None => json!({}),
    };
    let obj = value.as_object_mut().ok_or_else(|| ConfigError { pointer: String::new(), message: "expected a table".into() })?;
    if let Some(s) = common.seed {
        obj.insert("seed".into(), json!(s));
    }
    if common.modes.is_some() || common.cutoff.is_some() {
        let sys = obj.entry("system").or_insert_with(|| json!({}));
        if let Some(m) = common.modes {
            sys["modes"] = json!(m);
        }
        if let Some(c) = common.cutoff {
            sys["cutoff"] = json!(c);
        }
    }
    if common.t_max.is_some() || common.dt.is_some() {
        let ev = obj.entry("evolve").or_insert_with(|| json!({}));
        if let Some(t) = common.t_max {
            ev["t_max"] = fockbridge::format::json_number(t);
        }
        if let Some(d) = common.dt {
            ev["dt"] = fockbridge::format::json_number(d);
        }
    }
    ExperimentConfig::from_value(&value)
}

fn exit_code_for(e: &fockbridge::Error) -> i32 {
    use fockbridge::Error as E;
    match e {
        E::TranscriptionGuard { .. }
        | E::IllConditioned { .. }
        | E::NonEquilibrium { .. }
        | E::Unstable(_)
        | E::NoConvergence { .. }
        | E::NonHermitian { .. }
        | E::NonFiniteState { .. } => 1,
        _ => 2,
    }
}

fn emit(report: &RunReport, common: &Common, format: Format) -> std::io::Result<()> {
    let text = match format {
        Format::Json => report.to_json_string(),
        Format::Csv => {
            if let Some(csv) = report.results.get("csv").and_then(|v| v.as_str()) {
                csv.to_string()
            } else {
                report.assertions_csv()
            }
        }
    };
    match &common.out {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

/// Runs a parsed command and returns the exit code.
pub fn execute(cli: Cli) -> i32 {
    let (name, common) = match &cli.command {
        Command::VerifyAlgebra { common, .. } => ("verify-algebra", common),
        Command::Encode { common } => ("encode", common),
        Command::Compare { common } => ("compare", common),
        Command::AppendixA { common } => ("appendix-a", common),
        Command::Lattice { common } => ("lattice", common),
    };
    let mut cfg = match load(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            let mut r = RunReport::new(name, common.seed, json!(null));
            r.error = Some(e.to_string());
            r.results = json!({ "pointer": e.pointer });
            let _ = emit(&r, common, Format::Json);
            return 2;
        }
    };
    if let Command::VerifyAlgebra { max_degree, trials, .. } = &cli.command {
        if let Some(d) = max_degree {
            cfg.algebra.max_degree = *d;
        }
        if let Some(t) = trials {
            cfg.algebra.trials = *t;
        }
    }
    let outcome = match name {
        "verify-algebra" => suites::run_verify_algebra(&cfg),
        "encode" => suites::run_encode(&cfg),
        "compare" => suites::run_compare(&cfg),
        "appendix-a" => suites::run_appendix_a(&cfg),
        _ => suites::run_lattice(&cfg),
    };
    let (report, code) = match outcome {
        Ok(mut r) => {
            if name == "compare" && common.format == Format::Csv {
                if let Some(csv) = compare_csv(&cfg) {
                    r.results["csv"] = json!(csv);
                }
            }
            let code = if r.passed() { 0 } else { 1 };
            for a in r.failures() {
                eprintln!("assertion failed: {} = {:e} (limit {} {:e})", a.name, a.value, if a.relation == report::Relation::AtMost { "<=" } else { ">=" }, a.tolerance);
            }
            (r, code)
        }
        Err(e) => {
            eprintln!("{e}");
            let code = match &e {
                SuiteError::Config(_) => 2,
                SuiteError::Core(c) => exit_code_for(c),
            };
            let mut r = RunReport::new(name, cfg.seed, cfg.effective());
            r.error = Some(e.to_string());
            if let SuiteError::Config(c) = &e {
                r.results = json!({ "pointer": c.pointer });
            }
            (r, code)
        }
    };
    if let Err(e) = emit(&report, common, common.format) {
        eprintln!("cannot write report: {e}");
        return 2;
    }
    code
}

fn compare_csv(cfg: &ExperimentConfig) -> Option<String> {
    // rerun is cheap relative to the report; keeps the report JSON free of CSV text
    let modes = cfg.modes?;
    let cc = fockbridge::equivalence::CompareConfig {
        hamiltonian: cfg.hamiltonian_poly(modes).ok()?,
        ensemble: cfg.build_ensemble(modes).ok()?,
        cutoff: cfg.cutoff?,
        dt: cfg.evolve.as_ref().map_or(1e-3, |e| e.dt),
        t_max: cfg.evolve.as_ref().map_or(10.0, |e| e.t_max),
        sample_every: cfg.evolve.as_ref().map_or(100, |e| e.sample_every),
        max_derivative_order: 0,
        seed: cfg.seed,
    };
    fockbridge::equivalence::compare_trajectories(&cc).ok().map(|r| r.to_csv())
}

/// Parses `args` (including the program name) and runs; usage errors give 2.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}
