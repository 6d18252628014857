//! Run reports: config echo, results, and judged assertions.

use fockbridge::format::{json_number, sig17};
use serde_json::{json, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Assertion {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, relation: Relation::AtMost, passed: value <= tolerance }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, relation: Relation::AtLeast, passed: value >= tolerance }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "value": json_number(self.value),
            "tolerance": json_number(self.tolerance),
            "relation": self.relation.symbol(),
            "passed": self.passed,
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub subcommand: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub results: Value,
    pub assertions: Vec<Assertion>,
    pub error: Option<String>,
}

impl RunReport {
    pub fn new(subcommand: &str, seed: Option<u64>, config: Value) -> Self {
        Self { subcommand: subcommand.into(), seed, config, results: json!({}), assertions: Vec::new(), error: None }
    }

    pub fn check(&mut self, a: Assertion) {
        self.assertions.push(a);
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.assertions.iter().all(|a| a.passed)
    }

    pub fn failures(&self) -> Vec<&Assertion> {
        self.assertions.iter().filter(|a| !a.passed).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "tool": "fockbridge",
            "version": VERSION,
            "subcommand": self.subcommand,
            "seed": self.seed,
            "config": self.config,
            "results": self.results,
            "assertions": self.assertions.iter().map(Assertion::to_json).collect::<Vec<_>>(),
            "error": self.error,
            "passed": self.passed(),
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per assertion.
    pub fn assertions_csv(&self) -> String {
        let mut out = String::from("name,value,relation,tolerance,passed\n");
        for a in &self.assertions {
            out.push_str(&format!("{},{},{},{},{}\n", a.name, sig17(a.value), a.relation.symbol(), sig17(a.tolerance), a.passed));
        }
        out
    }
}
