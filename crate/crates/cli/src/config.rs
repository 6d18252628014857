//! Experiment configuration: TOML or JSON, validated by hand so every error
//! carries the JSON pointer of the offending value.

use std::fmt;
use std::path::Path;

use fockbridge::algebra::{parse_poly_with_modes, ClassicalPoly};
use fockbridge::fock::{Ensemble, PhasePoint};
use fockbridge::lattice::LatticeSpec;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at {}: {}", if self.pointer.is_empty() { "/" } else { &self.pointer }, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(pointer: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { pointer: pointer.to_string(), message: message.into() }
}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleSpec {
    Points { points: Vec<PhasePoint>, weights: Vec<f64> },
    Sampler { count: usize, amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evolve {
    pub t_max: f64,
    pub dt: f64,
    pub sample_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraBlock {
    pub max_degree: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedBlock {
    pub frequencies: Vec<f64>,
    pub potential: String,
    pub equilibrium_guess: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeBlock {
    pub samples: usize,
    pub amplitude: f64,
    pub interaction: String,
    pub periods: f64,
    pub dispersion_dt: f64,
    pub drift_amplitude: f64,
    pub drift_dt: f64,
    pub drift_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub modes: Option<usize>,
    pub cutoff: Option<usize>,
    pub lattice_spec: Option<LatticeSpec>,
    pub hamiltonian: Option<String>,
    pub observables: Vec<String>,
    pub ensemble: Option<EnsembleSpec>,
    pub evolve: Option<Evolve>,
    pub max_derivative_order: usize,
    pub algebra: AlgebraBlock,
    pub expanded: Option<ExpandedBlock>,
    pub lattice: Option<LatticeBlock>,
    /// Tolerance overrides keyed by assertion name.
    pub tolerances: Map<String, Value>,
    raw: Value,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            modes: None,
            cutoff: None,
            lattice_spec: None,
            hamiltonian: None,
            observables: Vec::new(),
            ensemble: None,
            evolve: None,
            max_derivative_order: 3,
            algebra: AlgebraBlock { max_degree: 4, trials: 100 },
            expanded: None,
            lattice: None,
            tolerances: Map::new(),
            raw: json!({}),
        }
    }
}

struct Obj<'a> {
    map: &'a Map<String, Value>,
    ptr: String,
}

impl<'a> Obj<'a> {
    fn new(v: &'a Value, ptr: &str) -> CResult<Self> {
        v.as_object().map(|map| Self { map, ptr: ptr.to_string() }).ok_or_else(|| err(ptr, "expected a table"))
    }

    fn path(&self, key: &str) -> String {
        format!("{}/{}", self.ptr, key)
    }

    fn allow(&self, keys: &[&str]) -> CResult<()> {
        for k in self.map.keys() {
            if !keys.contains(&k.as_str()) {
                return Err(err(&self.path(k), "unknown key"));
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key)
    }

    fn child(&self, key: &str) -> CResult<Option<Obj<'a>>> {
        self.get(key).map(|v| Obj::new(v, &self.path(key))).transpose()
    }

    fn usize(&self, key: &str) -> CResult<Option<usize>> {
        self.get(key).map(|v| as_usize(v, &self.path(key))).transpose()
    }

    fn f64(&self, key: &str) -> CResult<Option<f64>> {
        self.get(key).map(|v| as_f64(v, &self.path(key))).transpose()
    }

    fn string(&self, key: &str) -> CResult<Option<String>> {
        self.get(key)
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| err(&self.path(key), "expected a string")))
            .transpose()
    }

    fn f64s(&self, key: &str) -> CResult<Option<Vec<f64>>> {
        self.get(key).map(|v| as_f64s(v, &self.path(key))).transpose()
    }
}

fn as_usize(v: &Value, ptr: &str) -> CResult<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| err(ptr, "expected a nonnegative integer"))
}

fn as_f64(v: &Value, ptr: &str) -> CResult<f64> {
    fockbridge::format::value_to_f64(v).filter(|x| x.is_finite()).ok_or_else(|| err(ptr, "expected a finite number"))
}

fn as_f64s(v: &Value, ptr: &str) -> CResult<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| err(ptr, "expected an array of numbers"))?;
    arr.iter().enumerate().map(|(i, x)| as_f64(x, &format!("{ptr}/{i}"))).collect()
}

fn positive(x: f64, ptr: &str) -> CResult<f64> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(err(ptr, "must be positive"))
    }
}

/// Reads TOML (by default) or JSON (`.json` extension) into a JSON value.
pub fn load_value(path: &Path) -> std::result::Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| err("", format!("cannot read {}: {e}", path.display())))?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        serde_json::from_str(&text).map_err(|e| err("", format!("invalid JSON: {e}")))
    } else {
        parse_toml(&text)
    }
}

pub fn parse_toml(text: &str) -> CResult<Value> {
    let t: toml::Table = text.parse().map_err(|e: toml::de::Error| err("", format!("invalid TOML: {}", e.message())))?;
    serde_json::to_value(t).map_err(|e| err("", e.to_string()))
}

impl ExperimentConfig {
    pub fn raw(&self) -> &Value {
        &self.raw
    }

    pub fn from_value(v: &Value) -> CResult<Self> {
        let root = Obj::new(v, "")?;
        root.allow(&[
            "seed",
            "system",
            "hamiltonian",
            "observables",
            "ensemble",
            "evolve",
            "max_derivative_order",
            "algebra",
            "expanded",
            "lattice",
            "tolerances",
        ])?;
        let mut cfg = Self { raw: v.clone(), ..Self::default() };
        cfg.seed = root.get("seed").map(|s| s.as_u64().ok_or_else(|| err("/seed", "expected an unsigned integer"))).transpose()?;

        if let Some(sys) = root.child("system")? {
            sys.allow(&["modes", "cutoff", "lattice"])?;
            cfg.modes = sys.usize("modes")?;
            if cfg.modes == Some(0) {
                return Err(err("/system/modes", "must be at least 1"));
            }
            cfg.cutoff = sys.usize("cutoff")?;
            if let Some(lat) = sys.child("lattice")? {
                lat.allow(&["d", "M", "dx", "masses"])?;
                let d = lat.usize("d")?.ok_or_else(|| err("/system/lattice/d", "required"))?;
                let m = lat.usize("M")?.ok_or_else(|| err("/system/lattice/M", "required"))?;
                let dx = lat.f64("dx")?.unwrap_or(1.0);
                let masses = lat.f64s("masses")?.ok_or_else(|| err("/system/lattice/masses", "required"))?;
                let spec = LatticeSpec::new(d, m, dx, masses).map_err(|e| err("/system/lattice", e.to_string()))?;
                cfg.lattice_spec = Some(spec);
            }
        }

        cfg.hamiltonian = root.string("hamiltonian")?;
        if let Some(obs) = root.get("observables") {
            let arr = obs.as_array().ok_or_else(|| err("/observables", "expected an array of strings"))?;
            for (i, o) in arr.iter().enumerate() {
                let s = o.as_str().ok_or_else(|| err(&format!("/observables/{i}"), "expected a string"))?;
                cfg.observables.push(s.to_string());
            }
        }

        if let Some(ens) = root.child("ensemble")? {
            ens.allow(&["points", "weights", "sampler"])?;
            if let Some(s) = ens.child("sampler")? {
                if ens.get("points").is_some() {
                    return Err(err("/ensemble", "give either points or sampler, not both"));
                }
                s.allow(&["count", "amplitude"])?;
                let count = s.usize("count")?.ok_or_else(|| err("/ensemble/sampler/count", "required"))?;
                if count == 0 {
                    return Err(err("/ensemble/sampler/count", "must be at least 1"));
                }
                let amplitude = positive(s.f64("amplitude")?.unwrap_or(0.5), "/ensemble/sampler/amplitude")?;
                cfg.ensemble = Some(EnsembleSpec::Sampler { count, amplitude });
            } else {
                let pts = ens.get("points").ok_or_else(|| err("/ensemble/points", "required"))?;
                let arr = pts.as_array().ok_or_else(|| err("/ensemble/points", "expected an array of tables"))?;
                if arr.is_empty() {
                    return Err(err("/ensemble/points", "ensemble is empty"));
                }
                let mut points = Vec::new();
                for (i, p) in arr.iter().enumerate() {
                    let ptr = format!("/ensemble/points/{i}");
                    let o = Obj::new(p, &ptr)?;
                    o.allow(&["phi", "pi"])?;
                    let phi = o.f64s("phi")?.ok_or_else(|| err(&o.path("phi"), "required"))?;
                    let pi = o.f64s("pi")?.unwrap_or_else(|| vec![0.0; phi.len()]);
                    if pi.len() != phi.len() {
                        return Err(err(&o.path("pi"), format!("expected {} entries", phi.len())));
                    }
                    if let Some(m) = cfg.modes {
                        if phi.len() != m {
                            return Err(err(&o.path("phi"), format!("expected {m} entries (system.modes)")));
                        }
                    }
                    if i > 0 && phi.len() != points.iter().map(|p: &PhasePoint| p.phi.len()).next().unwrap_or(0) {
                        return Err(err(&o.path("phi"), "points disagree on mode count"));
                    }
                    points.push(PhasePoint { phi, pi });
                }
                let weights = match ens.f64s("weights")? {
                    Some(w) => w,
                    None => vec![1.0 / points.len() as f64; points.len()],
                };
                if weights.len() != points.len() {
                    return Err(err("/ensemble/weights", format!("{} weights for {} points", weights.len(), points.len())));
                }
                if weights.iter().any(|w| *w < 0.0) {
                    return Err(err("/ensemble/weights", "weights must be nonnegative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(err("/ensemble/weights", format!("weights sum to {total}, expected 1")));
                }
                cfg.ensemble = Some(EnsembleSpec::Points { points, weights });
            }
        }

        if let Some(e) = root.child("evolve")? {
            e.allow(&["t_max", "dt", "sample_every"])?;
            cfg.evolve = Some(Evolve {
                t_max: positive(e.f64("t_max")?.unwrap_or(10.0), "/evolve/t_max")?,
                dt: positive(e.f64("dt")?.unwrap_or(1e-3), "/evolve/dt")?,
                sample_every: e.usize("sample_every")?.unwrap_or(100).max(1),
            });
        }
        if let Some(k) = root.usize("max_derivative_order")? {
            if k > 3 {
                return Err(err("/max_derivative_order", "at most 3"));
            }
            cfg.max_derivative_order = k;
        }
        if let Some(a) = root.child("algebra")? {
            a.allow(&["max_degree", "trials"])?;
            cfg.algebra.max_degree = a.usize("max_degree")?.unwrap_or(4);
            cfg.algebra.trials = a.usize("trials")?.unwrap_or(100);
        }
        if let Some(x) = root.child("expanded")? {
            x.allow(&["frequencies", "potential", "equilibrium_guess"])?;
            let frequencies = x.f64s("frequencies")?.unwrap_or_else(|| vec![1.0]);
            for (i, w) in frequencies.iter().enumerate() {
                positive(*w, &format!("/expanded/frequencies/{i}"))?;
            }
            let n = frequencies.len();
            cfg.expanded = Some(ExpandedBlock {
                potential: x.string("potential")?.unwrap_or_else(|| "0".into()),
                equilibrium_guess: x.f64s("equilibrium_guess")?.unwrap_or_else(|| vec![0.0; n]),
                frequencies,
            });
        }
        if let Some(l) = root.child("lattice")? {
            l.allow(&["samples", "amplitude", "interaction", "periods", "dispersion_dt", "drift_amplitude", "drift_dt", "drift_steps"])?;
            cfg.lattice = Some(LatticeBlock {
                samples: l.usize("samples")?.unwrap_or(3),
                amplitude: positive(l.f64("amplitude")?.unwrap_or(0.25), "/lattice/amplitude")?,
                interaction: l.string("interaction")?.unwrap_or_else(|| "0.25*phi1^4".into()),
                periods: positive(l.f64("periods")?.unwrap_or(10.0), "/lattice/periods")?,
                dispersion_dt: positive(l.f64("dispersion_dt")?.unwrap_or(5e-3), "/lattice/dispersion_dt")?,
                drift_amplitude: positive(l.f64("drift_amplitude")?.unwrap_or(0.03), "/lattice/drift_amplitude")?,
                drift_dt: positive(l.f64("drift_dt")?.unwrap_or(1e-2), "/lattice/drift_dt")?,
                drift_steps: l.usize("drift_steps")?.unwrap_or(10_000),
            });
        }
        if let Some(t) = root.child("tolerances")? {
            for (k, v) in t.map {
                positive(as_f64(v, &t.path(k))?, &t.path(k))?;
            }
            cfg.tolerances = t.map.clone();
        }
        Ok(cfg)
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).and_then(fockbridge::format::value_to_f64).unwrap_or(default)
    }

    pub fn require_seed(&self) -> CResult<u64> {
        self.seed.ok_or_else(|| err("/seed", "a seed is required for sampling (config or --seed)"))
    }

    pub fn require_modes(&self) -> CResult<usize> {
        self.modes.ok_or_else(|| err("/system/modes", "required"))
    }

    pub fn require_cutoff(&self) -> CResult<usize> {
        self.cutoff.ok_or_else(|| err("/system/cutoff", "required"))
    }

    /// Parses a DSL string found at `pointer` over `modes` modes.
    pub fn poly(text: &str, modes: usize, pointer: &str) -> CResult<ClassicalPoly> {
        parse_poly_with_modes(text, modes).map_err(|e| err(pointer, e.to_string()))
    }

    pub fn hamiltonian_poly(&self, modes: usize) -> CResult<ClassicalPoly> {
        let h = self.hamiltonian.as_deref().ok_or_else(|| err("/hamiltonian", "required"))?;
        Self::poly(h, modes, "/hamiltonian")
    }

    /// Ensemble from explicit points or the seeded sampler.
    pub fn build_ensemble(&self, modes: usize) -> CResult<Ensemble> {
        match self.ensemble.as_ref().ok_or_else(|| err("/ensemble", "required"))? {
            EnsembleSpec::Points { points, weights } => {
                if points[0].phi.len() != modes {
                    return Err(err("/ensemble/points/0/phi", format!("expected {modes} entries")));
                }
                Ensemble::new(points.clone(), weights.clone()).map_err(|e| err("/ensemble", e.to_string()))
            }
            EnsembleSpec::Sampler { count, amplitude } => {
                let seed = self.require_seed()?;
                Ok(crate::sampler::uniform_ensemble(seed, modes, *count, *amplitude))
            }
        }
    }

    /// Fills in defaults the config leaves open; the result is echoed into reports.
    pub fn effective(&self) -> Value {
        let mut v = self.raw.clone();
        let obj = v.as_object_mut().expect("validated table");
        if let Some(seed) = self.seed {
            obj.insert("seed".into(), json!(seed));
        }
        let sys = obj.entry("system").or_insert_with(|| json!({}));
        if let Some(s) = sys.as_object_mut() {
            if let Some(m) = self.modes {
                s.insert("modes".into(), json!(m));
            }
            if let Some(c) = self.cutoff {
                s.insert("cutoff".into(), json!(c));
            }
        }
        if let Some(e) = &self.evolve {
            obj.insert(
                "evolve".into(),
                json!({
                    "t_max": fockbridge::format::json_number(e.t_max),
                    "dt": fockbridge::format::json_number(e.dt),
                    "sample_every": e.sample_every,
                }),
            );
        }
        v
    }
}
