//! Heisenberg propagation on truncated Fock space compared against classical
//! ensemble dynamics.
//!
//! Observables evolve as Q(t) = U†Q U with U = exp(−2i H_n t), so that
//! dQ/dt = −2i[Q, H_n] and −2i[Φ_j, H_n] = (∂H/∂π_j)_n.

use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::algebra::{phi_op, pi_op, quantize_normal, ClassicalPoly, OperatorPoly, Var};
use crate::dynamics::{classical_expectation, integrate_to, HamiltonianSystem};
use crate::error::{Error, Result};
use crate::fock::{density_matrix, expectation, realize, CMatrix, DensityMatrix, Ensemble, FockSpace, OperatorMatrix, TAIL_BUDGET};
use crate::format::{json_array, json_number, sig17};

pub const GENERATOR_HERMITIAN_TOL: f64 = 1e-12;
pub const QUADRATIC_GAP_TOL: f64 = 1e-5;
pub const DERIVATIVE_TOL: f64 = 1e-6;

const MINUS_TWO_I: Complex64 = Complex64 { re: 0.0, im: -2.0 };

/// H_n = realize(quantize_normal(H)).
pub fn heisenberg_generator(space: FockSpace, h: &ClassicalPoly, allow_non_hermitian: bool) -> Result<OperatorMatrix> {
    let hn = realize(space, &quantize_normal(&h.clone().with_modes(space.modes())?)?)?;
    let defect = hn.hermiticity_defect();
    if defect > GENERATOR_HERMITIAN_TOL && !allow_non_hermitian {
        return Err(Error::NonHermitian { deviation: defect });
    }
    Ok(hn)
}

/// Cached eigendecomposition H_n = V diag(λ) V†.
#[derive(Clone, Debug)]
pub struct Propagator {
    space: FockSpace,
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

impl Propagator {
    pub fn new(hn: &OperatorMatrix) -> Result<Self> {
        let defect = hn.hermiticity_defect();
        if defect > GENERATOR_HERMITIAN_TOL {
            return Err(Error::NonHermitian { deviation: defect });
        }
        let herm = (hn.entries() + hn.entries().adjoint()) * Complex64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        Ok(Self { space: hn.space(), eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    fn phases(&self, t: f64, sign: f64) -> DVector<Complex64> {
        self.eigenvalues.map(|l| Complex64::from_polar(1.0, sign * 2.0 * l * t))
    }

    /// U(t) = exp(−2i H_n t).
    pub fn unitary(&self, t: f64) -> OperatorMatrix {
        let v = &self.eigenvectors;
        let d = self.phases(t, -1.0);
        let mut vd = v.clone();
        for (k, mut col) in vd.column_iter_mut().enumerate() {
            col *= d[k];
        }
        OperatorMatrix::new(self.space, &vd * v.adjoint()).expect("finite by construction")
    }

    /// Heisenberg picture: U† Q0 U.
    pub fn heisenberg(&self, q0: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
        let u = self.unitary(t);
        u.adjoint().mul(q0)?.mul(&u)
    }

    /// Schrödinger picture: U ρ U†.
    pub fn schrodinger(&self, rho: &DensityMatrix, t: f64) -> Result<CMatrix> {
        if rho.space() != self.space {
            return Err(Error::ShapeMismatch("density matrix and generator live on different spaces".into()));
        }
        let u = self.unitary(t);
        Ok(u.entries() * rho.entries() * u.entries().adjoint())
    }

    /// Tr(ρ Q(t)) on a time grid, evaluated from the eigenbasis.
    pub fn traces(&self, rho: &DensityMatrix, q0: &OperatorMatrix, times: &[f64]) -> Result<Vec<Complex64>> {
        if rho.space() != self.space || q0.space() != self.space {
            return Err(Error::ShapeMismatch("operands live on different spaces".into()));
        }
        let v = &self.eigenvectors;
        let rho_t = v.adjoint() * rho.entries() * v;
        let q_t = v.adjoint() * q0.entries() * v;
        // Tr(ρ̃ D* Q̃ D) = Σ_kl e^{2iλ_k t} Q̃_kl e^{−2iλ_l t} ρ̃_lk
        let m = q_t.component_mul(&rho_t.transpose());
        let d = self.space.dimension();
        Ok(times
            .iter()
            .map(|&t| {
                let e = self.phases(t, 1.0);
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    let mut row = Complex64::new(0.0, 0.0);
                    for l in 0..d {
                        row += m[(k, l)] * e[l].conj();
                    }
                    acc += e[k] * row;
                }
                acc
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstantaneousResidual {
    /// |⟨∂H/∂π_j⟩ − Re Tr(ρ(−2i)[Φ_j, H_n])|
    pub phi: f64,
    /// |⟨−∂H/∂φ_j⟩ − Re Tr(ρ(−2i)[Π_j, H_n])|
    pub pi: f64,
}

impl InstantaneousResidual {
    pub fn max(&self) -> f64 {
        self.phi.max(self.pi)
    }
}

/// Instantaneous form of the Heisenberg/Hamilton correspondence for one mode.
pub fn instantaneous_identity_check(space: FockSpace, ens: &Ensemble, h: &ClassicalPoly, j: usize) -> Result<InstantaneousResidual> {
    let h = h.clone().with_modes(space.modes())?;
    let rho = density_matrix(space, ens)?;
    let hn = heisenberg_generator(space, &h, false)?;
    let n = space.modes();
    let phi = realize(space, &phi_op(n, j)?)?;
    let pi = realize(space, &pi_op(n, j)?)?;
    let q_phi = expectation(&rho, &phi.commutator(&hn)?.scale(MINUS_TWO_I))?.re;
    let q_pi = expectation(&rho, &pi.commutator(&hn)?.scale(MINUS_TWO_I))?.re;
    let c_phi = classical_expectation(ens, &h.partial_derivative(Var::pi(j)))?;
    let c_pi = -classical_expectation(ens, &h.partial_derivative(Var::phi(j)))?;
    Ok(InstantaneousResidual { phi: (c_phi - q_phi).abs(), pi: (c_pi - q_pi).abs() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeOrder {
    pub order: usize,
    pub classical: f64,
    pub quantum: f64,
    pub residual: f64,
}

/// k-th time derivative of ⟨φ_j⟩ at t = 0, classical chain rule vs nested commutators.
pub fn derivative_match(space: FockSpace, ens: &Ensemble, h: &ClassicalPoly, j: usize, max_order: usize) -> Result<Vec<DerivativeOrder>> {
    if max_order > 3 {
        return Err(Error::Domain(format!("derivative order {max_order} above 3")));
    }
    let n = space.modes();
    let h = h.clone().with_modes(n)?;
    let hn: OperatorPoly = quantize_normal(&h)?;
    let rho = density_matrix(space, ens)?;
    let mut classical = ClassicalPoly::var(n, Var::phi(j))?;
    let mut quantum = phi_op(n, j)?;
    let mut out = Vec::with_capacity(max_order + 1);
    for order in 0..=max_order {
        if order > 0 {
            classical = classical.poisson_bracket(&h)?;
            quantum = quantum.commutator(&hn)?.scale(MINUS_TWO_I)?;
        }
        let c = classical_expectation(ens, &classical)?;
        let q = expectation(&rho, &realize(space, &quantum)?)?.re;
        out.push(DerivativeOrder { order, classical: c, quantum: q, residual: (c - q).abs() });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct CompareConfig {
    pub hamiltonian: ClassicalPoly,
    pub ensemble: Ensemble,
    pub cutoff: usize,
    pub dt: f64,
    pub t_max: f64,
    /// RK4 steps between recorded samples.
    pub sample_every: usize,
    pub max_derivative_order: usize,
    pub seed: Option<u64>,
}

impl CompareConfig {
    pub fn to_json(&self) -> Value {
        json!({
            "hamiltonian": self.hamiltonian.to_dsl(),
            "modes": self.ensemble.modes(),
            "cutoff": self.cutoff,
            "dt": json_number(self.dt),
            "t_max": json_number(self.t_max),
            "sample_every": self.sample_every,
            "max_derivative_order": self.max_derivative_order,
            "ensemble": {
                "points": self.ensemble.points().iter().map(|p| json!({
                    "phi": json_array(p.phi.iter().copied()),
                    "pi": json_array(p.pi.iter().copied()),
                })).collect::<Vec<_>>(),
                "weights": json_array(self.ensemble.weights().iter().copied()),
            },
        })
    }
}

#[derive(Clone, Debug)]
pub struct ModeSeries {
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub config: CompareConfig,
    pub quadratic: bool,
    pub times: Vec<f64>,
    pub classical: Vec<ModeSeries>,
    pub quantum: Vec<ModeSeries>,
    /// Largest imaginary part among the quantum traces.
    pub quantum_imag_max: f64,
    pub gaps: Vec<ModeSeries>,
    pub derivative_residuals: Vec<Vec<DerivativeOrder>>,
    /// Largest truncation bound seen along the classical ensemble.
    pub tail_bound: f64,
    pub truncated: Option<String>,
}

impl EquivalenceReport {
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().flat_map(|g| g.phi.iter().chain(&g.pi)).copied().fold(0.0, f64::max)
    }

    /// Quadratic Hamiltonians: max gap within tolerance; non-quadratic ones carry no gap assertion.
    pub fn gap_assertion(&self) -> Option<bool> {
        self.quadratic.then(|| self.truncated.is_none() && self.max_gap() <= QUADRATIC_GAP_TOL)
    }

    /// Orders 0–2 within tolerance.
    pub fn derivative_assertion(&self) -> bool {
        self.derivative_residuals.iter().flatten().filter(|d| d.order <= 2).all(|d| d.residual <= DERIVATIVE_TOL)
    }

    pub fn to_json(&self) -> Value {
        let series = |s: &[ModeSeries]| {
            let mut obj = Map::new();
            for (j, m) in s.iter().enumerate() {
                obj.insert(format!("phi{}", j + 1), json_array(m.phi.iter().copied()));
                obj.insert(format!("pi{}", j + 1), json_array(m.pi.iter().copied()));
            }
            Value::Object(obj)
        };
        let mut gaps = match series(&self.gaps) {
            Value::Object(o) => o,
            _ => unreachable!(),
        };
        gaps.insert("max".into(), json_number(self.max_gap()));
        gaps.insert(
            "assertion".into(),
            match self.gap_assertion() {
                Some(pass) => json!({ "kind": "max_gap_le", "tolerance": json_number(QUADRATIC_GAP_TOL), "pass": pass }),
                None => json!({ "kind": "reported_only", "reason": "hamiltonian is not quadratic" }),
            },
        );
        let mut deriv = Map::new();
        for (j, orders) in self.derivative_residuals.iter().enumerate() {
            let rows: Vec<Value> = orders
                .iter()
                .map(|d| {
                    let mut row = json!({
                        "order": d.order,
                        "classical": json_number(d.classical),
                        "quantum": json_number(d.quantum),
                        "residual": json_number(d.residual),
                    });
                    if d.order <= 2 {
                        row["tolerance"] = json_number(DERIVATIVE_TOL);
                        row["pass"] = json!(d.residual <= DERIVATIVE_TOL);
                    } else {
                        row["tolerance"] = Value::Null;
                        row["pass"] = Value::Null;
                    }
                    row
                })
                .collect();
            deriv.insert(format!("phi{}", j + 1), Value::Array(rows));
        }
        json!({
            "config": self.config.to_json(),
            "times": json_array(self.times.iter().copied()),
            "classical": series(&self.classical),
            "quantum": series(&self.quantum),
            "quantum_imag_max": json_number(self.quantum_imag_max),
            "gaps": Value::Object(gaps),
            "derivative_residuals": Value::Object(deriv),
            "tail_bound": json_number(self.tail_bound),
            "tail_budget": json_number(TAIL_BUDGET),
            "truncated": self.truncated.as_ref().map_or(Value::Null, |s| json!(s)),
            "seed": self.config.seed.map_or(Value::Null, |s| json!(s)),
        })
    }

    /// One row per time: t, then classical, quantum and gap columns per mode.
    pub fn to_csv(&self) -> String {
        let n = self.classical.len();
        let mut out = String::from("t");
        for prefix in ["classical", "quantum", "gap"] {
            for j in 1..=n {
                write!(out, ",{prefix}_phi{j},{prefix}_pi{j}").unwrap();
            }
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            out.push_str(&sig17(*t));
            for block in [&self.classical, &self.quantum, &self.gaps] {
                for m in block.iter() {
                    write!(out, ",{},{}", sig17(m.phi[i]), sig17(m.pi[i])).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the classical ensemble and the Heisenberg pipeline on a shared time grid.
pub fn compare_trajectories(config: &CompareConfig) -> Result<EquivalenceReport> {
    let n = config.ensemble.modes();
    let h = config.hamiltonian.clone().with_modes(n)?;
    let space = FockSpace::new(n, config.cutoff)?;
    if !(config.dt > 0.0) || !config.dt.is_finite() {
        return Err(Error::InvalidStep(config.dt));
    }
    let sample_every = config.sample_every.max(1);
    let total_steps = (config.t_max / config.dt).round() as usize;
    let sys = HamiltonianSystem::new(h.clone())?;

    let phi_obs: Vec<ClassicalPoly> = (1..=n).map(|j| ClassicalPoly::var(n, Var::phi(j))).collect::<Result<_>>()?;
    let pi_obs: Vec<ClassicalPoly> = (1..=n).map(|j| ClassicalPoly::var(n, Var::pi(j))).collect::<Result<_>>()?;

    let mut times = Vec::new();
    let mut classical: Vec<ModeSeries> = (0..n).map(|_| ModeSeries { phi: vec![], pi: vec![] }).collect();
    let mut tail_bound = 0.0f64;
    let mut truncated = None;
    let mut points = config.ensemble.points().to_vec();
    let mut step = 0;
    loop {
        let ens = Ensemble::new(points.clone(), config.ensemble.weights().to_vec())?;
        let tail = crate::fock::truncation_bound(space, &ens);
        if tail > TAIL_BUDGET {
            truncated = Some(format!(
                "classical ensemble left the truncation budget at t = {} (tail {:.3e} > {:.1e})",
                sig17(step as f64 * config.dt),
                tail,
                TAIL_BUDGET
            ));
            break;
        }
        tail_bound = tail_bound.max(tail);
        times.push(step as f64 * config.dt);
        for j in 0..n {
            classical[j].phi.push(classical_expectation(&ens, &phi_obs[j])?);
            classical[j].pi.push(classical_expectation(&ens, &pi_obs[j])?);
        }
        if step + sample_every > total_steps {
            break;
        }
        for p in points.iter_mut() {
            *p = integrate_to(&sys, p, config.dt, sample_every)?;
        }
        step += sample_every;
    }

    let rho = density_matrix(space, &config.ensemble)?;
    let hn = heisenberg_generator(space, &h, false)?;
    let prop = Propagator::new(&hn)?;
    let mut quantum = Vec::with_capacity(n);
    let mut gaps = Vec::with_capacity(n);
    let mut imag_max = 0.0f64;
    for j in 1..=n {
        let qp = prop.traces(&rho, &realize(space, &phi_op(n, j)?)?, &times)?;
        let qq = prop.traces(&rho, &realize(space, &pi_op(n, j)?)?, &times)?;
        imag_max = qp.iter().chain(&qq).map(|z| z.im.abs()).fold(imag_max, f64::max);
        let series = ModeSeries { phi: qp.iter().map(|z| z.re).collect(), pi: qq.iter().map(|z| z.re).collect() };
        let c = &classical[j - 1];
        gaps.push(ModeSeries {
            phi: c.phi.iter().zip(&series.phi).map(|(a, b)| (a - b).abs()).collect(),
            pi: c.pi.iter().zip(&series.pi).map(|(a, b)| (a - b).abs()).collect(),
        });
        quantum.push(series);
    }

    let derivative_residuals = (1..=n)
        .map(|j| derivative_match(space, &config.ensemble, &h, j, config.max_derivative_order))
        .collect::<Result<Vec<_>>>()?;

    Ok(EquivalenceReport {
        config: config.clone(),
        quadratic: h.degree() <= 2,
        times,
        classical,
        quantum,
        quantum_imag_max: imag_max,
        gaps,
        derivative_residuals,
        tail_bound,
        truncated,
    })
}
