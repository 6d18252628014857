//! Subcommand bodies. Each returns a filled report; the caller decides the exit code.

use std::f64::consts::PI;

use fockbridge::algebra::{
    check_bracket_identity, phi_op, pi_op, quantize_normal, BracketSide, ClassicalPoly, Generator, OperatorPoly, Var,
    VarKind,
};
use fockbridge::dynamics::{evolve_ensemble, integrate_to, HamiltonianSystem};
use fockbridge::equivalence::{
    compare_trajectories, instantaneous_identity_check, CompareConfig, DERIVATIVE_TOL, QUADRATIC_GAP_TOL,
};
use fockbridge::expanded::{
    build_hv, classify_energy_operator, encode_v, encode_z, equilibrium_gain_check, finite_difference_residual,
    gain_operators, reification_x, z_norm_drift, Picture, SecondOrderSystem, ANTI_HERMITIAN_TOL, ENERGY_GUARD_TOL,
    GAIN_GUARD_TOL, X_GUARD_TOL,
};
use fockbridge::fock::{
    apply_poly, coherent_vector, density_matrix, ensemble_moment_vector, expectation, realize, truncation_bound, Ensemble,
    FockSpace, MomentTensor, PhasePoint, StateVector,
};
use fockbridge::format::{json_array, json_number};
use fockbridge::lattice::{
    calibrate_c, calibration_residual, dispersion, encode_lattice_state, equal_time_commutator_check, field_operators,
    functional_commutator_check, lattice_free_hamiltonian, leapfrog_evolve, measure_frequency, site_variable,
    LatticeSpec, LatticeState,
};
use fockbridge::Error;
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{Assertion, RunReport};
use crate::sampler;

#[derive(Debug)]
pub enum SuiteError {
    Config(ConfigError),
    Core(Error),
}

impl From<ConfigError> for SuiteError {
    fn from(e: ConfigError) -> Self {
        SuiteError::Config(e)
    }
}

impl From<Error> for SuiteError {
    fn from(e: Error) -> Self {
        SuiteError::Core(e)
    }
}

impl std::fmt::Display for SuiteError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SuiteError::Config(e) => write!(f, "{e}"),
            SuiteError::Core(e) => write!(f, "{e}"),
        }
    }
}

pub type SuiteResult<T> = std::result::Result<T, SuiteError>;

// ---------------------------------------------------------------- algebra

/// Largest coefficient of [Φ_j, Π_k] − (i/2)δ_jk, [Φ_j, Φ_k] and [Π_j, Π_k].
pub fn ccr_residual(modes: usize) -> fockbridge::Result<f64> {
    let mut worst = 0.0f64;
    for j in 1..=modes {
        for k in 1..=modes {
            let c = phi_op(modes, j)?.commutator(&pi_op(modes, k)?)?;
            let want = if j == k { Complex64::new(0.0, 0.5) } else { Complex64::new(0.0, 0.0) };
            worst = worst.max(c.sub(&OperatorPoly::constant(modes, want)?)?.max_abs_coefficient());
            worst = worst.max(phi_op(modes, j)?.commutator(&phi_op(modes, k)?)?.max_abs_coefficient());
            worst = worst.max(pi_op(modes, j)?.commutator(&pi_op(modes, k)?)?.max_abs_coefficient());
        }
    }
    Ok(worst)
}

/// Largest coefficient of [Φ^m, Π] − (i/2)mΦ^{m−1} and [Φ, Π^m] − (i/2)mΠ^{m−1}, m = 1..=max_power.
pub fn power_rule_residual(max_power: u32) -> fockbridge::Result<f64> {
    let phi = phi_op(1, 1)?;
    let pi = pi_op(1, 1)?;
    let mut worst = 0.0f64;
    for m in 1..=max_power {
        let scale = Complex64::new(0.0, 0.5 * m as f64);
        let lhs = phi.pow(m)?.commutator(&pi)?;
        worst = worst.max(lhs.sub(&phi.pow(m - 1)?.scale(scale)?)?.max_abs_coefficient());
        let lhs = phi.commutator(&pi.pow(m)?)?;
        worst = worst.max(lhs.sub(&pi.pow(m - 1)?.scale(scale)?)?.max_abs_coefficient());
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BracketSuite {
    pub trials: usize,
    pub max_residual: f64,
    pub nonzero_residuals: usize,
    pub max_hermiticity_defect: f64,
}

/// Bracket identities on `trials` seeded random polynomials, every mode, both sides.
pub fn bracket_suite(seed: u64, modes: usize, max_degree: usize, trials: usize) -> fockbridge::Result<BracketSuite> {
    let mut r = sampler::rng(seed);
    let mut out = BracketSuite { trials, max_residual: 0.0, nonzero_residuals: 0, max_hermiticity_defect: 0.0 };
    for _ in 0..trials {
        let f = sampler::random_poly(&mut r, modes, max_degree);
        for j in 1..=modes {
            for side in [BracketSide::Phi, BracketSide::Pi] {
                let res = check_bracket_identity(&f, j, side)?;
                let m = res.max_abs_coefficient();
                if m != 0.0 {
                    out.nonzero_residuals += 1;
                }
                out.max_residual = out.max_residual.max(m);
            }
        }
        out.max_hermiticity_defect = out.max_hermiticity_defect.max(quantize_normal(&f)?.hermiticity_defect());
    }
    Ok(out)
}

pub fn run_verify_algebra(cfg: &ExperimentConfig) -> SuiteResult<RunReport> {
    let modes = cfg.modes.unwrap_or(2);
    let seed = cfg.require_seed()?;
    let (max_degree, trials) = (cfg.algebra.max_degree, cfg.algebra.trials);
    let mut report = RunReport::new("verify-algebra", Some(seed), cfg.effective());
    let ccr = ccr_residual(modes.min(3))?;
    let power = power_rule_residual(5)?;
    let brackets = bracket_suite(seed, modes, max_degree, trials)?;
    report.results = json!({
        "modes": modes,
        "max_degree": max_degree,
        "trials": trials,
        "ccr_residual": json_number(ccr),
        "power_rule_residual": json_number(power),
        "bracket_max_residual": json_number(brackets.max_residual),
        "bracket_nonzero_residuals": brackets.nonzero_residuals,
        "normal_form_hermiticity_defect": json_number(brackets.max_hermiticity_defect),
    });
    report.check(Assertion::at_most("ccr_residual", ccr, 0.0));
    report.check(Assertion::at_most("power_rule_residual", power, 0.0));
    report.check(Assertion::at_most("bracket_identity_residual", brackets.max_residual, 0.0));
    report.check(Assertion::at_most("normal_form_hermiticity", brackets.max_hermiticity_defect, 0.0));
    Ok(report)
}

// ---------------------------------------------------------------- encode

/// max_j ‖a_j w − z_j w‖ for the coherent vector of `point`.
pub fn coherent_eigen_residual(space: FockSpace, point: &PhasePoint) -> fockbridge::Result<f64> {
    let w = coherent_vector(space, point)?;
    let z = point.z();
    let n = space.modes();
    let mut worst = 0.0f64;
    for j in 1..=n {
        let a = OperatorPoly::generator(n, Generator::a(j))?;
        let aw = apply_poly(&a, &w)?;
        worst = worst.max(aw.sub(&w.scale(z[j - 1]))?.norm());
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceIdentity {
    pub trace: Complex64,
    pub classical: f64,
    pub residual: f64,
}

/// Tr(ρ f_n) against the ensemble average of f.
pub fn trace_identity(space: FockSpace, ens: &Ensemble, f: &ClassicalPoly) -> fockbridge::Result<TraceIdentity> {
    let rho = density_matrix(space, ens)?;
    let f = f.clone().with_modes(space.modes())?;
    let m = realize(space, &quantize_normal(&f)?)?;
    let trace = expectation(&rho, &m)?;
    let classical = ens.iter().map(|(p, w)| w * f.eval(&p.phi, &p.pi)).sum::<f64>();
    Ok(TraceIdentity { trace, classical, residual: (trace - Complex64::new(classical, 0.0)).norm() })
}

/// Worst trace residual over `trials` seeded (f, ensemble) pairs on one or two modes.
pub fn trace_identity_trials(seed: u64, trials: usize, cutoff: usize) -> fockbridge::Result<f64> {
    let mut r = sampler::rng(seed);
    let mut worst = 0.0f64;
    for k in 0..trials {
        let modes = 1 + k % 2;
        let space = FockSpace::new(modes, cutoff)?;
        let f = sampler::random_poly(&mut r, modes, 4);
        let count = 1 + (k % 5);
        let ens = sampler::draw_ensemble(&mut r, modes, count, 1.0);
        worst = worst.max(trace_identity(space, &ens, &f)?.residual);
    }
    Ok(worst)
}

pub fn run_encode(cfg: &ExperimentConfig) -> SuiteResult<RunReport> {
    let modes = cfg.require_modes()?;
    let space = FockSpace::new(modes, cfg.require_cutoff()?)?;
    let ens = cfg.build_ensemble(modes)?;
    let mut report = RunReport::new("encode", cfg.seed, cfg.effective());
    let eig_tol = cfg.tolerance("coherent_eigen", 1e-8);
    let trace_tol = cfg.tolerance("trace_identity", 1e-7);
    let moment_tol = cfg.tolerance("moments", 1e-10);

    let tail = truncation_bound(space, &ens);
    let rho = density_matrix(space, &ens)?;
    let min_eig = rho.min_eigenvalue();

    let mut eig = Vec::new();
    let mut worst_eig = 0.0f64;
    for p in ens.points() {
        let r = coherent_eigen_residual(space, p)?;
        worst_eig = worst_eig.max(r);
        eig.push(json_number(r));
    }

    let mut observables: Vec<(String, String)> = cfg
        .observables
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), format!("/observables/{i}")))
        .collect();
    if let Some(h) = &cfg.hamiltonian {
        observables.push((h.clone(), "/hamiltonian".into()));
    }
    if observables.is_empty() {
        for j in 1..=modes {
            observables.push((format!("phi{j}^2 + pi{j}^2"), String::new()));
            observables.push((format!("phi{j}^3*pi{j}"), String::new()));
        }
    }
    let mut traces = Vec::new();
    let mut worst_trace = 0.0f64;
    for (text, ptr) in &observables {
        let f = ExperimentConfig::poly(text, modes, ptr)?;
        let t = trace_identity(space, &ens, &f)?;
        worst_trace = worst_trace.max(t.residual);
        traces.push(json!({
            "observable": text,
            "trace_re": json_number(t.trace.re),
            "trace_im": json_number(t.trace.im),
            "classical": json_number(t.classical),
            "residual": json_number(t.residual),
        }));
    }

    // mixture moments from the exponential vector vs direct averages (φ only)
    let phi_only = Ensemble::new(
        ens.points().iter().map(|p| PhasePoint { phi: p.phi.clone(), pi: vec![0.0; modes] }).collect(),
        ens.weights().to_vec(),
    )?;
    let mv = ensemble_moment_vector(space, &phi_only)?;
    let order = 3.min(space.cutoff());
    let moment_gap = MomentTensor::from_moment_vector(&mv, order)?.max_abs_difference(&MomentTensor::from_ensemble(&phi_only, order));

    report.results = json!({
        "dimension": space.dimension(),
        "truncation_bound": json_number(tail),
        "density": {
            "trace": json_number(rho.trace().re),
            "min_eigenvalue": json_number(min_eig),
            "rank": rho.rank(1e-10),
        },
        "coherent_eigen_residuals": eig,
        "traces": traces,
        "moment_order": order,
        "moment_gap": json_number(moment_gap),
    });
    report.check(Assertion::at_most("coherent_eigen", worst_eig, eig_tol));
    report.check(Assertion::at_most("trace_identity", worst_trace, trace_tol));
    report.check(Assertion::at_most("moments", moment_gap, moment_tol));
    report.check(Assertion::at_least("density_min_eigenvalue", min_eig, -1e-10));
    Ok(report)
}

// ---------------------------------------------------------------- compare

/// Worst instantaneous-identity residual over `times`, stepping the ensemble classically.
pub fn instantaneous_along(
    space: FockSpace,
    h: &ClassicalPoly,
    ens: &Ensemble,
    dt: f64,
    steps_between: usize,
    samples: usize,
) -> fockbridge::Result<Vec<f64>> {
    let sys = HamiltonianSystem::new(h.clone())?;
    let mut e = ens.clone();
    let mut out = Vec::with_capacity(samples);
    for k in 0..samples {
        if k > 0 {
            e = evolve_ensemble(&sys, &e, dt, steps_between)?;
        }
        let mut worst = 0.0f64;
        for j in 1..=space.modes() {
            worst = worst.max(instantaneous_identity_check(space, &e, h, j)?.max());
        }
        out.push(worst);
    }
    Ok(out)
}

/// e(dt)/e(dt/2) with e(h) = |x(h) − x(h/2)| at time `t` (Richardson difference), RK4.
pub fn rk4_halving_ratio(h: &ClassicalPoly, start: &PhasePoint, dt: f64, t: f64) -> fockbridge::Result<Option<f64>> {
    let sys = HamiltonianSystem::new(h.clone())?;
    let at = |step: f64| -> fockbridge::Result<PhasePoint> {
        let n = (t / step).round() as usize;
        integrate_to(&sys, start, step, n)
    };
    let diff = |a: &PhasePoint, b: &PhasePoint| {
        a.phi.iter().zip(&b.phi).chain(a.pi.iter().zip(&b.pi)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let (x1, x2, x4) = (at(dt)?, at(dt / 2.0)?, at(dt / 4.0)?);
    let (e1, e2) = (diff(&x1, &x2), diff(&x2, &x4));
    Ok((e2 > 1e-13).then(|| e1 / e2))
}

pub fn run_compare(cfg: &ExperimentConfig) -> SuiteResult<RunReport> {
    let modes = match cfg.modes {
        Some(m) => m,
        None => match &cfg.ensemble {
            Some(crate::config::EnsembleSpec::Points { points, .. }) => points[0].phi.len(),
            _ => cfg.require_modes()?,
        },
    };
    let h = cfg.hamiltonian_poly(modes)?;
    let ensemble = cfg.build_ensemble(modes)?;
    let evolve = cfg.evolve.clone().unwrap_or(crate::config::Evolve { t_max: 10.0, dt: 1e-3, sample_every: 100 });
    let cutoff = cfg.require_cutoff()?;
    let gap_tol = cfg.tolerance("gap", QUADRATIC_GAP_TOL);
    let deriv_tol = cfg.tolerance("derivative", DERIVATIVE_TOL);
    let inst_tol = cfg.tolerance("instantaneous", 1e-7);
    let cc = CompareConfig {
        hamiltonian: h.clone(),
        ensemble: ensemble.clone(),
        cutoff,
        dt: evolve.dt,
        t_max: evolve.t_max,
        sample_every: evolve.sample_every,
        max_derivative_order: cfg.max_derivative_order,
        seed: cfg.seed,
    };
    let eq = compare_trajectories(&cc)?;
    let space = FockSpace::new(modes, cutoff)?;
    let inst = instantaneous_along(space, &h, &ensemble, evolve.dt, evolve.sample_every, eq.times.len())?;
    let ratio = rk4_halving_ratio(&h, &ensemble.points()[0], 0.1, 2.0)?;

    let mut report = RunReport::new("compare", cfg.seed, cfg.effective());
    let mut results = eq.to_json();
    results["instantaneous_residuals"] = json_array(inst.iter().copied());
    results["rk4_halving_ratio"] = ratio.map_or(Value::Null, json_number);
    report.results = results;

    if eq.quadratic {
        report.check(Assertion::at_most("max_gap", eq.max_gap(), gap_tol));
    }
    report.check(Assertion::at_most("trajectory_truncated", if eq.truncated.is_some() { 1.0 } else { 0.0 }, 0.0));
    for (j, orders) in eq.derivative_residuals.iter().enumerate() {
        for d in orders.iter().filter(|d| d.order <= 2) {
            report.check(Assertion::at_most(format!("derivative_phi{}_order{}", j + 1, d.order), d.residual, deriv_tol));
        }
    }
    report.check(Assertion::at_most("instantaneous_identity", inst.iter().copied().fold(0.0, f64::max), inst_tol));
    if let Some(r) = ratio {
        report.check(Assertion::at_least("rk4_halving_ratio_low", r, 8.0));
        report.check(Assertion::at_most("rk4_halving_ratio_high", r, 32.0));
    }
    Ok(report)
}

// ---------------------------------------------------------------- expanded space

pub fn run_appendix_a(cfg: &ExperimentConfig) -> SuiteResult<RunReport> {
    let block = cfg.expanded.clone().ok_or_else(|| ConfigError { pointer: "/expanded".into(), message: "required".into() })?;
    let n = block.frequencies.len();
    let f = ExperimentConfig::poly(&block.potential, n, "/expanded/potential")?;
    let sys = SecondOrderSystem::new(block.frequencies.clone(), f)?;
    let cutoff = cfg.cutoff.unwrap_or(24);
    let space = FockSpace::expanded(n, cutoff)?;
    let points: Vec<PhasePoint> = match &cfg.ensemble {
        Some(crate::config::EnsembleSpec::Points { points, .. }) => points.clone(),
        _ => vec![PhasePoint { phi: vec![0.5; n], pi: vec![0.3; n] }],
    };
    if points[0].phi.len() != n {
        return Err(ConfigError { pointer: "/ensemble/points/0/phi".into(), message: format!("expected {n} entries") }.into());
    }
    let mut report = RunReport::new("appendix-a", cfg.seed, cfg.effective());
    let w = sys.frequencies().to_vec();

    // reification guard, per family
    let x = reification_x(space)?;
    let mut conj_a = 0.0f64;
    let mut conj_b = 0.0f64;
    for j in 1..=n {
        conj_a = conj_a.max(x.conjugation_residual(Generator::a(j))?).max(x.conjugation_residual(Generator::a_dag(j))?);
        conj_b = conj_b.max(x.conjugation_residual(Generator::b(j))?).max(x.conjugation_residual(Generator::b_dag(j))?);
    }
    report.check(Assertion::at_most("x_conjugation_a", conj_a, cfg.tolerance("x_conjugation", X_GUARD_TOL)));
    report.check(Assertion::at_most("x_conjugation_b", conj_b, cfg.tolerance("x_conjugation", X_GUARD_TOL)));

    // gain operators
    let gv = gain_operators(space, &sys, Picture::V)?;
    let mut fd = Vec::new();
    for p in &points {
        fd.push(finite_difference_residual(space, &sys, &gv.total, p, 0.5, 1e-4)?);
    }
    let fd_max = fd.iter().copied().fold(gv.guard_residual, f64::max);
    report.check(Assertion::at_most("gain_finite_difference", fd_max, cfg.tolerance("gain_finite_difference", GAIN_GUARD_TOL)));

    let gz = gain_operators(space, &sys, Picture::Z)?;
    report.check(Assertion::at_most("gz_anti_hermitian", gz.guard_residual, cfg.tolerance("gz_anti_hermitian", ANTI_HERMITIAN_TOL)));
    let times: Vec<f64> = (0..=10).map(|k| 0.5 * k as f64).collect();
    let z0 = encode_z(&x, &w, &points[0])?;
    let drift = z_norm_drift(&gz.total, &z0, &times)?;
    report.check(Assertion::at_most("z_norm_drift", drift, cfg.tolerance("z_norm_drift", 1e-8)));

    // energy operator
    let hv = build_hv(space, &sys)?;
    let mut lambda = Vec::new();
    for p in &points {
        let e = sys.energy(p)?;
        let v = encode_v(space, &w, p)?;
        let rep = classify_energy_operator(&hv.matrix, &[v], Some(&[e]), ENERGY_GUARD_TOL)?;
        lambda.push(rep.lambda_residuals[0]);
    }
    let energy_tol = cfg.tolerance("hv_eigenvalue", ENERGY_GUARD_TOL);
    report.check(Assertion::at_most("hv_eigenvalue", lambda.iter().copied().fold(0.0, f64::max), energy_tol));

    let p0 = &points[0];
    let e0 = sys.energy(p0)?;
    let partner = PhasePoint { phi: p0.phi.clone(), pi: p0.pi.iter().map(|v| -v).collect() };
    let mixture = |a: &PhasePoint, b: &PhasePoint| -> fockbridge::Result<StateVector> {
        Ok(encode_v(space, &w, a)?.add(&encode_v(space, &w, b)?)?.scale(Complex64::new(0.5, 0.0)))
    };
    let equal = classify_energy_operator(&hv.matrix, &[mixture(p0, &partner)?], Some(&[e0]), energy_tol)?;
    let shifted = PhasePoint { phi: p0.phi.iter().map(|v| 0.5 * v).collect(), pi: p0.pi.clone() };
    let unequal = classify_energy_operator(&hv.matrix, &[mixture(p0, &shifted)?], None, energy_tol)?;
    report.check(Assertion::at_most("equal_energy_ensemble", equal.lambda_residuals[0], energy_tol));
    report.check(Assertion::at_least("unequal_energy_counterexample", unequal.lambda_residuals[0], 10.0 * energy_tol));

    // equilibrium
    let eq = sys.find_equilibrium(&block.equilibrium_guess)?;
    let eq_point = PhasePoint { phi: eq.clone(), pi: vec![0.0; n] };
    let eqr = equilibrium_gain_check(space, &sys, &eq_point, Some(&x))?;
    let eq_tol = cfg.tolerance("equilibrium", 1e-6);
    // z-picture value is reported only: X mixes boundary occupations into interior rows
    report.check(Assertion::at_most("equilibrium_v", eqr.v_picture, eq_tol));

    report.results = json!({
        "cutoff": cutoff,
        "dimension": space.dimension(),
        "hamiltonian": sys.hamiltonian()?.to_dsl(),
        "x_condition": json_number(x.condition),
        "x_conjugation": {"a": json_number(conj_a), "b": json_number(conj_b)},
        "gain_probe_residual": json_number(gv.guard_residual),
        "finite_difference_residuals": json_array(fd.iter().copied()),
        "gz_anti_hermiticity": json_number(gz.guard_residual),
        "z_norm": json_number(z0.norm()),
        "z_norm_drift": json_number(drift),
        "hv_lambda_residuals": json_array(lambda.iter().copied()),
        "energies": json_array(points.iter().map(|p| sys.energy(p).unwrap_or(f64::NAN))),
        "equal_energy_residual": json_number(equal.lambda_residuals[0]),
        "unequal_energy_residual": json_number(unequal.lambda_residuals[0]),
        "equilibrium": {
            "phi": json_array(eq.iter().copied()),
            "v_picture": json_number(eqr.v_picture),
            "z_picture": eqr.z_picture.map_or(Value::Null, json_number),
        },
    });
    Ok(report)
}

// ---------------------------------------------------------------- lattice

/// Free lattice Hamiltonian plus Σ_x Δx^d f(φ(x)) for a local density f over phi1..phiN.
pub fn lattice_functional(spec: &LatticeSpec, density: &ClassicalPoly) -> fockbridge::Result<ClassicalPoly> {
    let modes = spec.sites() * spec.fields;
    let mut total = lattice_free_hamiltonian(spec)?;
    for x in 0..spec.sites() {
        for term in density.terms() {
            let exps: Vec<(Var, u32)> = term
                .exponents
                .iter()
                .map(|(v, e)| {
                    let k = site_variable(spec, v.mode - 1, x);
                    (if v.kind == VarKind::Phi { Var::phi(k) } else { Var::pi(k) }, e)
                })
                .collect();
            total = total.add(&ClassicalPoly::monomial(modes, term.coefficient * spec.cell_volume(), exps)?)?;
        }
    }
    Ok(total)
}

pub fn lattice_samples(spec: &LatticeSpec, seed: u64, count: usize, amplitude: f64) -> Vec<LatticeState> {
    (0..count as u64).map(|k| LatticeState::sample(spec, seed.wrapping_add(k), amplitude)).collect()
}

/// Measured minus predicted frequency for a free standing wave at momentum index `p` of field `j`.
pub fn dispersion_error(spec: &LatticeSpec, j: usize, p: usize, periods: f64, dt: f64) -> fockbridge::Result<(f64, f64)> {
    let w = dispersion(spec).w[j][p];
    let k = spec.momentum(p);
    let mut s = LatticeState::zeros(spec);
    for x in 0..spec.sites() {
        let phase: f64 = k.iter().zip(spec.site_position(x)).map(|(a, b)| a * b).sum();
        s.phi[j][x] = 0.05 * phase.cos();
    }
    let steps = ((periods + 0.5) * 2.0 * PI / w / dt).ceil() as usize;
    let run = leapfrog_evolve(spec, None, &s, dt, steps, 1)?;
    let got = measure_frequency(&run.times, &run.site_series(j, 0))
        .ok_or_else(|| Error::Domain("too few zero crossings to measure a frequency".into()))?;
    Ok((got, w))
}

/// Leapfrog energy drift at dt and the ratio drift(dt)/drift(dt/2).
pub fn leapfrog_drift(spec: &LatticeSpec, state: &LatticeState, dt: f64, steps: usize) -> fockbridge::Result<(f64, f64)> {
    let a = leapfrog_evolve(spec, None, state, dt, steps, 10)?;
    let b = leapfrog_evolve(spec, None, state, dt / 2.0, 2 * steps, 20)?;
    Ok((a.energy_drift(), a.energy_drift() / b.energy_drift()))
}

pub fn run_lattice(cfg: &ExperimentConfig) -> SuiteResult<RunReport> {
    let spec = cfg
        .lattice_spec
        .clone()
        .ok_or_else(|| ConfigError { pointer: "/system/lattice".into(), message: "required".into() })?;
    let block = cfg.lattice.clone().unwrap_or(crate::config::LatticeBlock {
        samples: 3,
        amplitude: 0.25,
        interaction: "0.25*phi1^4".into(),
        periods: 10.0,
        dispersion_dt: 5e-3,
        drift_amplitude: 0.03,
        drift_dt: 1e-2,
        drift_steps: 10_000,
    });
    let seed = cfg.require_seed()?;
    let cutoff = cfg.cutoff.unwrap_or(10);
    let space = FockSpace::new(spec.sites() * spec.fields, cutoff)?;
    let mut report = RunReport::new("lattice", Some(seed), cfg.effective());

    let first = lattice_samples(&spec, seed, block.samples, block.amplitude);
    let second = lattice_samples(&spec, seed.wrapping_add(1_000_003), block.samples, block.amplitude);
    let fit = calibrate_c(&spec, space, &first)?;
    let fit2 = calibrate_c(&spec, space, &second)?;
    let doubled = calibration_residual(&spec, space, &first, 2.0 * fit.c)?;
    let cal_tol = cfg.tolerance("calibration", 1e-6);
    report.check(Assertion::at_most("calibration_residual", fit.residual, cal_tol));
    report.check(Assertion::at_most("calibration_seed_stability", (fit.c - fit2.c).abs(), cfg.tolerance("calibration_stability", 1e-10)));
    report.check(Assertion::at_most("calibration_reference", (fit.c - fit.reference).abs(), cal_tol));
    report.check(Assertion::at_least("calibration_sensitivity", doubled, 10.0 * cal_tol));

    // traces against the density matrix of the first sample
    let enc = encode_lattice_state(&spec, space, &first[0], fit.c)?;
    let rho = density_matrix(space, &Ensemble::point(enc.point()))?;
    let ops = field_operators(&spec)?;
    let mut trace_res = 0.0f64;
    for j in 0..spec.fields {
        for x in 0..spec.sites() {
            let tp = expectation(&rho, &realize(space, ops.phi_at(j, x))?)?;
            let tq = expectation(&rho, &realize(space, ops.pi_at(j, x))?)?;
            trace_res = trace_res
                .max((tp - Complex64::new(first[0].phi[j][x], 0.0)).norm())
                .max((tq - Complex64::new(first[0].pi[j][x], 0.0)).norm());
        }
    }
    report.check(Assertion::at_most("field_traces", trace_res, cfg.tolerance("field_traces", 1e-6)));

    let ccr = equal_time_commutator_check(&spec)?;
    let density = ExperimentConfig::poly(&block.interaction, spec.fields, "/lattice/interaction")?;
    let functional = lattice_functional(&spec, &density)?;
    let fcomm = functional_commutator_check(&spec, &functional)?;
    let comm_tol = cfg.tolerance("commutator", 1e-6);
    report.check(Assertion::at_most("equal_time_commutator", ccr, comm_tol));
    report.check(Assertion::at_most("functional_commutator", fcomm, comm_tol));

    // one momentum per distinct |p| and field
    let mut seen: Vec<(usize, i64)> = Vec::new();
    let mut disp = Vec::new();
    let disp_tol = cfg.tolerance("dispersion", 1e-4);
    let mut disp_worst = 0.0f64;
    for j in 0..spec.fields {
        for p in 0..spec.sites() {
            let key = (j, (spec.momentum(p).iter().map(|q| q * q).sum::<f64>() * 1e9).round() as i64);
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            let (got, want) = dispersion_error(&spec, j, p, block.periods, block.dispersion_dt)?;
            disp_worst = disp_worst.max((got - want).abs());
            disp.push(json!({
                "field": j + 1,
                "momentum": json_array(spec.momentum(p)),
                "measured": json_number(got),
                "predicted": json_number(want),
            }));
        }
    }
    report.check(Assertion::at_most("dispersion", disp_worst, disp_tol));

    let drift_state = LatticeState::sample(&spec, seed.wrapping_add(7), block.drift_amplitude);
    let (drift, ratio) = leapfrog_drift(&spec, &drift_state, block.drift_dt, block.drift_steps)?;
    report.check(Assertion::at_most("leapfrog_energy_drift", drift, cfg.tolerance("leapfrog_energy_drift", 1e-6)));
    report.check(Assertion::at_least("leapfrog_halving_ratio_low", ratio, 2.0));
    report.check(Assertion::at_most("leapfrog_halving_ratio_high", ratio, 8.0));

    report.results = json!({
        "lattice": {
            "d": spec.d,
            "M": spec.m,
            "dx": json_number(spec.dx),
            "masses": json_array(spec.masses.iter().copied()),
        },
        "cutoff": cutoff,
        "calibration": fit.to_json(),
        "calibration_second_seed": fit2.to_json(),
        "doubled_c_residual": json_number(doubled),
        "field_trace_residual": json_number(trace_res),
        "equal_time_commutator": json_number(ccr),
        "functional_commutator": json_number(fcomm),
        "dispersion": disp,
        "leapfrog": {
            "dt": json_number(block.drift_dt),
            "steps": block.drift_steps,
            "amplitude": json_number(block.drift_amplitude),
            "energy_drift": json_number(drift),
            "halving_ratio": json_number(ratio),
        },
    });
    Ok(report)
}
