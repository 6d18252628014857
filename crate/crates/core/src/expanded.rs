//! Second-order systems on the doubled (a, b) Fock space.
//!
//! A point (φ, φ̇) is encoded as v = exp(Σ_j w_j φ_j a_j⁺ + φ̇_j b_j⁺)|0⟩, so
//! a_j v = w_j φ_j v and b_j v = φ̇_j v. The reification operator X maps
//! a ↦ (a + a⁺)/√2 and a⁺ ↦ (a⁺ − a)/√2 under conjugation (likewise for b);
//! z-picture operators are obtained by applying that automorphism symbolically.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::algebra::{ClassicalPoly, Family, Generator, OperatorPoly, Var, VarKind};
use crate::dynamics::{integrate_to, HamiltonianSystem};
use crate::error::{Error, Result};
use crate::fock::encode::{check_tail, exponential_state};
use crate::fock::matrix::{block_max_abs, max_abs};
use crate::fock::{apply_poly, realize, CMatrix, FockSpace, OperatorMatrix, PhasePoint, StateVector};

pub const X_GUARD_TOL: f64 = 1e-6;
pub const GAIN_GUARD_TOL: f64 = 1e-6;
pub const ENERGY_GUARD_TOL: f64 = 1e-6;
pub const ANTI_HERMITIAN_TOL: f64 = 1e-8;
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Largest condition number accepted by [`Reification::decode`].
pub const MAX_CONDITION: f64 = 1e14;

const FD_STEP: f64 = 1e-4;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// φ̈_j = −w_j² φ_j + g_j(φ) with g_j = −∂f/∂φ_j.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderSystem {
    w: Vec<f64>,
    f: ClassicalPoly,
    g: Vec<ClassicalPoly>,
}

impl SecondOrderSystem {
    pub fn new(w: Vec<f64>, f: ClassicalPoly) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Domain("a second-order system needs at least one mode".into()));
        }
        if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Domain("frequencies must be positive".into()));
        }
        if f.has_kind(VarKind::Pi) || f.has_kind(VarKind::PhiDot) {
            return Err(Error::Domain("the interaction may depend on phi only".into()));
        }
        let n = w.len();
        let f = f.with_modes(n)?;
        let g = (1..=n).map(|j| f.partial_derivative(Var::phi(j)).scale(-1.0)).collect::<Result<Vec<_>>>()?;
        Ok(Self { w, f, g })
    }

    pub fn modes(&self) -> usize {
        self.w.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.w
    }

    pub fn interaction(&self) -> &ClassicalPoly {
        &self.f
    }

    pub fn gains(&self) -> &[ClassicalPoly] {
        &self.g
    }

    /// H = Σ ½π_j² + ½w_j²φ_j² + f(φ).
    pub fn hamiltonian(&self) -> Result<ClassicalPoly> {
        let n = self.modes();
        let mut h = self.f.clone();
        for (j, &w) in self.w.iter().enumerate() {
            let pi = ClassicalPoly::monomial(n, 0.5, [(Var::pi(j + 1), 2)])?;
            let phi = ClassicalPoly::monomial(n, 0.5 * w * w, [(Var::phi(j + 1), 2)])?;
            h = h.add(&pi)?.add(&phi)?;
        }
        Ok(h)
    }

    pub fn hamiltonian_system(&self) -> Result<HamiltonianSystem> {
        HamiltonianSystem::new(self.hamiltonian()?)
    }

    /// Classical energy of (φ, φ̇); the point's `pi` field holds φ̇.
    pub fn energy(&self, p: &PhasePoint) -> Result<f64> {
        Ok(self.hamiltonian()?.eval(&p.phi, &p.pi))
    }

    /// −w_j²φ_j + g_j(φ).
    pub fn force(&self, phi: &[f64]) -> Vec<f64> {
        self.w.iter().zip(&self.g).enumerate().map(|(j, (w, g))| -w * w * phi[j] + g.eval(phi, phi)).collect()
    }

    /// Hessian of the potential Σ½w²φ² + f at φ.
    pub fn potential_hessian(&self, phi: &[f64]) -> CMatrix {
        let n = self.modes();
        CMatrix::from_fn(n, n, |i, k| {
            let dg = self.g[i].partial_derivative(Var::phi(k + 1)).eval(phi, phi);
            let diag = if i == k { self.w[i] * self.w[i] } else { 0.0 };
            c(diag - dg)
        })
    }

    /// Newton iteration on the force, rejecting equilibria whose Hessian is singular.
    pub fn find_equilibrium(&self, guess: &[f64]) -> Result<Vec<f64>> {
        if guess.len() != self.modes() {
            return Err(Error::ShapeMismatch(format!("{} components for {} modes", guess.len(), self.modes())));
        }
        let mut phi = guess.to_vec();
        for _ in 0..100 {
            let f = self.force(&phi);
            let hess = self.potential_hessian(&phi);
            let eig = hess.clone().symmetric_eigenvalues();
            let smallest = eig.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
            if smallest < 1e-10 {
                return Err(Error::DegenerateEquilibrium { eigenvalue: smallest });
            }
            if f.iter().map(|x| x.abs()).fold(0.0, f64::max) <= 1e-14 {
                return Ok(phi);
            }
            let rhs = DVector::from_iterator(f.len(), f.iter().map(|&x| c(x)));
            // H δ = F since the force is −∇V
            let step = hess.lu().solve(&rhs).ok_or(Error::DegenerateEquilibrium { eigenvalue: 0.0 })?;
            for (p, s) in phi.iter_mut().zip(step.iter()) {
                *p += s.re;
            }
        }
        let res = self.force(&phi).iter().map(|x| x.abs()).fold(0.0, f64::max);
        if res <= EQUILIBRIUM_TOL {
            Ok(phi)
        } else {
            Err(Error::NoConvergence { iterations: 100 })
        }
    }
}

fn gen(n: usize, g: Generator) -> Result<OperatorPoly> {
    OperatorPoly::generator(n, g)
}

/// f with φ_j ↦ a_j / w_j and φ̇_j (or π_j) ↦ b_j; annihilators only.
pub fn annihilator_image(w: &[f64], f: &ClassicalPoly) -> Result<OperatorPoly> {
    let n = w.len();
    let f = f.clone().with_modes(n)?;
    let mut out = OperatorPoly::zero(n);
    for term in f.terms() {
        let mut p = OperatorPoly::constant(n, c(term.coefficient))?;
        for (v, e) in term.exponents.iter() {
            let base = match v.kind {
                VarKind::Phi => gen(n, Generator::a(v.mode))?.scale(c(1.0 / w[v.mode - 1]))?,
                VarKind::Pi | VarKind::PhiDot => gen(n, Generator::b(v.mode))?,
            };
            p = p.multiply(&base.pow(e)?)?;
        }
        out = out.add(&p)?;
    }
    Ok(out)
}

/// The X-conjugation automorphism: c ↦ (c + c⁺)/√2, c⁺ ↦ (c⁺ − c)/√2 for c ∈ {a_j, b_j}.
pub fn reify_symbolic(p: &OperatorPoly) -> Result<OperatorPoly> {
    let n = p.modes();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    p.substitute(n, |g| {
        let lower = Generator { dagger: false, ..g };
        let upper = Generator { dagger: true, ..g };
        let lo = gen(n, lower)?;
        let up = gen(n, upper)?;
        if g.dagger {
            up.sub(&lo)?.scale(c(r))
        } else {
            lo.add(&up)?.scale(c(r))
        }
    })
}

fn check_expanded(space: FockSpace, modes: usize) -> Result<()> {
    if !space.is_expanded() {
        return Err(Error::FamilyMismatch(Family::B));
    }
    if space.modes() != modes {
        return Err(Error::ModeMismatch { left: space.modes(), right: modes });
    }
    Ok(())
}

/// v = exp(Σ_j w_j φ_j a_j⁺ + φ̇_j b_j⁺)|0⟩ for the point (φ, φ̇).
pub fn encode_v(space: FockSpace, w: &[f64], point: &PhasePoint) -> Result<StateVector> {
    check_expanded(space, w.len())?;
    if point.modes() != w.len() {
        return Err(Error::ShapeMismatch(format!("{}-mode point for {} frequencies", point.modes(), w.len())));
    }
    let amps: Vec<Complex64> =
        point.phi.iter().zip(w).map(|(p, w)| c(w * p)).chain(point.pi.iter().map(|&d| c(d))).collect();
    check_tail(space.cutoff(), &amps)?;
    exponential_state(space, &amps, 1.0)
}

/// Applies an annihilator-only polynomial; daggered generators are rejected.
pub fn apply_annihilators(p: &OperatorPoly, v: &StateVector) -> Result<StateVector> {
    if p.has_dagger() {
        return Err(Error::Daggered);
    }
    apply_poly(p, v)
}

/// f(a/w, b) v.
pub fn apply_classical_function(space: FockSpace, w: &[f64], f: &ClassicalPoly, v: &StateVector) -> Result<StateVector> {
    check_expanded(space, w.len())?;
    apply_annihilators(&annihilator_image(w, f)?, v)
}

/// One slot of X: 2^{1/4} e^{−c⁺²/2} diag(2^{k/2}) e^{−c²/2}, exact on the truncated block.
fn reification_slot(cutoff: usize) -> CMatrix {
    let d = cutoff + 1;
    let ln_fact: Vec<f64> = (0..d).scan(0.0, |acc, k| {
        if k > 0 {
            *acc += (k as f64).ln();
        }
        Some(*acc)
    }).collect();
    // L_{k+2m, k} = (−½)^m / m! · √((k+2m)!/k!)
    let lower = CMatrix::from_fn(d, d, |i, k| {
        if i < k || (i - k) % 2 == 1 {
            return c(0.0);
        }
        let m = (i - k) / 2;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let mag = (-(m as f64) * 2f64.ln() - ln_fact[m] + 0.5 * (ln_fact[i] - ln_fact[k])).exp();
        c(sign * mag)
    });
    let diag = CMatrix::from_fn(d, d, |i, k| if i == k { c(2f64.powf(0.25 + 0.5 * i as f64)) } else { c(0.0) });
    &lower * diag * lower.transpose()
}

/// Reification operator with its acceptance diagnostics.
#[derive(Clone, Debug)]
pub struct Reification {
    matrix: OperatorMatrix,
    slot: CMatrix,
    /// Worst relative interior conjugation residual over generators.
    pub guard_residual: f64,
    /// Condition number of X (the single-slot value raised to the slot count).
    pub condition: f64,
}

impl Reification {
    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    /// Relative residual ‖(X c − σ(c) X)‖ on occupations ≤ N − 1 for one generator.
    pub fn conjugation_residual(&self, g: Generator) -> Result<f64> {
        let space = self.matrix.space();
        let n = space.modes();
        let lhs = self.matrix.mul(&realize(space, &gen(n, g)?)?)?;
        let image = reify_symbolic(&gen(n, g)?)?;
        let rhs = realize(space, &image)?.mul(&self.matrix)?;
        let diff = lhs.sub(&rhs)?;
        let inner = space.interior(1);
        Ok(diff.block_max_abs(&inner, &inner) / max_abs(self.matrix.entries()))
    }

    /// Relative residual ‖X O_v − O_z X‖ on occupations ≤ N − margin.
    pub fn similarity_residual(&self, ov: &OperatorMatrix, oz: &OperatorMatrix, margin: usize) -> Result<f64> {
        let diff = self.matrix.mul(ov)?.sub(&oz.mul(&self.matrix)?)?;
        let inner = self.matrix.space().interior(margin);
        let scale = max_abs(self.matrix.entries()) * max_abs(ov.entries()).max(max_abs(oz.entries())).max(1.0);
        Ok(block_max_abs(diff.entries(), &inner, &inner) / scale)
    }

    pub fn encode(&self, v: &StateVector) -> Result<StateVector> {
        self.matrix.apply(v)
    }

    /// v = X⁻¹ z by LU solve.
    pub fn decode(&self, z: &StateVector) -> Result<StateVector> {
        if self.condition > MAX_CONDITION {
            return Err(Error::IllConditioned { condition: self.condition });
        }
        let lu = self.matrix.entries().clone().lu();
        let v = lu.solve(z.entries()).ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
        StateVector::new(z.space(), v)
    }

    pub fn slot_matrix(&self) -> &CMatrix {
        &self.slot
    }
}

/// Builds X on an expanded space and accepts it only if the conjugation guard passes.
pub fn reification_x(space: FockSpace) -> Result<Reification> {
    if !space.is_expanded() {
        return Err(Error::FamilyMismatch(Family::B));
    }
    let slot = reification_slot(space.cutoff());
    let mut full = slot.clone();
    for _ in 1..space.slots() {
        full = full.kronecker(&slot);
    }
    let sv = slot.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = (smax / smin).powi(space.slots() as i32);
    let mut x = Reification { matrix: OperatorMatrix::new(space, full)?, slot, guard_residual: 0.0, condition };
    let mut worst = 0.0f64;
    for j in 1..=space.modes() {
        for g in [Generator::a(j), Generator::a_dag(j), Generator::b(j), Generator::b_dag(j)] {
            worst = worst.max(x.conjugation_residual(g)?);
        }
    }
    x.guard_residual = worst;
    if worst > X_GUARD_TOL {
        return Err(Error::TranscriptionGuard { check: "X conjugation".into(), residual: worst, threshold: X_GUARD_TOL });
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Picture {
    V,
    Z,
}

/// Symbolic gain operators G0 = Σ w_j(a_j⁺b_j − b_j⁺a_j) and GI = Σ b_j⁺ g_j(a/w).
pub fn gain_polys(sys: &SecondOrderSystem, picture: Picture) -> Result<(OperatorPoly, OperatorPoly)> {
    let n = sys.modes();
    let mut g0 = OperatorPoly::zero(n);
    let mut gi = OperatorPoly::zero(n);
    for j in 1..=n {
        let w = sys.w[j - 1];
        let ab = gen(n, Generator::a_dag(j))?.multiply(&gen(n, Generator::b(j))?)?;
        let ba = gen(n, Generator::b_dag(j))?.multiply(&gen(n, Generator::a(j))?)?;
        g0 = g0.add(&ab.sub(&ba)?.scale(c(w))?)?;
        let g = annihilator_image(&sys.w, &sys.g[j - 1])?;
        gi = gi.add(&gen(n, Generator::b_dag(j))?.multiply(&g)?)?;
    }
    match picture {
        Picture::V => Ok((g0, gi)),
        Picture::Z => Ok((reify_symbolic(&g0)?, reify_symbolic(&gi)?)),
    }
}

#[derive(Clone, Debug)]
pub struct GainOperators {
    pub g0: OperatorMatrix,
    pub gi: OperatorMatrix,
    pub total: OperatorMatrix,
    pub picture: Picture,
    /// Guard value: finite-difference residual (v picture) or interior anti-Hermiticity (z picture).
    pub guard_residual: f64,
}

/// Probe point used by the construction guards.
fn probe(n: usize) -> PhasePoint {
    PhasePoint { phi: vec![0.3; n], pi: vec![0.2; n] }
}

/// ‖(v(t+h) − v(t−h))/2h − G v(t)‖ / ‖v(t)‖ along the classical trajectory from `start`.
pub fn finite_difference_residual(
    space: FockSpace,
    sys: &SecondOrderSystem,
    gain: &OperatorMatrix,
    start: &PhasePoint,
    t: f64,
    h: f64,
) -> Result<f64> {
    let hs = sys.hamiltonian_system()?;
    let steps = (t / 1e-3).round() as usize;
    let at = if steps == 0 { start.clone() } else { integrate_to(&hs, start, t / steps as f64, steps)? };
    let fwd = integrate_to(&hs, &at, h, 1)?;
    let back = integrate_to(&hs, &at, -h, 1)?;
    let v = encode_v(space, &sys.w, &at)?;
    let fd = encode_v(space, &sys.w, &fwd)?.sub(&encode_v(space, &sys.w, &back)?)?.scale(c(0.5 / h));
    let gv = gain.apply(&v)?;
    Ok(fd.sub(&gv)?.norm() / v.norm())
}

/// Largest entry of G + G† on occupations ≤ N − 1.
pub fn interior_anti_hermiticity(g: &OperatorMatrix) -> f64 {
    let s = g.add(&g.adjoint()).expect("same space");
    let inner = g.space().interior(1);
    s.block_max_abs(&inner, &inner)
}

pub fn gain_operators(space: FockSpace, sys: &SecondOrderSystem, picture: Picture) -> Result<GainOperators> {
    check_expanded(space, sys.modes())?;
    let (g0p, gip) = gain_polys(sys, picture)?;
    let g0 = realize(space, &g0p)?;
    let gi = realize(space, &gip)?;
    let total = g0.add(&gi)?;
    let guard_residual = match picture {
        Picture::V => {
            let r = finite_difference_residual(space, sys, &total, &probe(sys.modes()), 0.0, FD_STEP)?;
            if r > GAIN_GUARD_TOL {
                return Err(Error::TranscriptionGuard { check: "gain finite difference".into(), residual: r, threshold: GAIN_GUARD_TOL });
            }
            r
        }
        Picture::Z => {
            let r = interior_anti_hermiticity(&total);
            if r > ANTI_HERMITIAN_TOL {
                return Err(Error::TranscriptionGuard { check: "z-gain anti-Hermiticity".into(), residual: r, threshold: ANTI_HERMITIAN_TOL });
            }
            r
        }
    };
    Ok(GainOperators { g0, gi, total, picture, guard_residual })
}

/// z = X v.
pub fn encode_z(x: &Reification, w: &[f64], point: &PhasePoint) -> Result<StateVector> {
    x.encode(&encode_v(x.matrix.space(), w, point)?)
}

/// Φ_j = (a_j + a_j⁺)/(√2 w_j): the z-picture image of a_j / w_j.
pub fn phi_vector_op(space: FockSpace, w: &[f64], j: usize) -> Result<OperatorMatrix> {
    check_expanded(space, w.len())?;
    if j == 0 || j > w.len() {
        return Err(Error::BadModeIndex { mode: j, modes: w.len() });
    }
    let n = w.len();
    let a = gen(n, Generator::a(j))?.scale(c(1.0 / w[j - 1]))?;
    realize(space, &reify_symbolic(&a)?)
}

/// H_v = Σ ½(a_j² + b_j²) + f(a/w).
pub fn hv_poly(sys: &SecondOrderSystem) -> Result<OperatorPoly> {
    let n = sys.modes();
    let mut h = annihilator_image(&sys.w, &sys.f)?;
    for j in 1..=n {
        h = h.add(&gen(n, Generator::a(j))?.pow(2)?.scale(c(0.5))?)?;
        h = h.add(&gen(n, Generator::b(j))?.pow(2)?.scale(c(0.5))?)?;
    }
    Ok(h)
}

#[derive(Clone, Debug)]
pub struct EnergyOperator {
    pub matrix: OperatorMatrix,
    pub guard_residual: f64,
}

fn energy_guard(
    space: FockSpace,
    sys: &SecondOrderSystem,
    m: &OperatorMatrix,
    x: Option<&Reification>,
    margin: usize,
) -> Result<f64> {
    let p = probe(sys.modes());
    let e = sys.energy(&p)?;
    let v = encode_v(space, &sys.w, &p)?;
    let rep = match x {
        Some(x) => classify_energy_operator_interior(m, &[x.encode(&v)?], Some(&[e]), ENERGY_GUARD_TOL, margin)?,
        None => classify_energy_operator(m, &[v], Some(&[e]), ENERGY_GUARD_TOL)?,
    };
    Ok(rep.lambda_residuals[0])
}

pub fn build_hv(space: FockSpace, sys: &SecondOrderSystem) -> Result<EnergyOperator> {
    check_expanded(space, sys.modes())?;
    let matrix = realize(space, &hv_poly(sys)?)?;
    let r = energy_guard(space, sys, &matrix, None, 0)?;
    if r > ENERGY_GUARD_TOL {
        return Err(Error::TranscriptionGuard { check: "H_v eigen-relation".into(), residual: r, threshold: ENERGY_GUARD_TOL });
    }
    Ok(EnergyOperator { matrix, guard_residual: r })
}

/// H_z = X H_v X⁻¹, built through the symbolic automorphism.
pub fn build_hz(x: &Reification, sys: &SecondOrderSystem) -> Result<EnergyOperator> {
    let space = x.matrix.space();
    check_expanded(space, sys.modes())?;
    let hv = hv_poly(sys)?;
    let matrix = realize(space, &reify_symbolic(&hv)?)?;
    let r = energy_guard(space, sys, &matrix, Some(x), hv.degree())?;
    if r > ENERGY_GUARD_TOL {
        return Err(Error::TranscriptionGuard { check: "H_z eigen-relation".into(), residual: r, threshold: ENERGY_GUARD_TOL });
    }
    Ok(EnergyOperator { matrix, guard_residual: r })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyKind {
    LambdaType,
    QType,
    Neither,
}

#[derive(Clone, Debug)]
pub struct EnergyClassification {
    pub kind: EnergyKind,
    pub energies: Vec<f64>,
    /// ‖Hv − Ev‖ / ‖v‖ per state.
    pub lambda_residuals: Vec<f64>,
    /// |v†Hv − E‖v‖²| / ‖v‖² per state.
    pub q_residuals: Vec<f64>,
    pub tolerance: f64,
}

/// Classifies H against the states; energies default to the Rayleigh quotients.
pub fn classify_energy_operator(
    h: &OperatorMatrix,
    states: &[StateVector],
    energies: Option<&[f64]>,
    tol: f64,
) -> Result<EnergyClassification> {
    classify_rows(h, states, energies, tol, None)
}

/// As [`classify_energy_operator`], with every norm and inner product taken over
/// occupations ≤ N − margin. Used for z vectors, whose weight sits at the cutoff.
pub fn classify_energy_operator_interior(
    h: &OperatorMatrix,
    states: &[StateVector],
    energies: Option<&[f64]>,
    tol: f64,
    margin: usize,
) -> Result<EnergyClassification> {
    classify_rows(h, states, energies, tol, Some(h.space().interior(margin)))
}

fn restricted(v: &DVector<Complex64>, rows: &Option<Vec<usize>>) -> DVector<Complex64> {
    match rows {
        Some(r) => DVector::from_iterator(r.len(), r.iter().map(|&i| v[i])),
        None => v.clone(),
    }
}

fn classify_rows(
    h: &OperatorMatrix,
    states: &[StateVector],
    energies: Option<&[f64]>,
    tol: f64,
    rows: Option<Vec<usize>>,
) -> Result<EnergyClassification> {
    if let Some(e) = energies {
        if e.len() != states.len() {
            return Err(Error::ShapeMismatch(format!("{} energies for {} states", e.len(), states.len())));
        }
    }
    let mut out = EnergyClassification {
        kind: EnergyKind::Neither,
        energies: Vec::with_capacity(states.len()),
        lambda_residuals: Vec::with_capacity(states.len()),
        q_residuals: Vec::with_capacity(states.len()),
        tolerance: tol,
    };
    for (k, v) in states.iter().enumerate() {
        let hv = restricted(h.apply(v)?.entries(), &rows);
        let v = restricted(v.entries(), &rows);
        let nsq = v.norm_squared();
        if nsq == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let quad = v.dotc(&hv);
        let e = energies.map_or(quad.re / nsq, |e| e[k]);
        out.energies.push(e);
        out.lambda_residuals.push((&hv - &v * c(e)).norm() / nsq.sqrt());
        out.q_residuals.push((quad - c(e * nsq)).norm() / nsq);
    }
    out.kind = if out.lambda_residuals.iter().all(|r| *r <= tol) {
        EnergyKind::LambdaType
    } else if out.q_residuals.iter().all(|r| *r <= tol) {
        EnergyKind::QType
    } else {
        EnergyKind::Neither
    };
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumResidual {
    pub v_picture: f64,
    pub z_picture: Option<f64>,
}

/// ‖G v‖/‖v‖ at a classical equilibrium (and ‖G_z z‖/‖z‖ when X is supplied).
pub fn equilibrium_gain_check(
    space: FockSpace,
    sys: &SecondOrderSystem,
    point: &PhasePoint,
    x: Option<&Reification>,
) -> Result<EquilibriumResidual> {
    check_expanded(space, sys.modes())?;
    let force = sys.force(&point.phi);
    let res = force.iter().chain(&point.pi).map(|v| v.abs()).fold(0.0, f64::max);
    if res > EQUILIBRIUM_TOL {
        return Err(Error::NonEquilibrium { residual: res });
    }
    let gv = gain_operators(space, sys, Picture::V)?;
    let v = encode_v(space, &sys.w, point)?;
    let v_picture = gv.total.apply(&v)?.norm() / v.norm();
    let z_picture = match x {
        Some(x) => {
            let gz = gain_operators(space, sys, Picture::Z)?;
            let z = x.encode(&v)?;
            let rows = Some(space.interior(gain_polys(sys, Picture::Z)?.1.degree().max(2)));
            let gzz = restricted(gz.total.apply(&z)?.entries(), &rows);
            Some(gzz.norm() / restricted(z.entries(), &rows).norm())
        }
        None => None,
    };
    Ok(EquilibriumResidual { v_picture, z_picture })
}

/// Largest |‖exp(G t) z‖ − ‖z‖| over the given times, with G anti-Hermitian.
pub fn z_norm_drift(g: &OperatorMatrix, z: &StateVector, times: &[f64]) -> Result<f64> {
    // G = −iK with K = iG Hermitian
    let k = g.scale(Complex64::new(0.0, 1.0));
    let herm = (k.entries() + k.entries().adjoint()) * c(0.5);
    let eig = herm.symmetric_eigen();
    let coords = eig.eigenvectors.adjoint() * z.entries();
    let n0 = z.norm();
    let mut worst = 0.0f64;
    for &t in times {
        let evolved = DVector::from_iterator(
            coords.len(),
            coords.iter().zip(eig.eigenvalues.iter()).map(|(a, l)| a * Complex64::from_polar(1.0, -l * t)),
        );
        let zt = &eig.eigenvectors * evolved;
        worst = worst.max((zt.norm() - n0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_poly;

    fn pt(phi: f64, phidot: f64) -> PhasePoint {
        PhasePoint::new(vec![phi], vec![phidot]).unwrap()
    }

    fn free() -> SecondOrderSystem {
        SecondOrderSystem::new(vec![1.0], ClassicalPoly::zero(1)).unwrap()
    }

    #[test]
    fn second_order_examples() {
        let s = free();
        assert_eq!(s.hamiltonian().unwrap(), parse_poly("0.5*pi1^2 + 0.5*phi1^2").unwrap());
        let q = SecondOrderSystem::new(vec![1.0], parse_poly("0.25*phi1^4").unwrap()).unwrap();
        assert_eq!(q.force(&[1.0]), vec![-2.0]);
        assert_eq!(q.gains()[0], parse_poly("-1*phi1^3").unwrap());
        assert!(SecondOrderSystem::new(vec![1.0], parse_poly("pi1^2").unwrap()).is_err());
        assert!(SecondOrderSystem::new(vec![0.0], ClassicalPoly::zero(1)).is_err());
    }

    #[test]
    fn degenerate_equilibrium_rejected() {
        let s = SecondOrderSystem::new(vec![1.0], parse_poly("-0.5*phi1^2").unwrap()).unwrap();
        assert!(matches!(s.find_equilibrium(&[0.0]), Err(Error::DegenerateEquilibrium { .. })));
        let dw = SecondOrderSystem::new(vec![1.0], parse_poly("-1*phi1^2 + 0.25*phi1^4").unwrap()).unwrap();
        let eq = dw.find_equilibrium(&[1.3]).unwrap();
        assert!((eq[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn encode_v_eigenrelations() {
        let space = FockSpace::expanded(1, 25).unwrap();
        assert_eq!(encode_v(space, &[1.0], &pt(0.0, 0.0)).unwrap(), StateVector::vacuum(space));
        let v = encode_v(space, &[1.0], &pt(0.5, 0.0)).unwrap();
        for k in 0..=25 {
            for l in 1..=25 {
                assert_eq!(v.component(&[k, l]), c(0.0));
            }
        }
        let a = realize(space, &gen(1, Generator::a(1)).unwrap()).unwrap();
        assert!(a.apply(&v).unwrap().sub(&v.scale(c(0.5))).unwrap().norm() / v.norm() <= 1e-8);

        let w = [1.7];
        let v = encode_v(space, &w, &pt(0.4, -0.3)).unwrap();
        let av = a.apply(&v).unwrap();
        assert!(av.sub(&v.scale(c(1.7 * 0.4))).unwrap().norm() / v.norm() <= 1e-8);
        let b = realize(space, &gen(1, Generator::b(1)).unwrap()).unwrap();
        assert!(b.apply(&v).unwrap().sub(&v.scale(c(-0.3))).unwrap().norm() / v.norm() <= 1e-8);
    }

    #[test]
    fn classical_functions_act_as_scalars() {
        let space = FockSpace::expanded(1, 20).unwrap();
        let v = encode_v(space, &[1.0], &pt(0.5, 0.2)).unwrap();
        let sq = apply_classical_function(space, &[1.0], &parse_poly("phi1^2").unwrap(), &v).unwrap();
        assert!(sq.sub(&v.scale(c(0.25))).unwrap().norm() / v.norm() <= 1e-8);
        let one = apply_classical_function(space, &[1.0], &ClassicalPoly::constant(1, 1.0).unwrap(), &v).unwrap();
        assert_eq!(one, v);
        let mixed = apply_classical_function(space, &[1.0], &parse_poly("phi1*phidot1").unwrap(), &v).unwrap();
        assert!(mixed.sub(&v.scale(c(0.1))).unwrap().norm() / v.norm() <= 1e-8);
        let dag = gen(1, Generator::a_dag(1)).unwrap();
        assert!(matches!(apply_annihilators(&dag, &v), Err(Error::Daggered)));
    }

    #[test]
    fn reification_guard_at_cutoff_24() {
        let space = FockSpace::expanded(1, 24).unwrap();
        let x = reification_x(space).unwrap();
        assert!(x.guard_residual <= X_GUARD_TOL, "{}", x.guard_residual);
        assert!(x.condition.is_finite() && x.condition > 1.0);
        // origin encodes to the fixed vector X|0⟩
        let z0 = encode_z(&x, &[1.0], &pt(0.0, 0.0)).unwrap();
        assert!((z0.component(&[0, 0]) - c(2f64.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn z_encoding_is_linear() {
        let space = FockSpace::expanded(1, 12).unwrap();
        let x = reification_x(space).unwrap();
        let (p1, p2) = (pt(0.3, 0.1), pt(-0.2, 0.4));
        let v = encode_v(space, &[1.0], &p1).unwrap().add(&encode_v(space, &[1.0], &p2).unwrap()).unwrap().scale(c(0.5));
        let z = encode_z(&x, &[1.0], &p1).unwrap().add(&encode_z(&x, &[1.0], &p2).unwrap()).unwrap().scale(c(0.5));
        assert!(x.encode(&v).unwrap().sub(&z).unwrap().norm() <= 1e-12 * z.norm());
    }

    #[test]
    fn gain_finite_difference() {
        let space = FockSpace::expanded(1, 16).unwrap();
        let sys = free();
        let g = gain_operators(space, &sys, Picture::V).unwrap();
        let r = finite_difference_residual(space, &sys, &g.total, &pt(1.0, 0.0), 0.0, 1e-4).unwrap();
        assert!(r <= 1e-6, "{r}");
        let quartic = SecondOrderSystem::new(vec![1.3], parse_poly("0.25*phi1^4").unwrap()).unwrap();
        let gq = gain_operators(space, &quartic, Picture::V).unwrap();
        let r = finite_difference_residual(space, &quartic, &gq.total, &pt(0.4, -0.2), 0.7, 1e-4).unwrap();
        assert!(r <= 1e-6, "{r}");
    }

    #[test]
    fn z_gain_is_anti_hermitian_and_conjugate() {
        let space = FockSpace::expanded(1, 16).unwrap();
        let sys = SecondOrderSystem::new(vec![1.0], parse_poly("0.25*phi1^4").unwrap()).unwrap();
        let gz = gain_operators(space, &sys, Picture::Z).unwrap();
        assert!(gz.guard_residual <= 1e-8);
        let (g0v, _) = gain_polys(&sys, Picture::V).unwrap();
        let (g0z, _) = gain_polys(&sys, Picture::Z).unwrap();
        assert!(g0v.sub(&g0z).unwrap().is_symbolically_zero(1e-12));
        let x = reification_x(space).unwrap();
        let gv = gain_operators(space, &sys, Picture::V).unwrap();
        assert!(x.similarity_residual(&gv.total, &gz.total, 5).unwrap() <= 1e-10);
    }

    #[test]
    fn hv_eigenvalue_is_classical_energy() {
        let space = FockSpace::expanded(1, 16).unwrap();
        let sys = free();
        let hv = build_hv(space, &sys).unwrap();
        let p = pt(1.0, 0.0);
        let v = encode_v(space, &[1.0], &p).unwrap();
        let rep = classify_energy_operator(&hv.matrix, &[v], None, 1e-6).unwrap();
        assert_eq!(rep.kind, EnergyKind::LambdaType);
        assert!((rep.energies[0] - 0.5).abs() <= 1e-6);
    }

    #[test]
    fn classification_examples() {
        let s = FockSpace::new(1, 1).unwrap();
        let h = OperatorMatrix::new(s, CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(2.0)]))).unwrap();
        let e1 = StateVector::basis(s, 0);
        let r = classify_energy_operator(&h, std::slice::from_ref(&e1), None, 1e-12).unwrap();
        assert_eq!((r.kind, r.energies[0]), (EnergyKind::LambdaType, 1.0));
        let mix = e1.add(&StateVector::basis(s, 1)).unwrap().scale(c(std::f64::consts::FRAC_1_SQRT_2));
        let r = classify_energy_operator(&h, std::slice::from_ref(&mix), None, 1e-12).unwrap();
        assert_eq!(r.kind, EnergyKind::QType);
        assert!((r.energies[0] - 1.5).abs() < 1e-15);
        let id = OperatorMatrix::identity(s);
        let r = classify_energy_operator(&id, &[e1, mix], None, 1e-12).unwrap();
        assert_eq!(r.kind, EnergyKind::LambdaType);
        let zero = StateVector::new(s, DVector::zeros(2)).unwrap();
        assert!(matches!(classify_energy_operator(&id, &[zero], None, 1e-12), Err(Error::ZeroNorm)));
    }

    #[test]
    fn equilibrium_examples() {
        let space = FockSpace::expanded(1, 20).unwrap();
        let r = equilibrium_gain_check(space, &free(), &pt(0.0, 0.0), None).unwrap();
        assert!(r.v_picture <= 1e-10);
        let dw = SecondOrderSystem::new(vec![1.0], parse_poly("-1*phi1^2 + 0.25*phi1^4").unwrap()).unwrap();
        let eq = dw.find_equilibrium(&[0.8]).unwrap();
        let r = equilibrium_gain_check(space, &dw, &PhasePoint::new(eq, vec![0.0]).unwrap(), None).unwrap();
        assert!(r.v_picture <= 1e-6, "{r:?}");
        assert!(matches!(equilibrium_gain_check(space, &dw, &pt(0.5, 0.0), None), Err(Error::NonEquilibrium { .. })));
    }

    #[test]
    fn hz_on_z_vectors_and_norm_drift() {
        let space = FockSpace::expanded(1, 16).unwrap();
        let x = reification_x(space).unwrap();
        let sys = SecondOrderSystem::new(vec![1.0], parse_poly("0.25*phi1^4").unwrap()).unwrap();
        let hz = build_hz(&x, &sys).unwrap();
        let p = pt(0.4, 0.3);
        let z = encode_z(&x, &[1.0], &p).unwrap();
        let e = sys.energy(&p).unwrap();
        let rep = classify_energy_operator_interior(&hz.matrix, std::slice::from_ref(&z), Some(&[e]), 1e-6, 4).unwrap();
        assert_eq!(rep.kind, EnergyKind::LambdaType, "{rep:?}");
        let gz = gain_operators(space, &sys, Picture::Z).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        assert!(z_norm_drift(&gz.total, &z, &times).unwrap() <= 1e-8 * z.norm());
    }

    #[test]
    fn phi_vector_op_properties() {
        let space = FockSpace::expanded(1, 6).unwrap();
        let phi = phi_vector_op(space, &[1.0], 1).unwrap();
        assert_eq!(phi.hermiticity_defect(), 0.0);
        let nb = realize(space, &gen(1, Generator::b_dag(1)).unwrap().multiply(&gen(1, Generator::b(1)).unwrap()).unwrap()).unwrap();
        assert!(max_abs(phi.commutator(&nb).unwrap().entries()) == 0.0);
        assert!(matches!(phi_vector_op(space, &[1.0], 2), Err(Error::BadModeIndex { .. })));
    }
}
