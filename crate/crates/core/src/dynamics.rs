//! Hamiltonian ODE systems, RK4 integration and ensemble transport.

use std::fmt::Write as _;

use crate::algebra::{ClassicalPoly, Var, VarKind};
use crate::error::{Error, Result};
use crate::fock::{Ensemble, PhasePoint};
use crate::format::sig17;

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSystem {
    h: ClassicalPoly,
    dh_dphi: Vec<ClassicalPoly>,
    dh_dpi: Vec<ClassicalPoly>,
}

impl HamiltonianSystem {
    pub fn new(h: ClassicalPoly) -> Result<Self> {
        if h.has_kind(VarKind::PhiDot) {
            return Err(Error::Domain("Hamiltonians are written in phi and pi; phidot is not a canonical variable".into()));
        }
        let modes = h.modes();
        let dh_dphi = (1..=modes).map(|j| h.partial_derivative(Var::phi(j))).collect();
        let dh_dpi = (1..=modes).map(|j| h.partial_derivative(Var::pi(j))).collect();
        Ok(Self { h, dh_dphi, dh_dpi })
    }

    pub fn hamiltonian(&self) -> &ClassicalPoly {
        &self.h
    }

    pub fn modes(&self) -> usize {
        self.h.modes()
    }

    pub fn dh_dphi(&self) -> &[ClassicalPoly] {
        &self.dh_dphi
    }

    pub fn dh_dpi(&self) -> &[ClassicalPoly] {
        &self.dh_dpi
    }

    pub fn energy(&self, p: &PhasePoint) -> f64 {
        self.h.eval(&p.phi, &p.pi)
    }

    fn check(&self, p: &PhasePoint) -> Result<()> {
        if p.modes() != self.modes() {
            return Err(Error::ShapeMismatch(format!("{}-mode point for a {}-mode system", p.modes(), self.modes())));
        }
        Ok(())
    }

    /// (φ̇, π̇) = (∂H/∂π, −∂H/∂φ).
    pub fn vector_field(&self, p: &PhasePoint) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(p)?;
        Ok(self.field(&p.phi, &p.pi))
    }

    fn field(&self, phi: &[f64], pi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let phidot = self.dh_dpi.iter().map(|d| d.eval(phi, pi)).collect();
        let pidot = self.dh_dphi.iter().map(|d| -d.eval(phi, pi)).collect();
        (phidot, pidot)
    }

    fn rk4_step(&self, phi: &mut [f64], pi: &mut [f64], dt: f64) {
        let n = phi.len();
        let shifted = |base: &[f64], k: &[f64], s: f64| -> Vec<f64> { (0..n).map(|i| base[i] + s * k[i]).collect() };
        let (k1x, k1p) = self.field(phi, pi);
        let (k2x, k2p) = self.field(&shifted(phi, &k1x, dt / 2.0), &shifted(pi, &k1p, dt / 2.0));
        let (k3x, k3p) = self.field(&shifted(phi, &k2x, dt / 2.0), &shifted(pi, &k2p, dt / 2.0));
        let (k4x, k4p) = self.field(&shifted(phi, &k3x, dt), &shifted(pi, &k3p, dt));
        for i in 0..n {
            phi[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            pi[i] += dt / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &PhasePoint {
        self.states.last().expect("trajectories hold at least the start state")
    }

    /// `t,phi1,…,phin,pi1,…,pin`, one row per step.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, PhasePoint::modes);
        let mut out = String::from("t");
        for j in 1..=n {
            write!(out, ",phi{j}").unwrap();
        }
        for j in 1..=n {
            write!(out, ",pi{j}").unwrap();
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&sig17(*t));
            for x in s.phi.iter().chain(&s.pi) {
                out.push(',');
                out.push_str(&sig17(*x));
            }
            out.push('\n');
        }
        out
    }
}

/// Fixed-step RK4. A negative `dt` integrates backwards.
pub fn integrate(sys: &HamiltonianSystem, start: &PhasePoint, dt: f64, steps: usize, method: Method) -> Result<Trajectory> {
    let Method::Rk4 = method;
    sys.check(start)?;
    if !dt.is_finite() || dt == 0.0 {
        return Err(Error::InvalidStep(dt));
    }
    let mut phi = start.phi.clone();
    let mut pi = start.pi.clone();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(start.clone());
    for step in 1..=steps {
        sys.rk4_step(&mut phi, &mut pi, dt);
        if phi.iter().chain(&pi).any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
        times.push(step as f64 * dt);
        states.push(PhasePoint { phi: phi.clone(), pi: pi.clone() });
    }
    Ok(Trajectory { times, states })
}

/// Final state only, without storing the path.
pub fn integrate_to(sys: &HamiltonianSystem, start: &PhasePoint, dt: f64, steps: usize) -> Result<PhasePoint> {
    sys.check(start)?;
    if !dt.is_finite() || dt == 0.0 {
        return Err(Error::InvalidStep(dt));
    }
    let mut phi = start.phi.clone();
    let mut pi = start.pi.clone();
    for step in 1..=steps {
        sys.rk4_step(&mut phi, &mut pi, dt);
        if phi.iter().chain(&pi).any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
    }
    Ok(PhasePoint { phi, pi })
}

/// Advances every member independently; weights are carried unchanged.
pub fn evolve_ensemble(sys: &HamiltonianSystem, ens: &Ensemble, dt: f64, steps: usize) -> Result<Ensemble> {
    let points = ens.points().iter().map(|p| integrate_to(sys, p, dt, steps)).collect::<Result<Vec<_>>>()?;
    Ok(ens.with_points(points))
}

/// Σ_k w_k f(φ_k, π_k).
pub fn classical_expectation(ens: &Ensemble, f: &ClassicalPoly) -> Result<f64> {
    if let Some(m) = f.max_mode_index() {
        if m > ens.modes() {
            return Err(Error::BadModeIndex { mode: m, modes: ens.modes() });
        }
    }
    Ok(ens.iter().map(|(p, w)| w * f.eval(&p.phi, &p.pi)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_poly;

    fn sys(text: &str) -> HamiltonianSystem {
        HamiltonianSystem::new(parse_poly(text).unwrap()).unwrap()
    }

    fn pt(phi: f64, pi: f64) -> PhasePoint {
        PhasePoint::new(vec![phi], vec![pi]).unwrap()
    }

    #[test]
    fn vector_field_examples() {
        assert_eq!(sys("0.5*pi1^2 + 0.5*phi1^2").vector_field(&pt(1.0, 0.0)).unwrap(), (vec![0.0], vec![-1.0]));
        assert_eq!(sys("0.5*pi1^2 + 0.25*phi1^4").vector_field(&pt(1.0, 0.0)).unwrap(), (vec![0.0], vec![-1.0]));
        assert_eq!(sys("0.5*pi1^2").vector_field(&pt(0.0, 2.0)).unwrap(), (vec![2.0], vec![0.0]));
    }

    #[test]
    fn harmonic_quarter_period() {
        let s = sys("0.5*pi1^2 + 0.5*phi1^2");
        let steps = 1571;
        let dt = std::f64::consts::FRAC_PI_2 / steps as f64;
        let end = integrate_to(&s, &pt(1.0, 0.0), dt, steps).unwrap();
        assert!(end.phi[0].abs() < 1e-8 && (end.pi[0] + 1.0).abs() < 1e-8, "{end:?}");
    }

    #[test]
    fn harmonic_closed_form_over_ten() {
        let s = sys("0.5*pi1^2 + 0.5*phi1^2");
        let tr = integrate(&s, &pt(0.3, -0.7), 1e-3, 10_000, Method::Rk4).unwrap();
        for (t, p) in tr.times.iter().zip(&tr.states) {
            assert!((p.phi[0] - (0.3 * t.cos() - 0.7 * t.sin())).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_hamiltonian_is_static() {
        let s = HamiltonianSystem::new(ClassicalPoly::zero(2)).unwrap();
        let start = PhasePoint::new(vec![0.1, 0.2], vec![0.3, 0.4]).unwrap();
        assert_eq!(integrate_to(&s, &start, 0.1, 50).unwrap(), start);
    }

    #[test]
    fn quartic_energy_drift() {
        let s = sys("0.5*pi1^2 + 0.25*phi1^4");
        let start = pt(1.0, 0.0);
        let end = integrate_to(&s, &start, 1e-3, 10_000).unwrap();
        assert!((s.energy(&end) - s.energy(&start)).abs() <= 1e-9);
    }

    #[test]
    fn reversibility() {
        let s = sys("0.5*pi1^2 + 0.5*phi1^2 + 0.25*phi1^4");
        let start = pt(0.8, -0.3);
        let fwd = integrate_to(&s, &start, 1e-3, 10_000).unwrap();
        let back = integrate_to(&s, &fwd, -1e-3, 10_000).unwrap();
        assert!((back.phi[0] - 0.8).abs() < 1e-8 && (back.pi[0] + 0.3).abs() < 1e-8);
    }

    #[test]
    fn ensemble_transport() {
        let s = sys("0.5*pi1^2 + 0.25*phi1^4");
        let ens = Ensemble::uniform(vec![pt(1.0, 0.0), pt(-1.0, 0.0)]).unwrap();
        let out = evolve_ensemble(&s, &ens, 1e-2, 300).unwrap();
        assert_eq!(out.weights(), ens.weights());
        assert!(classical_expectation(&out, &parse_poly("phi1").unwrap()).unwrap().abs() < 1e-15);
        let single = evolve_ensemble(&s, &Ensemble::point(pt(1.0, 0.0)), 1e-2, 300).unwrap();
        assert_eq!(single.points()[0], integrate_to(&s, &pt(1.0, 0.0), 1e-2, 300).unwrap());
    }

    #[test]
    fn expectation_examples() {
        let ens = Ensemble::uniform(vec![pt(1.0, 0.0), pt(-1.0, 0.0)]).unwrap();
        assert_eq!(classical_expectation(&ens, &parse_poly("phi1").unwrap()).unwrap(), 0.0);
        assert_eq!(classical_expectation(&ens, &parse_poly("phi1^2").unwrap()).unwrap(), 1.0);
        let p = Ensemble::point(pt(0.3, 0.1));
        assert!((classical_expectation(&p, &parse_poly("phi1*pi1").unwrap()).unwrap() - 0.03).abs() < 1e-16);
    }

    #[test]
    fn invalid_step_rejected() {
        let s = sys("0.5*pi1^2");
        assert!(matches!(integrate(&s, &pt(0.0, 1.0), 0.0, 3, Method::Rk4), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn blow_up_reports_step() {
        let s = sys("0.5*pi1^2 - 0.25*phi1^4");
        match integrate(&s, &pt(3.0, 0.0), 0.5, 200, Method::Rk4) {
            Err(Error::NonFiniteState { step }) => assert!(step > 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let s = sys("0.5*pi2^2 + 0.5*phi1^2");
        let tr = integrate(&s, &PhasePoint::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap(), 0.5, 2, Method::Rk4).unwrap();
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,phi1,phi2,pi1,pi2");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0.0000000000000000e0,1.0000000000000000e0"));
    }
}
