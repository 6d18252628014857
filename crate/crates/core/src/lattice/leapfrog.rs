//! Kick-drift-kick leapfrog for π̇ = Δφ − m²φ − f'(φ), φ̇ = π.
//!
//! `f` is a local potential density in the per-site field values
//! `phi1..phiN`; it is evaluated independently at each site.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{dispersion, laplacian, LatticeSpec, LatticeState};
use crate::algebra::{ClassicalPoly, Var, VarKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LeapfrogRun {
    pub times: Vec<f64>,
    pub states: Vec<LatticeState>,
    pub energies: Vec<f64>,
}

impl LeapfrogRun {
    /// max |E(t) − E(0)|.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energies[0];
        self.energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    pub fn final_state(&self) -> &LatticeState {
        self.states.last().expect("run has at least the initial state")
    }

    /// Field `j` at site `x` along the recorded times.
    pub fn site_series(&self, j: usize, x: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.phi[j][x]).collect()
    }
}

struct Stepper<'a> {
    spec: &'a LatticeSpec,
    waves: Vec<Vec<Complex64>>,
    grads: Vec<ClassicalPoly>,
    f: Option<&'a ClassicalPoly>,
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a LatticeSpec, f: Option<&'a ClassicalPoly>) -> Result<Self> {
        if let Some(f) = f {
            if f.has_kind(VarKind::Pi) || f.has_kind(VarKind::PhiDot) {
                return Err(Error::Domain("potential density may depend on phi only".into()));
            }
            if f.max_mode_index().unwrap_or(0) > spec.fields {
                return Err(Error::BadModeIndex { mode: f.max_mode_index().unwrap_or(0), modes: spec.fields });
            }
        }
        let grads = match f {
            Some(f) => (1..=spec.fields).map(|j| f.partial_derivative(Var::phi(j))).collect(),
            None => Vec::new(),
        };
        Ok(Self { spec, waves: spec.plane_waves(), grads, f })
    }

    fn site_values(&self, s: &LatticeState, x: usize) -> Vec<f64> {
        (0..self.spec.fields).map(|j| s.phi[j][x]).collect()
    }

    fn force(&self, s: &LatticeState) -> Vec<Vec<f64>> {
        let zeros = vec![0.0; self.spec.fields];
        let mut out: Vec<Vec<f64>> = (0..self.spec.fields)
            .map(|j| {
                let m2 = self.spec.masses[j] * self.spec.masses[j];
                laplacian(self.spec, &self.waves, &s.phi[j]).iter().zip(&s.phi[j]).map(|(l, p)| l - m2 * p).collect()
            })
            .collect();
        if !self.grads.is_empty() {
            for x in 0..self.spec.sites() {
                let v = self.site_values(s, x);
                for (j, g) in self.grads.iter().enumerate() {
                    out[j][x] -= g.eval(&pad(&v, g.modes()), &pad(&zeros, g.modes()));
                }
            }
        }
        out
    }

    fn energy(&self, s: &LatticeState) -> f64 {
        let vol = self.spec.cell_volume();
        let mut e = 0.0;
        for j in 0..self.spec.fields {
            let m2 = self.spec.masses[j] * self.spec.masses[j];
            let lap = laplacian(self.spec, &self.waves, &s.phi[j]);
            for x in 0..self.spec.sites() {
                let (p, q) = (s.phi[j][x], s.pi[j][x]);
                e += vol * (0.5 * q * q + 0.5 * m2 * p * p - 0.5 * p * lap[x]);
            }
        }
        if let Some(f) = self.f {
            let zeros = vec![0.0; f.modes()];
            for x in 0..self.spec.sites() {
                e += vol * f.eval(&pad(&self.site_values(s, x), f.modes()), &zeros);
            }
        }
        e
    }
}

fn pad(v: &[f64], n: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(n.max(v.len()), 0.0);
    out
}

pub fn lattice_energy(spec: &LatticeSpec, f: Option<&ClassicalPoly>, state: &LatticeState) -> Result<f64> {
    state.check(spec)?;
    Ok(Stepper::new(spec, f)?.energy(state))
}

/// Integrates `steps` leapfrog steps, recording every `record_every` steps.
///
/// Requires dt · max w ≤ 2 and stops with `Unstable` if the state turns
/// non-finite or the energy grows by a factor of 1e6.
pub fn leapfrog_evolve(
    spec: &LatticeSpec,
    f: Option<&ClassicalPoly>,
    initial: &LatticeState,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<LeapfrogRun> {
    initial.check(spec)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidStep(dt));
    }
    let wmax = dispersion(spec).max();
    if dt * wmax > 2.0 {
        return Err(Error::Unstable(format!("dt = {dt} exceeds 2 / w_max = {}", 2.0 / wmax)));
    }
    let every = record_every.max(1);
    let stepper = Stepper::new(spec, f)?;
    let mut s = initial.clone();
    let e0 = stepper.energy(&s);
    let mut run = LeapfrogRun { times: vec![0.0], states: vec![s.clone()], energies: vec![e0] };
    let mut force = stepper.force(&s);
    for step in 1..=steps {
        for j in 0..spec.fields {
            for x in 0..spec.sites() {
                s.pi[j][x] += 0.5 * dt * force[j][x];
                s.phi[j][x] += dt * s.pi[j][x];
            }
        }
        force = stepper.force(&s);
        for j in 0..spec.fields {
            for x in 0..spec.sites() {
                s.pi[j][x] += 0.5 * dt * force[j][x];
            }
        }
        if s.phi.iter().chain(&s.pi).flatten().any(|v| !v.is_finite()) {
            return Err(Error::Unstable(format!("non-finite field at step {step}")));
        }
        if step % every == 0 || step == steps {
            let e = stepper.energy(&s);
            if (e - e0).abs() > 1e6 * e0.abs().max(1e-12) {
                return Err(Error::Unstable(format!("energy grew from {e0:.3e} to {e:.3e} by step {step}")));
            }
            run.times.push(step as f64 * dt);
            run.states.push(s.clone());
            run.energies.push(e);
        }
    }
    Ok(run)
}

/// Angular frequency from linearly interpolated zero crossings.
///
/// Returns `None` with fewer than three crossings.
pub fn measure_frequency(times: &[f64], signal: &[f64]) -> Option<f64> {
    let mut crossings = Vec::new();
    for i in 1..signal.len().min(times.len()) {
        let (a, b) = (signal[i - 1], signal[i]);
        if a == 0.0 && i == 1 {
            crossings.push(times[0]);
        } else if (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0) {
            let t = times[i - 1] + (times[i] - times[i - 1]) * a / (a - b);
            crossings.push(t);
        }
    }
    if crossings.len() < 3 {
        return None;
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Some(PI * (crossings.len() - 1) as f64 / span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_poly;

    fn spec1() -> LatticeSpec {
        LatticeSpec::new(1, 3, 1.0, vec![1.0]).unwrap()
    }

    #[test]
    fn uniform_mass_oscillation() {
        let spec = spec1();
        let phi0 = 0.05;
        let s = LatticeState { phi: vec![vec![phi0; 3]], pi: vec![vec![0.0; 3]] };
        let dt = 0.001;
        let run = leapfrog_evolve(&spec, None, &s, dt, 3000, 1000).unwrap();
        for (t, st) in run.times.iter().zip(&run.states) {
            for x in 0..3 {
                assert!((st.phi[0][x] - phi0 * t.cos()).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn plane_wave_frequency() {
        let spec = LatticeSpec::new(1, 8, 1.0, vec![1.0]).unwrap();
        let p = spec.momentum(spec.zero_momentum() + 1)[0];
        let w = (1.0 + p * p).sqrt();
        let s = LatticeState {
            phi: vec![(0..8).map(|x| 0.05 * (p * x as f64).cos()).collect()],
            pi: vec![vec![0.0; 8]],
        };
        let dt = 0.005;
        let steps = (10.5 * 2.0 * PI / w / dt) as usize;
        let run = leapfrog_evolve(&spec, None, &s, dt, steps, 1).unwrap();
        let got = measure_frequency(&run.times, &run.site_series(0, 0)).unwrap();
        assert!((got - w).abs() < 1e-4, "{got} vs {w}");
    }

    #[test]
    fn energy_drift_is_small_and_second_order() {
        let spec = spec1();
        let s = LatticeState::sample(&spec, 4, 0.03);
        let a = leapfrog_evolve(&spec, None, &s, 0.01, 10_000, 10).unwrap();
        assert!(a.energy_drift() <= 1e-6, "{}", a.energy_drift());
        let b = leapfrog_evolve(&spec, None, &s, 0.005, 20_000, 20).unwrap();
        let ratio = a.energy_drift() / b.energy_drift();
        assert!((2.0..=8.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn interacting_energy_conserved() {
        let spec = LatticeSpec::new(1, 4, 1.0, vec![1.0, 0.5]).unwrap();
        let f = parse_poly("0.25*phi1^4 + 0.1*phi1^2*phi2^2").unwrap();
        let s = LatticeState::sample(&spec, 8, 0.3);
        let run = leapfrog_evolve(&spec, Some(&f), &s, 0.01, 2000, 100).unwrap();
        assert!(run.energy_drift() < 1e-4 * run.energies[0].abs());
    }

    #[test]
    fn reversibility() {
        let spec = spec1();
        let s = LatticeState::sample(&spec, 2, 0.2);
        let run = leapfrog_evolve(&spec, None, &s, 0.01, 500, 500).unwrap();
        let mut back = run.final_state().clone();
        back.pi.iter_mut().flatten().for_each(|v| *v = -*v);
        let ret = leapfrog_evolve(&spec, None, &back, 0.01, 500, 500).unwrap();
        let mut end = ret.final_state().clone();
        end.pi.iter_mut().flatten().for_each(|v| *v = -*v);
        assert!(end.max_abs_difference(&s) < 1e-12);
    }

    #[test]
    fn stability_limit() {
        let spec = spec1();
        let s = LatticeState::sample(&spec, 1, 0.1);
        assert!(matches!(leapfrog_evolve(&spec, None, &s, 1.5, 10, 1), Err(Error::Unstable(_))));
        assert!(matches!(leapfrog_evolve(&spec, None, &s, 0.0, 10, 1), Err(Error::InvalidStep(_))));
    }

    #[test]
    fn frequency_needs_crossings() {
        assert_eq!(measure_frequency(&[0.0, 1.0], &[1.0, 2.0]), None);
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = t.iter().map(|t| (3.0 * t + 0.4).sin()).collect();
        assert!((measure_frequency(&t, &y).unwrap() - 3.0).abs() < 1e-4);
    }
}
