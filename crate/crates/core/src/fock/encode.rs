//! Encodings of classical phase points and ensembles as Fock-space vectors.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::matrix::{CMatrix, CVector, DensityMatrix, StateVector};
use crate::fock::space::FockSpace;

/// Lost probability mass above which encodings are refused.
pub const TAIL_BUDGET: f64 = 1e-6;

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(phi: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        if phi.len() != pi.len() {
            return Err(Error::ShapeMismatch(format!("{} phi vs {} pi components", phi.len(), pi.len())));
        }
        if phi.iter().chain(&pi).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { phi, pi })
    }

    pub fn origin(modes: usize) -> Self {
        Self { phi: vec![0.0; modes], pi: vec![0.0; modes] }
    }

    pub fn modes(&self) -> usize {
        self.phi.len()
    }

    /// z_j = φ_j + iπ_j.
    pub fn z(&self) -> Vec<Complex64> {
        self.phi.iter().zip(&self.pi).map(|(&p, &q)| Complex64::new(p, q)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    points: Vec<PhasePoint>,
    weights: Vec<f64>,
}

impl Ensemble {
    pub fn new(points: Vec<PhasePoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidEnsemble(format!("{} points but {} weights", points.len(), weights.len())));
        }
        let modes = points[0].modes();
        if points.iter().any(|p| p.modes() != modes) {
            return Err(Error::InvalidEnsemble("points disagree on mode count".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidEnsemble("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { points, weights })
    }

    pub fn point(p: PhasePoint) -> Self {
        Self { points: vec![p], weights: vec![1.0] }
    }

    /// Equal weights.
    pub fn uniform(points: Vec<PhasePoint>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n.max(1) as f64; n])
    }

    /// Rescales arbitrary nonnegative weights to unit sum.
    pub fn normalized(points: Vec<PhasePoint>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidEnsemble("weights have no positive mass".into()));
        }
        Self::new(points, weights.iter().map(|w| w / total).collect())
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn modes(&self) -> usize {
        self.points[0].modes()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PhasePoint, f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }

    pub(crate) fn with_points(&self, points: Vec<PhasePoint>) -> Self {
        Self { points, weights: self.weights.clone() }
    }
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// P(K > cutoff) for K ~ Poisson(mean), summed directly over the tail.
pub fn poisson_tail(mean: f64, cutoff: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let ln_mean = mean.ln();
    let mut k = cutoff + 1;
    let mut ln_term = -mean + k as f64 * ln_mean - ln_factorial(k);
    let mut sum = 0.0;
    loop {
        let term = ln_term.exp();
        sum += term;
        if (k as f64) > mean && term <= sum * 1e-17 {
            break;
        }
        k += 1;
        ln_term += ln_mean - (k as f64).ln();
        if k > cutoff + 100_000 {
            break;
        }
    }
    sum.min(1.0)
}

/// Cutoff suggested for amplitude |z|: ⌈|z|² + 6|z| + 10⌉.
pub fn suggested_cutoff(abs_z: f64) -> usize {
    (abs_z * abs_z + 6.0 * abs_z + 10.0).ceil() as usize
}

/// Lost mass of one product state whose slot amplitudes are `amps`.
pub fn point_tail(cutoff: usize, amps: &[Complex64]) -> f64 {
    amps.iter().map(|z| poisson_tail(z.norm_sqr(), cutoff)).sum()
}

/// Largest per-point lost probability mass over the ensemble (summed across modes).
pub fn truncation_bound(space: FockSpace, ens: &Ensemble) -> f64 {
    ens.points().iter().map(|p| point_tail(space.cutoff(), &p.z())).fold(0.0, f64::max)
}

pub(crate) fn check_tail(cutoff: usize, amps: &[Complex64]) -> Result<f64> {
    let tail = point_tail(cutoff, amps);
    if tail > TAIL_BUDGET {
        let biggest = amps.iter().map(|z| z.norm()).fold(0.0, f64::max);
        return Err(Error::TailViolation { tail, budget: TAIL_BUDGET, suggested_cutoff: suggested_cutoff(biggest) });
    }
    Ok(tail)
}

/// prefactor · exp(Σ_s amps[s] c_s⁺)|0⟩ over every slot of the space, truncated at the cutoff.
pub fn exponential_state(space: FockSpace, amps: &[Complex64], prefactor: f64) -> Result<StateVector> {
    if amps.len() != space.slots() {
        return Err(Error::ShapeMismatch(format!("{} amplitudes for {} slots", amps.len(), space.slots())));
    }
    let n = space.cutoff();
    // per-slot coefficients amp^k / √k!
    let tables: Vec<Vec<Complex64>> = amps
        .iter()
        .map(|&z| {
            let mut row = Vec::with_capacity(n + 1);
            let mut c = Complex64::new(1.0, 0.0);
            row.push(c);
            for k in 1..=n {
                c = c * z / (k as f64).sqrt();
                row.push(c);
            }
            row
        })
        .collect();
    let entries = CVector::from_fn(space.dimension(), |i, _| {
        let occ = space.occupations(i);
        occ.iter().enumerate().fold(Complex64::new(prefactor, 0.0), |acc, (s, &k)| acc * tables[s][k])
    });
    StateVector::new(space, entries)
}

/// v = exp(Σ_j φ_j a_j⁺)|0⟩; the component on occupation k is Π_j φ_j^{k_j}/√(k_j!).
pub fn moment_vector(space: FockSpace, phi: &[f64]) -> Result<StateVector> {
    if phi.len() != space.modes() || space.is_expanded() {
        return Err(Error::ShapeMismatch(format!("{} components for a {}-mode space", phi.len(), space.modes())));
    }
    let amps: Vec<Complex64> = phi.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    check_tail(space.cutoff(), &amps)?;
    exponential_state(space, &amps, 1.0)
}

/// Σ_k weight_k · v(φ_k).
pub fn ensemble_moment_vector(space: FockSpace, ens: &Ensemble) -> Result<StateVector> {
    let mut acc = StateVector::new(space, CVector::zeros(space.dimension()))?;
    for (p, w) in ens.iter() {
        acc = acc.add(&moment_vector(space, &p.phi)?.scale(Complex64::new(w, 0.0)))?;
    }
    Ok(acc)
}

/// w = exp(Σ_j z_j a_j⁺ − ½|z_j|²)|0⟩ with z_j = φ_j + iπ_j.
pub fn coherent_vector(space: FockSpace, point: &PhasePoint) -> Result<StateVector> {
    if point.modes() != space.modes() || space.is_expanded() {
        return Err(Error::ShapeMismatch(format!("{}-mode point for a {}-mode space", point.modes(), space.modes())));
    }
    let z = point.z();
    check_tail(space.cutoff(), &z)?;
    let norm_sq: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    exponential_state(space, &z, (-0.5 * norm_sq).exp())
}

/// ρ = Σ_k weight_k w_k w_k†.
pub fn density_matrix(space: FockSpace, ens: &Ensemble) -> Result<DensityMatrix> {
    let d = space.dimension();
    let mut rho: CMatrix = DMatrix::zeros(d, d);
    let mut tail = 0.0;
    for (p, w) in ens.iter() {
        let v = coherent_vector(space, p)?;
        tail += w * point_tail(space.cutoff(), &p.z());
        let e = v.entries();
        rho.ger(Complex64::new(w, 0.0), e, &e.conjugate(), Complex64::new(1.0, 0.0));
    }
    // exact Hermitian symmetrization removes rounding asymmetry from the rank-one updates
    let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    // positive weights on rank-one projectors: PSD by construction
    let out = DensityMatrix::from_parts(space, rho, tail);
    out.validate_structure()?;
    Ok(out)
}

/// Symmetric moment tensor u_{i1…ik} = ⟨φ_{i1}⋯φ_{ik}⟩ for all orders k ≤ cap.
///
/// Keys are nondecreasing 1-based mode-index lists; the empty key is the zeroth moment.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTensor {
    order: usize,
    modes: usize,
    values: BTreeMap<Vec<usize>, f64>,
}

fn multisets(modes: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..order {
        let mut next = Vec::new();
        for key in &frontier {
            let start = key.last().copied().unwrap_or(1);
            for j in start..=modes {
                let mut k = key.clone();
                k.push(j);
                next.push(k);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

impl MomentTensor {
    /// Brute-force weighted moments.
    pub fn from_ensemble(ens: &Ensemble, order: usize) -> Self {
        let modes = ens.modes();
        let values = multisets(modes, order)
            .into_iter()
            .map(|key| {
                let u: f64 = ens.iter().map(|(p, w)| w * key.iter().map(|&j| p.phi[j - 1]).product::<f64>()).sum();
                (key, u)
            })
            .collect();
        Self { order, modes, values }
    }

    /// Reads moments off a moment vector: u = ⟨k|v⟩ · Π_j √(k_j!).
    pub fn from_moment_vector(v: &StateVector, order: usize) -> Result<Self> {
        let space = v.space();
        if order > space.cutoff() {
            return Err(Error::Domain(format!("moment order {order} exceeds cutoff {}", space.cutoff())));
        }
        let modes = space.modes();
        let values = multisets(modes, order)
            .into_iter()
            .map(|key| {
                let mut occ = vec![0usize; space.slots()];
                for &j in &key {
                    occ[j - 1] += 1;
                }
                let scale: f64 = occ.iter().map(|&k| ln_factorial(k)).sum::<f64>() * 0.5;
                (key, v.component(&occ).re * scale.exp())
            })
            .collect();
        Ok(Self { order, modes, values })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Moment for any index order (1-based); `None` above the order cap.
    pub fn get(&self, indices: &[usize]) -> Option<f64> {
        let mut key = indices.to_vec();
        key.sort_unstable();
        self.values.get(&key).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.values.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .map(|(k, v)| other.values.get(k).map_or(f64::INFINITY, |w| (v - w).abs()))
            .fold(0.0, f64::max)
    }
}
