//! Scalar fields on small periodic lattices.
//!
//! Sites and momenta are both enumerated mixed-radix, first axis fastest.
//! Momentum components are 2πk/(MΔx) with k ∈ {−⌊M/2⌋, …, ⌈M/2⌉ − 1}. The
//! transform is θ(p) = (2π)^{−d/2} Δx^d Σ_x e^{−ip·x} φ(x), inverted by
//! φ(x) = (2π)^{−d/2} Σ_p Δp e^{ip·x} θ(p) with cell volume Δp = (2π/(MΔx))^d.

pub mod encode;
pub mod leapfrog;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{
    calibrate_c, calibration_residual, encode_lattice_state, encoding_amplitudes, equal_time_commutator_check, field_means,
    field_operators, functional_commutator_check, lattice_free_hamiltonian, site_variable,
    mode_index, reference_c, CalibrationResult, FieldOperators, LatticeEncoding,
};
pub use leapfrog::{leapfrog_evolve, lattice_energy, measure_frequency, LeapfrogRun};

/// Upper limit on sites × fields.
pub const MODE_BUDGET: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub dx: f64,
    pub fields: usize,
    pub masses: Vec<f64>,
}

impl LatticeSpec {
    pub fn new(d: usize, m: usize, dx: f64, masses: Vec<f64>) -> Result<Self> {
        let spec = Self { d, m, dx, fields: masses.len(), masses };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::Domain(format!("spatial dimension {} outside 1..=3", self.d)));
        }
        if self.m == 0 {
            return Err(Error::Domain("lattice needs at least one site per axis".into()));
        }
        if !(self.dx.is_finite() && self.dx > 0.0) {
            return Err(Error::Domain("lattice spacing must be positive".into()));
        }
        if self.fields == 0 || self.masses.len() != self.fields {
            return Err(Error::Domain(format!("{} masses for {} fields", self.masses.len(), self.fields)));
        }
        if self.masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Domain("masses must be finite and nonnegative".into()));
        }
        let sites = self.m.checked_pow(self.d as u32).unwrap_or(usize::MAX);
        if sites.saturating_mul(self.fields) > MODE_BUDGET {
            return Err(Error::DimensionBudget { dimension: sites.saturating_mul(self.fields), budget: MODE_BUDGET });
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.d as i32)
    }

    /// Δp = (2π/(MΔx))^d.
    pub fn momentum_cell(&self) -> f64 {
        (2.0 * PI / (self.m as f64 * self.dx)).powi(self.d as i32)
    }

    /// (MΔx)^d.
    pub fn volume(&self) -> f64 {
        (self.m as f64 * self.dx).powi(self.d as i32)
    }

    fn digits(&self, mut index: usize) -> Vec<usize> {
        (0..self.d)
            .map(|_| {
                let k = index % self.m;
                index /= self.m;
                k
            })
            .collect()
    }

    pub fn site_position(&self, index: usize) -> Vec<f64> {
        self.digits(index).into_iter().map(|k| k as f64 * self.dx).collect()
    }

    /// Integer wave numbers k of momentum index `index`.
    pub fn wave_numbers(&self, index: usize) -> Vec<i64> {
        let shift = (self.m / 2) as i64;
        self.digits(index).into_iter().map(|k| k as i64 - shift).collect()
    }

    pub fn momentum(&self, index: usize) -> Vec<f64> {
        let unit = 2.0 * PI / (self.m as f64 * self.dx);
        self.wave_numbers(index).into_iter().map(|k| k as f64 * unit).collect()
    }

    /// Index of −p (wrapped onto the grid).
    pub fn negated_momentum(&self, index: usize) -> usize {
        let shift = (self.m / 2) as i64;
        let m = self.m as i64;
        self.wave_numbers(index)
            .into_iter()
            .rev()
            .fold(0usize, |acc, k| acc * self.m + ((-k + shift).rem_euclid(m)) as usize)
    }

    pub fn zero_momentum(&self) -> usize {
        (0..self.d).fold(0, |acc, _| acc * self.m + self.m / 2)
    }

    fn phase(&self, p: usize, x: usize) -> f64 {
        self.momentum(p).iter().zip(self.site_position(x)).map(|(a, b)| a * b).sum()
    }

    /// e^{ip·x} for every (p, x), momentum-major.
    pub fn plane_waves(&self) -> Vec<Vec<Complex64>> {
        let s = self.sites();
        (0..s).map(|p| (0..s).map(|x| Complex64::from_polar(1.0, self.phase(p, x))).collect()).collect()
    }
}

pub fn momentum_grid(spec: &LatticeSpec) -> Vec<Vec<f64>> {
    (0..spec.sites()).map(|p| spec.momentum(p)).collect()
}

/// w_j(p) = √(m_j² + |p|²), field-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DispersionTable {
    pub w: Vec<Vec<f64>>,
}

impl DispersionTable {
    pub fn has_massless_zero_mode(&self) -> bool {
        self.w.iter().flatten().any(|&w| w == 0.0)
    }

    pub fn max(&self) -> f64 {
        self.w.iter().flatten().copied().fold(0.0, f64::max)
    }
}

pub fn dispersion(spec: &LatticeSpec) -> DispersionTable {
    let w = spec
        .masses
        .iter()
        .map(|&m| {
            (0..spec.sites())
                .map(|p| {
                    let p2: f64 = spec.momentum(p).iter().map(|q| q * q).sum();
                    (m * m + p2).sqrt()
                })
                .collect()
        })
        .collect();
    DispersionTable { w }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    pub phi: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
}

impl LatticeState {
    pub fn zeros(spec: &LatticeSpec) -> Self {
        let s = spec.sites();
        Self { phi: vec![vec![0.0; s]; spec.fields], pi: vec![vec![0.0; s]; spec.fields] }
    }

    pub fn check(&self, spec: &LatticeSpec) -> Result<()> {
        let s = spec.sites();
        let ok = |a: &Vec<Vec<f64>>| a.len() == spec.fields && a.iter().all(|row| row.len() == s);
        if !ok(&self.phi) || !ok(&self.pi) {
            return Err(Error::ShapeMismatch(format!("state must be {} fields x {} sites", spec.fields, s)));
        }
        if self.phi.iter().chain(&self.pi).flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Seeded sample with entries uniform in [−amplitude, amplitude].
    pub fn sample(spec: &LatticeSpec, seed: u64, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = spec.sites();
        let mut draw = || -> Vec<Vec<f64>> {
            (0..spec.fields).map(|_| (0..s).map(|_| rng.gen_range(-amplitude..=amplitude)).collect()).collect()
        };
        let phi = draw();
        let pi = draw();
        Self { phi, pi }
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.phi
            .iter()
            .flatten()
            .zip(other.phi.iter().flatten())
            .chain(self.pi.iter().flatten().zip(other.pi.iter().flatten()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Lattice state file: spec fields plus `phi` and `pi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeFile {
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub dx: f64,
    pub fields: usize,
    pub masses: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
}

impl LatticeFile {
    pub fn new(spec: &LatticeSpec, state: &LatticeState) -> Self {
        Self {
            d: spec.d,
            m: spec.m,
            dx: spec.dx,
            fields: spec.fields,
            masses: spec.masses.clone(),
            phi: state.phi.clone(),
            pi: state.pi.clone(),
        }
    }

    pub fn into_parts(self) -> Result<(LatticeSpec, LatticeState)> {
        let spec = LatticeSpec { d: self.d, m: self.m, dx: self.dx, fields: self.fields, masses: self.masses };
        spec.validate()?;
        let state = LatticeState { phi: self.phi, pi: self.pi };
        state.check(&spec)?;
        Ok((spec, state))
    }

    pub fn to_json(&self) -> serde_json::Value {
        use crate::format::{json_array, json_number};
        serde_json::json!({
            "d": self.d,
            "M": self.m,
            "dx": json_number(self.dx),
            "fields": self.fields,
            "masses": json_array(self.masses.iter().copied()),
            "phi": self.phi.iter().map(|r| json_array(r.iter().copied())).collect::<Vec<_>>(),
            "pi": self.pi.iter().map(|r| json_array(r.iter().copied())).collect::<Vec<_>>(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentumAmplitudes {
    pub theta: Vec<Vec<Complex64>>,
    pub tau: Vec<Vec<Complex64>>,
}

impl MomentumAmplitudes {
    /// max |θ(−p) − θ(p)*| over both arrays.
    pub fn conjugate_symmetry_defect(&self, spec: &LatticeSpec) -> f64 {
        let mut worst = 0.0f64;
        for arr in [&self.theta, &self.tau] {
            for row in arr.iter() {
                for p in 0..spec.sites() {
                    worst = worst.max((row[spec.negated_momentum(p)] - row[p].conj()).norm());
                }
            }
        }
        worst
    }
}

fn forward(spec: &LatticeSpec, waves: &[Vec<Complex64>], f: &[f64]) -> Vec<Complex64> {
    let pre = (2.0 * PI).powf(-(spec.d as f64) / 2.0) * spec.cell_volume();
    waves.iter().map(|row| row.iter().zip(f).map(|(e, &v)| e.conj() * v).sum::<Complex64>() * pre).collect()
}

fn inverse(spec: &LatticeSpec, waves: &[Vec<Complex64>], g: &[Complex64]) -> Vec<Complex64> {
    let pre = (2.0 * PI).powf(-(spec.d as f64) / 2.0) * spec.momentum_cell();
    (0..spec.sites()).map(|x| (0..spec.sites()).map(|p| waves[p][x] * g[p]).sum::<Complex64>() * pre).collect()
}

pub fn fourier_amplitudes(spec: &LatticeSpec, state: &LatticeState) -> Result<MomentumAmplitudes> {
    state.check(spec)?;
    let waves = spec.plane_waves();
    Ok(MomentumAmplitudes {
        theta: state.phi.iter().map(|f| forward(spec, &waves, f)).collect(),
        tau: state.pi.iter().map(|f| forward(spec, &waves, f)).collect(),
    })
}

/// Inverse transform; imaginary parts are dropped after a 1e−10 consistency check.
pub fn inverse_fourier(spec: &LatticeSpec, amps: &MomentumAmplitudes) -> Result<LatticeState> {
    let waves = spec.plane_waves();
    let back = |arr: &Vec<Vec<Complex64>>| -> Result<Vec<Vec<f64>>> {
        arr.iter()
            .map(|g| {
                let f = inverse(spec, &waves, g);
                if f.iter().any(|z| z.im.abs() > 1e-10) {
                    return Err(Error::Domain("amplitudes are not conjugate-symmetric".into()));
                }
                Ok(f.into_iter().map(|z| z.re).collect())
            })
            .collect()
    };
    Ok(LatticeState { phi: back(&amps.theta)?, pi: back(&amps.tau)? })
}

/// Spectral Laplacian −|p|² applied to one field.
pub fn laplacian(spec: &LatticeSpec, waves: &[Vec<Complex64>], f: &[f64]) -> Vec<f64> {
    let mut g = forward(spec, waves, f);
    for (p, v) in g.iter_mut().enumerate() {
        let p2: f64 = spec.momentum(p).iter().map(|q| q * q).sum();
        *v *= -p2;
    }
    inverse(spec, waves, &g).into_iter().map(|z| z.re).collect()
}
