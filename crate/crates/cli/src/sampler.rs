//! Seeded draws: ensembles, random polynomials, lattice sample sets.

use fockbridge::algebra::{ClassicalPoly, Var};
use fockbridge::fock::{Ensemble, PhasePoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Equal-weight ensemble with φ, π uniform in [−amplitude, amplitude].
pub fn uniform_ensemble(seed: u64, modes: usize, count: usize, amplitude: f64) -> Ensemble {
    let mut r = rng(seed);
    draw_ensemble(&mut r, modes, count, amplitude)
}

pub fn draw_ensemble(r: &mut ChaCha8Rng, modes: usize, count: usize, amplitude: f64) -> Ensemble {
    let points: Vec<PhasePoint> = (0..count)
        .map(|_| PhasePoint {
            phi: (0..modes).map(|_| r.gen_range(-amplitude..=amplitude)).collect(),
            pi: (0..modes).map(|_| r.gen_range(-amplitude..=amplitude)).collect(),
        })
        .collect();
    let raw: Vec<f64> = (0..count).map(|_| r.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Ensemble::normalized(points, raw.iter().map(|w| w / total).collect()).expect("positive weights")
}

/// Up to four terms of total degree 1..=max_degree with coefficients k/4, k ∈ [−8, 8] \ {0}.
///
/// Dyadic coefficients keep every symbolic residual exactly representable.
pub fn random_poly(r: &mut ChaCha8Rng, modes: usize, max_degree: usize) -> ClassicalPoly {
    loop {
        let mut p = ClassicalPoly::zero(modes);
        for _ in 0..r.gen_range(1..=4) {
            let degree = r.gen_range(1..=max_degree.max(1));
            let mut exps: Vec<(Var, u32)> = Vec::new();
            for _ in 0..degree {
                let j = r.gen_range(1..=modes);
                let v = if r.gen_bool(0.5) { Var::phi(j) } else { Var::pi(j) };
                match exps.iter_mut().find(|(w, _)| *w == v) {
                    Some((_, e)) => *e += 1,
                    None => exps.push((v, 1)),
                }
            }
            let mut k = r.gen_range(-8..=7);
            if k >= 0 {
                k += 1;
            }
            let term = ClassicalPoly::monomial(modes, k as f64 / 4.0, exps).expect("valid monomial");
            p = p.add(&term).expect("same modes");
        }
        if !p.is_zero() {
            return p;
        }
    }
}
