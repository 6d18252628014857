//! Fock encoding of lattice field states and the lattice field operators.
//!
//! Fock mode `j·S + p + 1` carries field `j` at momentum index `p` (S sites);
//! classical site variables use the same layout with `x` in place of `p`.
//! The coherent amplitude is α_j(p) = c (2π)^{d/2} √Δp (√w θ_j(p) + i τ_j(p)/√w),
//! and the field operators are
//! Φ_j(x) = Σ_p (2√V)^{-1} w^{-1/2} (e^{ip·x} a + e^{-ip·x} a⁺),
//! Π_j(x) = Σ_p (−i)(2√V)^{-1} w^{1/2} (e^{ip·x} a − e^{-ip·x} a⁺).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde_json::Value;

use super::{dispersion, fourier_amplitudes, LatticeSpec, LatticeState};
use crate::algebra::{ClassicalPoly, FieldBasis, Generator, OperatorPoly, Var};
use crate::error::{Error, Result};
use crate::fock::{apply_poly, coherent_vector, FockSpace, PhasePoint, StateVector};
use crate::format::json_number;

const HALF_I: Complex64 = Complex64 { re: 0.0, im: 0.5 };

/// Zero-based Fock mode index of (field, momentum).
pub fn mode_index(spec: &LatticeSpec, field: usize, p: usize) -> usize {
    field * spec.sites() + p
}

/// (2π)^{−d/2}: the encoding constant at which the coherent means reproduce the fields.
pub fn reference_c(spec: &LatticeSpec) -> f64 {
    (2.0 * PI).powf(-(spec.d as f64) / 2.0)
}

fn frequencies(spec: &LatticeSpec) -> Result<Vec<Vec<f64>>> {
    let table = dispersion(spec);
    if table.has_massless_zero_mode() {
        return Err(Error::Unsupported("massless field has a zero-frequency mode at p = 0".into()));
    }
    Ok(table.w)
}

fn check_space(spec: &LatticeSpec, space: FockSpace) -> Result<()> {
    let want = spec.sites() * spec.fields;
    if space.is_expanded() || space.modes() != want {
        return Err(Error::ModeMismatch { left: want, right: space.modes() });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct LatticeEncoding {
    pub amplitudes: Vec<Complex64>,
    pub vector: StateVector,
}

impl LatticeEncoding {
    pub fn point(&self) -> PhasePoint {
        PhasePoint {
            phi: self.amplitudes.iter().map(|z| z.re).collect(),
            pi: self.amplitudes.iter().map(|z| z.im).collect(),
        }
    }
}

pub fn encoding_amplitudes(spec: &LatticeSpec, state: &LatticeState, c: f64) -> Result<Vec<Complex64>> {
    let w = frequencies(spec)?;
    let amps = fourier_amplitudes(spec, state)?;
    let scale = c * (2.0 * PI).powf(spec.d as f64 / 2.0) * spec.momentum_cell().sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); spec.sites() * spec.fields];
    for j in 0..spec.fields {
        for p in 0..spec.sites() {
            let r = w[j][p].sqrt();
            out[mode_index(spec, j, p)] = (amps.theta[j][p] * r + Complex64::i() * amps.tau[j][p] / r) * scale;
        }
    }
    Ok(out)
}

/// Coherent vector of the lattice state at encoding constant `c`.
pub fn encode_lattice_state(spec: &LatticeSpec, space: FockSpace, state: &LatticeState, c: f64) -> Result<LatticeEncoding> {
    check_space(spec, space)?;
    let amplitudes = encoding_amplitudes(spec, state, c)?;
    let point = PhasePoint::new(amplitudes.iter().map(|z| z.re).collect(), amplitudes.iter().map(|z| z.im).collect())?;
    let vector = coherent_vector(space, &point)?;
    Ok(LatticeEncoding { amplitudes, vector })
}

/// Φ±, Π± and their sums at every (field, site), field-major.
#[derive(Clone, Debug)]
pub struct FieldOperators {
    spec: LatticeSpec,
    pub phi_plus: Vec<OperatorPoly>,
    pub pi_plus: Vec<OperatorPoly>,
    pub phi: Vec<OperatorPoly>,
    pub pi: Vec<OperatorPoly>,
}

impl FieldOperators {
    fn at(&self, field: usize, x: usize) -> usize {
        field * self.spec.sites() + x
    }

    pub fn phi_at(&self, field: usize, x: usize) -> &OperatorPoly {
        &self.phi[self.at(field, x)]
    }

    pub fn pi_at(&self, field: usize, x: usize) -> &OperatorPoly {
        &self.pi[self.at(field, x)]
    }

    pub fn phi_minus(&self, field: usize, x: usize) -> OperatorPoly {
        self.phi_plus[self.at(field, x)].adjoint()
    }

    pub fn pi_minus(&self, field: usize, x: usize) -> OperatorPoly {
        self.pi_plus[self.at(field, x)].adjoint()
    }

    /// Basis sending site variable (j, x) to Φ_j(x), Π_j(x).
    pub fn basis(&self) -> Result<FieldBasis> {
        FieldBasis::new(self.spec.sites() * self.spec.fields, self.phi.clone(), self.pi.clone())
    }
}

pub fn field_operators(spec: &LatticeSpec) -> Result<FieldOperators> {
    let w = frequencies(spec)?;
    let s = spec.sites();
    let modes = s * spec.fields;
    let waves = spec.plane_waves();
    let norm = 1.0 / (2.0 * spec.volume().sqrt());
    let mut phi_plus = Vec::with_capacity(modes);
    let mut pi_plus = Vec::with_capacity(modes);
    let mut phi = Vec::with_capacity(modes);
    let mut pi = Vec::with_capacity(modes);
    for j in 0..spec.fields {
        for x in 0..s {
            let mut fp = OperatorPoly::zero(modes);
            let mut pp = OperatorPoly::zero(modes);
            for p in 0..s {
                let a = OperatorPoly::generator(modes, Generator::a(mode_index(spec, j, p) + 1))?;
                let e = waves[p][x];
                fp = fp.add(&a.scale(e * (norm / w[j][p].sqrt()))?)?;
                pp = pp.add(&a.scale(e * Complex64::new(0.0, -norm * w[j][p].sqrt()))?)?;
            }
            let f = fp.add(&fp.adjoint())?;
            let g = pp.add(&pp.adjoint())?;
            phi_plus.push(fp);
            pi_plus.push(pp);
            phi.push(f);
            pi.push(g);
        }
    }
    Ok(FieldOperators { spec: spec.clone(), phi_plus, pi_plus, phi, pi })
}

/// Classical site-variable index (1-based) of field `j` at site `x`.
pub fn site_variable(spec: &LatticeSpec, j: usize, x: usize) -> usize {
    j * spec.sites() + x + 1
}

/// H = Σ_x Δx^d [½π² + ½m²φ² − ½φ Δφ] over site variables, spectral Laplacian.
pub fn lattice_free_hamiltonian(spec: &LatticeSpec) -> Result<ClassicalPoly> {
    let s = spec.sites();
    let modes = s * spec.fields;
    let vol = spec.cell_volume();
    let waves = spec.plane_waves();
    // column y of −Δ applied to unit vectors
    let minus_lap: Vec<Vec<f64>> = (0..s)
        .map(|y| {
            let mut e = vec![0.0; s];
            e[y] = 1.0;
            super::laplacian(spec, &waves, &e).into_iter().map(|v| -v).collect()
        })
        .collect();
    let mut h = ClassicalPoly::zero(modes);
    for j in 0..spec.fields {
        let m2 = spec.masses[j] * spec.masses[j];
        for x in 0..s {
            let k = site_variable(spec, j, x);
            h = h.add(&ClassicalPoly::monomial(modes, 0.5 * vol, [(Var::pi(k), 2)])?)?;
            for y in 0..s {
                let mut coef = 0.5 * vol * minus_lap[y][x];
                if x == y {
                    coef += 0.5 * vol * m2;
                }
                if coef.abs() < 1e-15 {
                    continue;
                }
                let l = site_variable(spec, j, y);
                let term = if k == l {
                    ClassicalPoly::monomial(modes, coef, [(Var::phi(k), 2)])?
                } else {
                    ClassicalPoly::monomial(modes, coef, [(Var::phi(k), 1), (Var::phi(l), 1)])?
                };
                h = h.add(&term)?;
            }
        }
    }
    Ok(h)
}

/// Largest coefficient of [Φ_j(x), f_n] − (i/2)Δx^{−d}(∂f/∂π_j(x))_n and of the
/// companion [Π_j(x), f_n] + (i/2)Δx^{−d}(∂f/∂φ_j(x))_n over all sites and fields.
pub fn functional_commutator_check(spec: &LatticeSpec, f: &ClassicalPoly) -> Result<f64> {
    let ops = field_operators(spec)?;
    let basis = ops.basis()?;
    let f = f.clone().with_modes(spec.sites() * spec.fields)?;
    let fn_ = basis.quantize_normal(&f)?;
    let inv = 1.0 / spec.cell_volume();
    let mut worst = 0.0f64;
    for j in 0..spec.fields {
        for x in 0..spec.sites() {
            let k = site_variable(spec, j, x);
            let dpi = basis.quantize_normal(&f.partial_derivative(Var::pi(k)))?.scale(HALF_I * inv)?;
            let r = ops.phi_at(j, x).commutator(&fn_)?.sub(&dpi)?;
            worst = worst.max(r.max_abs_coefficient());
            let dphi = basis.quantize_normal(&f.partial_derivative(Var::phi(k)))?.scale(HALF_I * inv)?;
            let r = ops.pi_at(j, x).commutator(&fn_)?.add(&dphi)?;
            worst = worst.max(r.max_abs_coefficient());
        }
    }
    Ok(worst)
}

/// Largest deviation of [Φ_j(x), Π_k(y)] from (i/2)δ_jk δ_xy Δx^{−d}, and of
/// [Φ, Φ], [Π, Π] from zero.
pub fn equal_time_commutator_check(spec: &LatticeSpec) -> Result<f64> {
    let ops = field_operators(spec)?;
    let n = ops.phi.len();
    let modes = n;
    let target = HALF_I / spec.cell_volume();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let c = ops.phi[a].commutator(&ops.pi[b])?;
            let want = if a == b { target } else { Complex64::new(0.0, 0.0) };
            let r = c.sub(&OperatorPoly::constant(modes, want)?)?;
            worst = worst.max(r.max_abs_coefficient());
            worst = worst.max(ops.phi[a].commutator(&ops.phi[b])?.max_abs_coefficient());
            worst = worst.max(ops.pi[a].commutator(&ops.pi[b])?.max_abs_coefficient());
        }
    }
    Ok(worst)
}

/// ⟨v|O|v⟩ / ⟨v|v⟩.
fn state_mean(op: &OperatorPoly, v: &StateVector) -> Result<Complex64> {
    Ok(v.inner(&apply_poly(op, v)?) / v.inner(v))
}

/// Means of Φ_j(x) and Π_j(x) in the encoded state, field-major.
pub fn field_means(ops: &FieldOperators, v: &StateVector) -> Result<(Vec<f64>, Vec<f64>)> {
    let phi = ops.phi.iter().map(|o| state_mean(o, v).map(|z| z.re)).collect::<Result<Vec<_>>>()?;
    let pi = ops.pi.iter().map(|o| state_mean(o, v).map(|z| z.re)).collect::<Result<Vec<_>>>()?;
    Ok((phi, pi))
}

fn residual_vector(
    spec: &LatticeSpec,
    space: FockSpace,
    ops: &FieldOperators,
    samples: &[LatticeState],
    c: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for s in samples {
        let enc = encode_lattice_state(spec, space, s, c)?;
        let (phi, pi) = field_means(ops, &enc.vector)?;
        out.extend(phi.iter().zip(s.phi.iter().flatten()).map(|(a, b)| a - b));
        out.extend(pi.iter().zip(s.pi.iter().flatten()).map(|(a, b)| a - b));
    }
    Ok(out)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    pub c: f64,
    /// max |⟨Φ⟩ − φ|, |⟨Π⟩ − π| over samples and sites at the fitted c
    pub residual: f64,
    pub reference: f64,
    pub iterations: usize,
}

impl CalibrationResult {
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "c": json_number(self.c),
            "residual": json_number(self.residual),
            "reference": json_number(self.reference),
            "deviation_from_reference": json_number((self.c - self.reference).abs()),
            "iterations": self.iterations,
        })
    }
}

const SCAN_POINTS: usize = 61;
const SCAN_LOW: f64 = 1e-2;
const SCAN_HIGH: f64 = 1e1;

/// Max residual of the coherent means at encoding constant `c`.
pub fn calibration_residual(spec: &LatticeSpec, space: FockSpace, samples: &[LatticeState], c: f64) -> Result<f64> {
    let ops = field_operators(spec)?;
    Ok(max_abs(&residual_vector(spec, space, &ops, samples, c)?))
}

/// Fits c by a log-spaced scan followed by Gauss-Newton on the residual vector.
pub fn calibrate_c(spec: &LatticeSpec, space: FockSpace, samples: &[LatticeState]) -> Result<CalibrationResult> {
    check_space(spec, space)?;
    if samples.len() < 3 {
        return Err(Error::DegenerateSamples(format!("{} samples; at least 3 are needed", samples.len())));
    }
    let mut touched = vec![false; spec.sites()];
    for s in samples {
        let a = fourier_amplitudes(spec, s)?;
        for j in 0..spec.fields {
            for (p, t) in touched.iter_mut().enumerate() {
                *t |= a.theta[j][p].norm() + a.tau[j][p].norm() > 1e-12;
            }
        }
    }
    let distinct = touched.iter().filter(|&&t| t).count();
    if distinct < spec.sites().min(3) {
        return Err(Error::DegenerateSamples(format!("samples excite only {distinct} distinct momenta")));
    }
    let ops = field_operators(spec)?;
    let eval = |c: f64| residual_vector(spec, space, &ops, samples, c);

    let mut best: Option<(f64, f64)> = None;
    for i in 0..SCAN_POINTS {
        let c = SCAN_LOW * (SCAN_HIGH / SCAN_LOW).powf(i as f64 / (SCAN_POINTS - 1) as f64);
        match eval(c) {
            Ok(r) => {
                let m = r.iter().map(|x| x * x).sum::<f64>();
                if best.is_none_or(|(_, b)| m < b) {
                    best = Some((c, m));
                }
            }
            Err(Error::TailViolation { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let (mut c, _) = best.ok_or_else(|| Error::DegenerateSamples("no scanned c respects the tail budget".into()))?;

    let mut iterations = 0;
    for _ in 0..50 {
        iterations += 1;
        let h = 1e-6 * c;
        let r = eval(c)?;
        let rp = eval(c + h)?;
        let rm = eval(c - h)?;
        let jac: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let jj: f64 = jac.iter().map(|x| x * x).sum();
        if jj < 1e-20 {
            return Err(Error::DegenerateSamples("residual does not depend on c".into()));
        }
        let step = jac.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / jj;
        c -= step;
        if step.abs() <= 1e-14 * c.abs() {
            break;
        }
    }
    let residual = max_abs(&eval(c)?);
    Ok(CalibrationResult { c, residual, reference: reference_c(spec), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_poly_with_modes, quantize_normal};
    use crate::fock::{density_matrix, expectation, realize, Ensemble};

    fn spec1() -> LatticeSpec {
        LatticeSpec::new(1, 3, 1.0, vec![1.0]).unwrap()
    }

    fn samples(spec: &LatticeSpec) -> Vec<LatticeState> {
        (0..3).map(|s| LatticeState::sample(spec, 100 + s, 0.25)).collect()
    }

    #[test]
    fn equal_time_commutators() {
        for spec in [spec1(), LatticeSpec::new(1, 2, 0.5, vec![1.0, 2.0]).unwrap(), LatticeSpec::new(2, 2, 0.8, vec![0.7]).unwrap()] {
            assert!(equal_time_commutator_check(&spec).unwrap() < 1e-12);
        }
    }

    #[test]
    fn means_match_at_reference_c() {
        let spec = spec1();
        let space = FockSpace::new(3, 10).unwrap();
        let r = calibration_residual(&spec, space, &samples(&spec), reference_c(&spec)).unwrap();
        assert!(r < 1e-12, "{r}");
    }

    #[test]
    fn density_matrix_traces_agree() {
        let spec = spec1();
        let space = FockSpace::new(3, 8).unwrap();
        let state = LatticeState::sample(&spec, 5, 0.25);
        let enc = encode_lattice_state(&spec, space, &state, reference_c(&spec)).unwrap();
        let rho = density_matrix(space, &Ensemble::point(enc.point())).unwrap();
        let ops = field_operators(&spec).unwrap();
        for x in 0..3 {
            let m = realize(space, ops.phi_at(0, x)).unwrap();
            let t = expectation(&rho, &m).unwrap();
            assert!((t.re - state.phi[0][x]).abs() < 1e-9);
            let m = realize(space, ops.pi_at(0, x)).unwrap();
            let t = expectation(&rho, &m).unwrap();
            assert!((t.re - state.pi[0][x]).abs() < 1e-9);
        }
    }

    #[test]
    fn positive_part_eigenvalue() {
        let spec = spec1();
        let space = FockSpace::new(3, 12).unwrap();
        let state = LatticeState::sample(&spec, 9, 0.2);
        let enc = encode_lattice_state(&spec, space, &state, reference_c(&spec)).unwrap();
        let ops = field_operators(&spec).unwrap();
        let w = dispersion(&spec).w;
        let amps = fourier_amplitudes(&spec, &state).unwrap();
        let waves = spec.plane_waves();
        for x in 0..3 {
            // imaginary part: (2π)^{-d/2} Σ Δp e^{ipx} τ/w
            let k: Complex64 = (0..3).map(|p| waves[p][x] * amps.tau[0][p] / w[0][p]).sum::<Complex64>()
                * spec.momentum_cell()
                * reference_c(&spec);
            assert!(k.im.abs() < 1e-12);
            let lambda = Complex64::new(state.phi[0][x], k.re) * 0.5;
            let lhs = apply_poly(&ops.phi_plus[x], &enc.vector).unwrap();
            let r = lhs.sub(&enc.vector.scale(lambda)).unwrap().norm() / enc.vector.norm();
            assert!(r < 1e-8, "{r}");
            let minus = ops.phi_minus(0, x);
            let expect = enc.vector.inner(&apply_poly(&minus, &enc.vector).unwrap());
            assert!((expect - lambda.conj()).norm() < 1e-8);
        }
    }

    #[test]
    fn calibration_recovers_reference() {
        let spec = spec1();
        let space = FockSpace::new(3, 10).unwrap();
        let fit = calibrate_c(&spec, space, &samples(&spec)).unwrap();
        assert!(fit.residual <= 1e-6);
        assert!((fit.c - fit.reference).abs() < 1e-6);
        let other: Vec<_> = (0..3).map(|s| LatticeState::sample(&spec, 900 + s, 0.25)).collect();
        let fit2 = calibrate_c(&spec, space, &other).unwrap();
        assert!((fit.c - fit2.c).abs() < 1e-10);
        let doubled = calibration_residual(&spec, space, &samples(&spec), 2.0 * fit.c).unwrap();
        assert!(doubled >= 10.0 * fit.residual.max(1e-7));
    }

    #[test]
    fn calibration_rejects_degenerate_samples() {
        let spec = spec1();
        let space = FockSpace::new(3, 10).unwrap();
        let zero = vec![LatticeState::zeros(&spec); 3];
        assert!(matches!(calibrate_c(&spec, space, &zero), Err(Error::DegenerateSamples(_))));
        assert!(matches!(calibrate_c(&spec, space, &samples(&spec)[..2]), Err(Error::DegenerateSamples(_))));
    }

    #[test]
    fn massless_zero_mode_is_unsupported() {
        let spec = LatticeSpec::new(1, 3, 1.0, vec![0.0]).unwrap();
        assert!(matches!(field_operators(&spec), Err(Error::Unsupported(_))));
    }

    #[test]
    fn functional_commutator_identity() {
        let spec = spec1();
        let f = parse_poly_with_modes("0.5*pi1^2 + 0.3*phi1*phi2 + 0.25*phi3^4 + pi2*phi3^2", 3).unwrap();
        assert!(functional_commutator_check(&spec, &f).unwrap() < 1e-12);
        let spec = LatticeSpec::new(1, 2, 0.5, vec![1.0]).unwrap();
        let f = parse_poly_with_modes("phi1^3*pi2 + pi1^2", 2).unwrap();
        assert!(functional_commutator_check(&spec, &f).unwrap() < 1e-12);
    }

    #[test]
    fn free_hamiltonian_is_number_operator_sum() {
        for spec in [spec1(), LatticeSpec::new(1, 4, 0.6, vec![1.3]).unwrap()] {
            let h = lattice_free_hamiltonian(&spec).unwrap();
            let basis = field_operators(&spec).unwrap().basis().unwrap();
            let hn = basis.quantize_normal(&h).unwrap();
            let w = dispersion(&spec).w;
            let n = spec.sites();
            let mut want = OperatorPoly::zero(n);
            for p in 0..n {
                let g = Generator::a(p + 1);
                let num = OperatorPoly::generator(n, g.adjoint()).unwrap().multiply(&OperatorPoly::generator(n, g).unwrap()).unwrap();
                want = want.add(&num.scale(Complex64::new(0.5 * w[0][p], 0.0)).unwrap()).unwrap();
            }
            assert!(hn.sub(&want).unwrap().max_abs_coefficient() < 1e-12);
        }
        // one site, unit mass: single harmonic oscillator, same as the ladder quantizer
        let spec = LatticeSpec::new(1, 1, 1.0, vec![1.0]).unwrap();
        let h = lattice_free_hamiltonian(&spec).unwrap();
        let basis = field_operators(&spec).unwrap().basis().unwrap();
        let direct = quantize_normal(&h).unwrap();
        assert!(basis.quantize_normal(&h).unwrap().sub(&direct).unwrap().max_abs_coefficient() < 1e-12);
    }
}
