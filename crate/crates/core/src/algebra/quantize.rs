//! Maps from classical polynomials to ladder-operator polynomials.
//!
//! Conventions: Φ_j = ½(a_j + a_j⁺), Π_j = (1/2i)(a_j − a_j⁺), so that
//! [Φ_j, Π_k] = (i/2)δ_jk and a coherent state with eigenvalue z_j = φ_j + iπ_j
//! has ⟨Φ_j⟩ = φ_j and ⟨Π_j⟩ = π_j.

use num_complex::Complex64;

use crate::algebra::classical::{ClassicalPoly, Var, VarKind};
use crate::algebra::operator::{Generator, OperatorPoly};
use crate::error::{Error, Result};

const HALF: Complex64 = Complex64 { re: 0.5, im: 0.0 };
const MINUS_HALF_I: Complex64 = Complex64 { re: 0.0, im: -0.5 };
const HALF_I: Complex64 = Complex64 { re: 0.0, im: 0.5 };

pub fn phi_op(modes: usize, j: usize) -> Result<OperatorPoly> {
    let a = OperatorPoly::generator(modes, Generator::a(j))?;
    let ad = OperatorPoly::generator(modes, Generator::a_dag(j))?;
    a.add(&ad)?.scale(HALF)
}

pub fn pi_op(modes: usize, j: usize) -> Result<OperatorPoly> {
    let a = OperatorPoly::generator(modes, Generator::a(j))?;
    let ad = OperatorPoly::generator(modes, Generator::a_dag(j))?;
    // 1/(2i) = -i/2
    a.sub(&ad)?.scale(MINUS_HALF_I)
}

/// Operator images of the classical coordinates φ_j and π_j.
///
/// The main-text basis sends φ_j ↦ Φ_j and π_j ↦ Π_j on the mode with the
/// same index; lattice fields supply their own linear combinations.
#[derive(Clone, Debug)]
pub struct FieldBasis {
    modes: usize,
    phi: Vec<OperatorPoly>,
    pi: Vec<OperatorPoly>,
}

impl FieldBasis {
    pub fn ladder(modes: usize) -> Result<Self> {
        let phi = (1..=modes).map(|j| phi_op(modes, j)).collect::<Result<Vec<_>>>()?;
        let pi = (1..=modes).map(|j| pi_op(modes, j)).collect::<Result<Vec<_>>>()?;
        Ok(Self { modes, phi, pi })
    }

    pub fn new(modes: usize, phi: Vec<OperatorPoly>, pi: Vec<OperatorPoly>) -> Result<Self> {
        if phi.len() != pi.len() {
            return Err(Error::ShapeMismatch(format!("{} phi images vs {} pi images", phi.len(), pi.len())));
        }
        if let Some(p) = phi.iter().chain(pi.iter()).find(|p| p.modes() != modes) {
            return Err(Error::ModeMismatch { left: modes, right: p.modes() });
        }
        Ok(Self { modes, phi, pi })
    }

    /// Number of classical variable indices.
    pub fn fields(&self) -> usize {
        self.phi.len()
    }

    /// Number of Fock modes.
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn phi(&self, j: usize) -> Result<&OperatorPoly> {
        self.phi.get(j.wrapping_sub(1)).ok_or(Error::BadModeIndex { mode: j, modes: self.fields() })
    }

    pub fn pi(&self, j: usize) -> Result<&OperatorPoly> {
        self.pi.get(j.wrapping_sub(1)).ok_or(Error::BadModeIndex { mode: j, modes: self.fields() })
    }

    fn image(&self, v: Var) -> Result<&OperatorPoly> {
        match v.kind {
            VarKind::Phi => self.phi(v.mode),
            VarKind::Pi => self.pi(v.mode),
            VarKind::PhiDot => Err(Error::Domain(format!(
                "{v} has no field-operator image; use the expanded-space maps"
            ))),
        }
    }

    fn quantize(&self, f: &ClassicalPoly, wick: bool) -> Result<OperatorPoly> {
        if f.has_kind(VarKind::PhiDot) {
            return Err(Error::Domain("phidot variables are not quantizable here".into()));
        }
        if let Some(m) = f.max_mode_index() {
            if m > self.fields() {
                return Err(Error::BadModeIndex { mode: m, modes: self.fields() });
            }
        }
        let mut out = OperatorPoly::zero(self.modes);
        for term in f.terms() {
            let mut p = OperatorPoly::constant(self.modes, Complex64::new(term.coefficient, 0.0))?;
            // Φ factors (mode order) strictly left of Π factors
            let ordered = term
                .exponents
                .iter()
                .filter(|(v, _)| v.kind == VarKind::Phi)
                .chain(term.exponents.iter().filter(|(v, _)| v.kind == VarKind::Pi));
            for (v, e) in ordered {
                let base = self.image(v)?;
                p = if wick { p.wick_product(&base.wick_pow(e)?)? } else { p.multiply(&base.pow(e)?)? };
            }
            out = out.add(&p)?;
        }
        Ok(out)
    }

    pub fn quantize_canonical(&self, f: &ClassicalPoly) -> Result<OperatorPoly> {
        self.quantize(f, false)
    }

    pub fn quantize_normal(&self, f: &ClassicalPoly) -> Result<OperatorPoly> {
        self.quantize(f, true)
    }
}

/// f_c: Φ and Π substituted in written order (all Φ left of all Π).
pub fn quantize_canonical(f: &ClassicalPoly) -> Result<OperatorPoly> {
    FieldBasis::ladder(f.modes())?.quantize_canonical(f)
}

/// f_n: the normal (colon) product of the ladder expansion, contraction constants dropped.
pub fn quantize_normal(f: &ClassicalPoly) -> Result<OperatorPoly> {
    FieldBasis::ladder(f.modes())?.quantize_normal(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BracketSide {
    Phi,
    Pi,
}

/// Residual of the bracket identities
/// `[Φ_j, f_n] = (i/2)(∂f/∂π_j)_n` and `[Π_j, f_n] = −(i/2)(∂f/∂φ_j)_n`.
pub fn check_bracket_identity(f: &ClassicalPoly, j: usize, side: BracketSide) -> Result<OperatorPoly> {
    let basis = FieldBasis::ladder(f.modes())?;
    let fn_ = basis.quantize_normal(f)?;
    match side {
        BracketSide::Phi => {
            let lhs = basis.phi(j)?.commutator(&fn_)?;
            let rhs = basis.quantize_normal(&f.partial_derivative(Var::pi(j)))?.scale(HALF_I)?;
            lhs.sub(&rhs)
        }
        BracketSide::Pi => {
            let lhs = basis.pi(j)?.commutator(&fn_)?;
            let rhs = basis.quantize_normal(&f.partial_derivative(Var::phi(j)))?.scale(HALF_I)?;
            lhs.add(&rhs)
        }
    }
}
