//! Real polynomials in the classical phase-space variables φ_j, π_j and φ̇_j.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algebra::operator::DEFAULT_MAX_DEGREE;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKind {
    Phi,
    PhiDot,
    Pi,
}

impl VarKind {
    pub fn name(self) -> &'static str {
        match self {
            VarKind::Phi => "phi",
            VarKind::PhiDot => "phidot",
            VarKind::Pi => "pi",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var {
    pub kind: VarKind,
    /// 1-based.
    pub mode: usize,
}

impl Var {
    pub fn phi(mode: usize) -> Self {
        Self { kind: VarKind::Phi, mode }
    }

    pub fn pi(mode: usize) -> Self {
        Self { kind: VarKind::Pi, mode }
    }

    pub fn phidot(mode: usize) -> Self {
        Self { kind: VarKind::PhiDot, mode }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.name(), self.mode)
    }
}

/// Exponent map of one monomial; graded order (total degree, then variables).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Exponents(BTreeMap<Var, u32>);

impl Exponents {
    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn get(&self, v: Var) -> u32 {
        self.0.get(&v).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, u32)> + '_ {
        self.0.iter().map(|(v, e)| (*v, *e))
    }

    fn times(&self, other: &Self) -> Self {
        let mut out = self.0.clone();
        for (v, e) in &other.0 {
            *out.entry(*v).or_insert(0) += e;
        }
        Exponents(out)
    }
}

impl FromIterator<(Var, u32)> for Exponents {
    fn from_iter<I: IntoIterator<Item = (Var, u32)>>(iter: I) -> Self {
        let mut map = BTreeMap::new();
        for (v, e) in iter {
            if e > 0 {
                *map.entry(v).or_insert(0) += e;
            }
        }
        Exponents(map)
    }
}

impl Ord for Exponents {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Exponents {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalMonomial {
    pub coefficient: f64,
    pub exponents: Exponents,
}

/// Real multivariate polynomial with merged like terms and deterministic order.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalPoly {
    modes: usize,
    terms: BTreeMap<Exponents, f64>,
}

impl ClassicalPoly {
    pub fn zero(modes: usize) -> Self {
        Self { modes, terms: BTreeMap::new() }
    }

    pub fn constant(modes: usize, c: f64) -> Result<Self> {
        let mut p = Self::zero(modes);
        p.push(Exponents::default(), c)?;
        Ok(p)
    }

    pub fn var(modes: usize, v: Var) -> Result<Self> {
        Self::monomial(modes, 1.0, [(v, 1)])
    }

    pub fn monomial<I>(modes: usize, coefficient: f64, exps: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Var, u32)>,
    {
        let exps: Exponents = exps.into_iter().collect();
        let mut p = Self::zero(modes);
        for (v, e) in exps.iter() {
            if v.mode == 0 || v.mode > modes {
                return Err(Error::BadModeIndex { mode: v.mode, modes });
            }
            if e as usize > DEFAULT_MAX_DEGREE {
                return Err(Error::DegreeOverflow { degree: e as usize, max: DEFAULT_MAX_DEGREE });
            }
        }
        p.push(exps, coefficient)?;
        Ok(p)
    }

    fn push(&mut self, exps: Exponents, c: f64) -> Result<()> {
        if !c.is_finite() {
            return Err(Error::NonFinite);
        }
        if c == 0.0 {
            return Ok(());
        }
        let slot = self.terms.entry(exps).or_insert(0.0);
        *slot += c;
        Ok(())
    }

    fn prune(mut self) -> Self {
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Same polynomial viewed in a space with more modes.
    pub fn with_modes(mut self, modes: usize) -> Result<Self> {
        if let Some(m) = self.max_mode_index() {
            if m > modes {
                return Err(Error::BadModeIndex { mode: m, modes });
            }
        }
        self.modes = modes;
        Ok(self)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Exponents::degree).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = ClassicalMonomial> + '_ {
        self.terms
            .iter()
            .map(|(e, c)| ClassicalMonomial { coefficient: *c, exponents: e.clone() })
    }

    pub fn coefficient(&self, exps: &Exponents) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn has_kind(&self, kind: VarKind) -> bool {
        self.terms.keys().any(|e| e.0.keys().any(|v| v.kind == kind))
    }

    pub fn max_mode_index(&self) -> Option<usize> {
        self.terms.keys().flat_map(|e| e.0.keys().map(|v| v.mode)).max()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.modes != other.modes {
            return Err(Error::ModeMismatch { left: self.modes, right: other.modes });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.push(e.clone(), *c)?;
        }
        Ok(out.prune())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0)?)
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        let mut out = Self::zero(self.modes);
        for (e, c) in &self.terms {
            out.push(e.clone(), c * s)?;
        }
        Ok(out.prune())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = Self::zero(self.modes);
        for (le, lc) in &self.terms {
            for (re, rc) in &other.terms {
                let e = le.times(re);
                if let Some(big) = e.0.values().find(|&&x| x as usize > DEFAULT_MAX_DEGREE) {
                    return Err(Error::DegreeOverflow { degree: *big as usize, max: DEFAULT_MAX_DEGREE });
                }
                out.push(e, lc * rc)?;
            }
        }
        Ok(out.prune())
    }

    pub fn pow(&self, k: u32) -> Result<Self> {
        (0..k).try_fold(Self::constant(self.modes, 1.0)?, |acc, _| acc.mul(self))
    }

    /// Exact formal partial derivative.
    pub fn partial_derivative(&self, var: Var) -> Self {
        let mut out = Self::zero(self.modes);
        for (e, c) in &self.terms {
            let k = e.get(var);
            if k == 0 {
                continue;
            }
            let mut map = e.0.clone();
            if k == 1 {
                map.remove(&var);
            } else {
                map.insert(var, k - 1);
            }
            out.push(Exponents(map), c * f64::from(k)).expect("finite");
        }
        out.prune()
    }

    /// Evaluates at a phase point; the `pi` slice supplies both π_j and φ̇_j.
    pub fn eval(&self, phi: &[f64], pi: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.0.iter().fold(*c, |acc, (v, k)| {
                    let x = match v.kind {
                        VarKind::Phi => phi[v.mode - 1],
                        VarKind::Pi | VarKind::PhiDot => pi[v.mode - 1],
                    };
                    acc * x.powi(*k as i32)
                })
            })
            .sum()
    }

    /// Poisson bracket {f, g} = Σ_j ∂f/∂φ_j ∂g/∂π_j − ∂f/∂π_j ∂g/∂φ_j.
    pub fn poisson_bracket(&self, g: &Self) -> Result<Self> {
        self.check(g)?;
        let mut out = Self::zero(self.modes);
        for j in 1..=self.modes {
            let a = self.partial_derivative(Var::phi(j)).mul(&g.partial_derivative(Var::pi(j)))?;
            let b = self.partial_derivative(Var::pi(j)).mul(&g.partial_derivative(Var::phi(j)))?;
            out = out.add(&a)?.sub(&b)?;
        }
        Ok(out)
    }

    /// Canonical text form; parses back to an identical polynomial.
    pub fn to_dsl(&self) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut s = String::new();
        for (k, (e, c)) in self.terms.iter().enumerate() {
            let mag = format!("{:.16e}", c.abs());
            match (k, *c < 0.0) {
                (0, true) => s.push('-'),
                (0, false) => {}
                (_, true) => s.push_str(" - "),
                (_, false) => s.push_str(" + "),
            }
            s.push_str(&mag);
            for (v, p) in e.iter() {
                s.push('*');
                s.push_str(&v.to_string());
                if p != 1 {
                    s.push_str(&format!("^{}", p));
                }
            }
        }
        s
    }
}

impl fmt::Display for ClassicalPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dsl())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_examples() {
        let half_pi_sq = ClassicalPoly::monomial(1, 0.5, [(Var::pi(1), 2)]).unwrap();
        assert_eq!(half_pi_sq.partial_derivative(Var::pi(1)), ClassicalPoly::var(1, Var::pi(1)).unwrap());

        let quartic = ClassicalPoly::monomial(1, 1.0, [(Var::phi(1), 4)]).unwrap();
        assert_eq!(
            quartic.partial_derivative(Var::phi(1)),
            ClassicalPoly::monomial(1, 4.0, [(Var::phi(1), 3)]).unwrap()
        );

        let sq = ClassicalPoly::monomial(2, 1.0, [(Var::phi(1), 2)]).unwrap();
        assert!(sq.partial_derivative(Var::phi(2)).is_zero());
    }

    #[test]
    fn poisson_bracket_of_canonical_pair() {
        let phi = ClassicalPoly::var(1, Var::phi(1)).unwrap();
        let pi = ClassicalPoly::var(1, Var::pi(1)).unwrap();
        assert_eq!(phi.poisson_bracket(&pi).unwrap(), ClassicalPoly::constant(1, 1.0).unwrap());
    }

    #[test]
    fn eval_mixed() {
        let p = ClassicalPoly::monomial(2, 2.0, [(Var::phi(1), 1), (Var::pi(2), 2)]).unwrap();
        assert!((p.eval(&[0.5, 0.0], &[0.0, 3.0]) - 9.0).abs() < 1e-15);
    }

    #[test]
    fn like_terms_merge_and_cancel() {
        let x = ClassicalPoly::var(1, Var::phi(1)).unwrap();
        assert!(x.sub(&x).unwrap().is_zero());
        assert_eq!(x.add(&x).unwrap().len(), 1);
    }
}
