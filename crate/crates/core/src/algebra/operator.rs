//! Polynomials over bosonic ladder generators, kept in normal-ordered canonical form.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEGREE: usize = 16;

/// Relative magnitude below which merged coefficients are dropped.
const MERGE_CUTOFF: f64 = 1e-14;

/// Residual coefficients at or below this magnitude count as symbolically zero.
pub const SYMBOLIC_ZERO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
}

/// A single creation or annihilation operator `a_j`, `a_j⁺`, `b_j` or `b_j⁺`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Generator {
    pub family: Family,
    /// 1-based mode index.
    pub mode: usize,
    pub dagger: bool,
}

impl Generator {
    pub fn a(mode: usize) -> Self {
        Self { family: Family::A, mode, dagger: false }
    }

    pub fn a_dag(mode: usize) -> Self {
        Self { family: Family::A, mode, dagger: true }
    }

    pub fn b(mode: usize) -> Self {
        Self { family: Family::B, mode, dagger: false }
    }

    pub fn b_dag(mode: usize) -> Self {
        Self { family: Family::B, mode, dagger: true }
    }

    pub fn adjoint(self) -> Self {
        Self { dagger: !self.dagger, ..self }
    }

    fn normal_key(&self) -> (bool, Family, usize) {
        (!self.dagger, self.family, self.mode)
    }
}

impl Ord for Generator {
    fn cmp(&self, other: &Self) -> Ordering {
        self.normal_key().cmp(&other.normal_key())
    }
}

impl PartialOrd for Generator {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.family {
            Family::A => "a",
            Family::B => "b",
        };
        write!(f, "{}{}{}", name, self.mode, if self.dagger { "+" } else { "" })
    }
}

/// A raw (not necessarily ordered) product of generators with a coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderMonomial {
    pub coefficient: Complex64,
    pub word: Vec<Generator>,
}

impl LadderMonomial {
    pub fn new(coefficient: Complex64, word: Vec<Generator>) -> Self {
        Self { coefficient, word }
    }
}

/// Normal-ordered word; ordered by length first so constants sort ahead.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Word(Vec<Generator>);

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

type SlotExponents = BTreeMap<(Family, usize), (u32, u32)>;

fn slot_exponents(word: &[Generator]) -> SlotExponents {
    let mut slots = SlotExponents::new();
    for g in word {
        let e = slots.entry((g.family, g.mode)).or_insert((0, 0));
        if g.dagger {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    slots
}

fn word_from_slots(slots: &SlotExponents) -> Vec<Generator> {
    let mut word = Vec::new();
    for (&(family, mode), &(cre, _)) in slots {
        word.extend(std::iter::repeat_n(Generator { family, mode, dagger: true }, cre as usize));
    }
    for (&(family, mode), &(_, ann)) in slots {
        word.extend(std::iter::repeat_n(Generator { family, mode, dagger: false }, ann as usize));
    }
    word
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * f64::from(i))
}

/// Product of two normal-ordered words, itself expanded into normal-ordered words.
///
/// Per slot, `c^q1 (c⁺)^p2 = Σ_r C(q1,r) C(p2,r) r! (c⁺)^(p2-r) c^(q1-r)`.
/// With `wick` set only the `r = 0` term is kept (the colon product).
fn multiply_words(left: &[Generator], right: &[Generator], wick: bool) -> Vec<(f64, Vec<Generator>)> {
    let l = slot_exponents(left);
    let r = slot_exponents(right);
    let keys: BTreeSet<_> = l.keys().chain(r.keys()).copied().collect();
    let mut partial: Vec<(f64, SlotExponents)> = vec![(1.0, SlotExponents::new())];
    for key in keys {
        let (p1, q1) = l.get(&key).copied().unwrap_or((0, 0));
        let (p2, q2) = r.get(&key).copied().unwrap_or((0, 0));
        let rmax = if wick { 0 } else { q1.min(p2) };
        let mut next = Vec::with_capacity(partial.len() * (rmax as usize + 1));
        for (coef, slots) in &partial {
            for k in 0..=rmax {
                let weight = binomial(q1, k) * binomial(p2, k) * factorial(k);
                let mut s = slots.clone();
                let cre = p1 + p2 - k;
                let ann = q1 + q2 - k;
                if cre + ann > 0 {
                    s.insert(key, (cre, ann));
                }
                next.push((coef * weight, s));
            }
        }
        partial = next;
    }
    partial.into_iter().map(|(c, s)| (c, word_from_slots(&s))).collect()
}

/// Complex polynomial over ladder generators in canonical normal-ordered form.
///
/// Each stored word has every daggered generator left of every undaggered one,
/// both blocks sorted by (family, mode). Two polynomials are equal iff their
/// term maps are identical.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorPoly {
    modes: usize,
    max_degree: usize,
    terms: BTreeMap<Word, Complex64>,
}

impl OperatorPoly {
    pub fn zero(modes: usize) -> Self {
        Self { modes, max_degree: DEFAULT_MAX_DEGREE, terms: BTreeMap::new() }
    }

    pub fn constant(modes: usize, c: Complex64) -> Result<Self> {
        let mut p = Self::zero(modes);
        p.insert(Vec::new(), c)?;
        p.cleanup();
        Ok(p)
    }

    pub fn identity(modes: usize) -> Self {
        Self::constant(modes, Complex64::new(1.0, 0.0)).expect("finite")
    }

    pub fn generator(modes: usize, g: Generator) -> Result<Self> {
        check_mode(g.mode, modes)?;
        let mut p = Self::zero(modes);
        p.terms.insert(Word(vec![g]), Complex64::new(1.0, 0.0));
        Ok(p)
    }

    /// Normal-orders a sum of raw monomials using the canonical commutation relations.
    pub fn from_monomials<I>(modes: usize, monomials: I) -> Result<Self>
    where
        I: IntoIterator<Item = LadderMonomial>,
    {
        let mut total = Self::zero(modes);
        for m in monomials {
            let mut p = Self::constant(modes, m.coefficient)?;
            for g in &m.word {
                p = p.multiply(&Self::generator(modes, *g)?)?;
            }
            total = total.add(&p)?;
        }
        Ok(total)
    }

    pub fn with_max_degree(mut self, max_degree: usize) -> Self {
        self.max_degree = max_degree;
        self
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
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

    /// Longest word length (0 for constants and for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|w| w.0.len()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[Generator], Complex64)> + '_ {
        self.terms.iter().map(|(w, c)| (w.0.as_slice(), *c))
    }

    /// Coefficient of a word; the word is normal-sorted before lookup.
    pub fn coefficient(&self, word: &[Generator]) -> Complex64 {
        let mut w = word.to_vec();
        w.sort();
        self.terms.get(&Word(w)).copied().unwrap_or_default()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// True when every coefficient magnitude is at most `tol`.
    pub fn is_symbolically_zero(&self, tol: f64) -> bool {
        self.max_abs_coefficient() <= tol
    }

    pub fn has_family(&self, family: Family) -> bool {
        self.terms.keys().any(|w| w.0.iter().any(|g| g.family == family))
    }

    pub fn has_dagger(&self) -> bool {
        self.terms.keys().any(|w| w.0.iter().any(|g| g.dagger))
    }

    fn insert(&mut self, word: Vec<Generator>, c: Complex64) -> Result<()> {
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::NonFinite);
        }
        if word.len() > self.max_degree {
            return Err(Error::DegreeOverflow { degree: word.len(), max: self.max_degree });
        }
        *self.terms.entry(Word(word)).or_default() += c;
        Ok(())
    }

    fn cleanup(&mut self) {
        let largest = self.max_abs_coefficient();
        let floor = largest * MERGE_CUTOFF;
        self.terms.retain(|_, c| c.norm() > floor && *c != Complex64::new(0.0, 0.0));
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.modes != other.modes {
            return Err(Error::ModeMismatch { left: self.modes, right: other.modes });
        }
        Ok(())
    }

    fn empty_like(&self, other: &Self) -> Self {
        let mut p = Self::zero(self.modes);
        p.max_degree = self.max_degree.max(other.max_degree);
        p
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.empty_like(other);
        for (w, c) in self.terms.iter().chain(other.terms.iter()) {
            out.insert(w.0.clone(), *c)?;
        }
        out.cleanup();
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0))?)
    }

    pub fn scale(&self, c: Complex64) -> Result<Self> {
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut out = Self::zero(self.modes).with_max_degree(self.max_degree);
        for (w, v) in &self.terms {
            out.insert(w.0.clone(), v * c)?;
        }
        out.cleanup();
        Ok(out)
    }

    fn product(&self, other: &Self, wick: bool) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.empty_like(other);
        for (lw, lc) in &self.terms {
            for (rw, rc) in &other.terms {
                let len = lw.0.len() + rw.0.len();
                if len > out.max_degree {
                    return Err(Error::DegreeOverflow { degree: len, max: out.max_degree });
                }
                for (weight, word) in multiply_words(&lw.0, &rw.0, wick) {
                    out.insert(word, lc * rc * weight)?;
                }
            }
        }
        out.cleanup();
        Ok(out)
    }

    /// Operator product, re-normal-ordered with all contraction terms.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.product(other, false)
    }

    /// Normal (colon) product: words concatenated and sorted, contractions dropped.
    pub fn wick_product(&self, other: &Self) -> Result<Self> {
        self.product(other, true)
    }

    pub fn pow(&self, k: u32) -> Result<Self> {
        (0..k).try_fold(Self::identity(self.modes).with_max_degree(self.max_degree), |acc, _| acc.multiply(self))
    }

    pub fn wick_pow(&self, k: u32) -> Result<Self> {
        (0..k).try_fold(Self::identity(self.modes).with_max_degree(self.max_degree), |acc, _| {
            acc.wick_product(self)
        })
    }

    /// Reverses each word, toggles daggers and conjugates coefficients.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.modes).with_max_degree(self.max_degree);
        for (w, c) in &self.terms {
            let mut word: Vec<Generator> = w.0.iter().rev().map(|g| g.adjoint()).collect();
            word.sort();
            out.terms.insert(Word(word), c.conj());
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.multiply(other)?.sub(&other.multiply(self)?)
    }

    /// Largest coefficient of `self - adjoint(self)`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).map(|d| d.max_abs_coefficient()).unwrap_or(f64::INFINITY)
    }

    /// Applies an algebra homomorphism given by its action on generators.
    pub fn substitute<F>(&self, modes: usize, mut image: F) -> Result<Self>
    where
        F: FnMut(Generator) -> Result<OperatorPoly>,
    {
        let mut out = Self::zero(modes).with_max_degree(self.max_degree);
        for (w, c) in &self.terms {
            let mut p = Self::constant(modes, *c)?.with_max_degree(self.max_degree);
            for g in &w.0 {
                p = p.multiply(&image(*g)?)?;
            }
            out = out.add(&p)?;
        }
        Ok(out)
    }
}

fn check_mode(mode: usize, modes: usize) -> Result<()> {
    if mode == 0 || mode > modes {
        return Err(Error::BadModeIndex { mode, modes });
    }
    Ok(())
}

/// Normal-orders raw monomials; see [`OperatorPoly::from_monomials`].
pub fn normal_order<I>(modes: usize, monomials: I) -> Result<OperatorPoly>
where
    I: IntoIterator<Item = LadderMonomial>,
{
    OperatorPoly::from_monomials(modes, monomials)
}

pub fn commutator(p: &OperatorPoly, q: &OperatorPoly) -> Result<OperatorPoly> {
    p.commutator(q)
}

fn fmt_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.re == 0.0 {
        format!("{}i", c.im)
    } else {
        format!("({}{:+}i)", c.re, c.im)
    }
}

impl fmt::Display for OperatorPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", fmt_complex(*c))?;
            for g in &w.0 {
                write!(f, " {}", g)?;
            }
        }
        Ok(())
    }
}
