use serde::Serialize;

use crate::algebra::{Family, Generator};
use crate::error::{Error, Result};

pub const DEFAULT_DIMENSION_BUDGET: usize = 65_536;

/// Truncated bosonic Fock space.
///
/// Each generator slot carries occupations `0..=cutoff`. The basis index is
/// the mixed-radix number of the occupation tuple, least-significant slot
/// first. Expanded spaces have the A-family slots `0..n` followed by the
/// B-family slots `n..2n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FockSpace {
    modes: usize,
    cutoff: usize,
    expanded: bool,
    dimension: usize,
}

impl FockSpace {
    pub fn new(modes: usize, cutoff: usize) -> Result<Self> {
        Self::build(modes, cutoff, false, DEFAULT_DIMENSION_BUDGET)
    }

    pub fn with_budget(modes: usize, cutoff: usize, budget: usize) -> Result<Self> {
        Self::build(modes, cutoff, false, budget)
    }

    /// Doubled (a, b) space with `modes` modes in each family.
    pub fn expanded(modes: usize, cutoff: usize) -> Result<Self> {
        Self::build(modes, cutoff, true, DEFAULT_DIMENSION_BUDGET)
    }

    fn build(modes: usize, cutoff: usize, expanded: bool, budget: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Domain("a Fock space needs at least one mode".into()));
        }
        let slots = if expanded { 2 * modes } else { modes };
        let dimension = (cutoff + 1)
            .checked_pow(slots as u32)
            .filter(|&d| d <= budget)
            .ok_or(Error::DimensionBudget {
                dimension: (cutoff as f64 + 1.0).powi(slots as i32).min(usize::MAX as f64) as usize,
                budget,
            })?;
        Ok(Self { modes, cutoff, expanded, dimension })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_expanded(&self) -> bool {
        self.expanded
    }

    pub fn slots(&self) -> usize {
        if self.expanded {
            2 * self.modes
        } else {
            self.modes
        }
    }

    pub fn slot(&self, g: Generator) -> Result<usize> {
        if g.mode == 0 || g.mode > self.modes {
            return Err(Error::BadModeIndex { mode: g.mode, modes: self.modes });
        }
        match (g.family, self.expanded) {
            (Family::A, _) => Ok(g.mode - 1),
            (Family::B, true) => Ok(self.modes + g.mode - 1),
            (Family::B, false) => Err(Error::FamilyMismatch(Family::B)),
        }
    }

    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let radix = self.cutoff + 1;
        (0..self.slots())
            .map(|_| {
                let k = index % radix;
                index /= radix;
                k
            })
            .collect()
    }

    pub fn index(&self, occupations: &[usize]) -> usize {
        let radix = self.cutoff + 1;
        occupations.iter().rev().fold(0, |acc, &k| acc * radix + k)
    }

    /// Basis indices whose every occupation is at most `cutoff - margin`.
    pub fn interior(&self, margin: usize) -> Vec<usize> {
        let top = self.cutoff.saturating_sub(margin);
        if margin > self.cutoff {
            return Vec::new();
        }
        (0..self.dimension).filter(|&i| self.occupations(i).iter().all(|&k| k <= top)).collect()
    }

    /// Applies a slot-resolved word (rightmost acts first) to a basis state.
    pub(crate) fn apply_slots(&self, word: &[(usize, bool)], index: usize) -> Option<(f64, usize)> {
        let mut occ = self.occupations(index);
        let mut amp = 1.0;
        for &(slot, dagger) in word.iter().rev() {
            let k = occ[slot];
            if dagger {
                if k == self.cutoff {
                    return None;
                }
                amp *= ((k + 1) as f64).sqrt();
                occ[slot] = k + 1;
            } else {
                if k == 0 {
                    return None;
                }
                amp *= (k as f64).sqrt();
                occ[slot] = k - 1;
            }
        }
        Some((amp, self.index(&occ)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_radix_lsb_first() {
        let s = FockSpace::new(2, 2).unwrap();
        assert_eq!(s.dimension(), 9);
        assert_eq!(s.occupations(1), vec![1, 0]);
        assert_eq!(s.occupations(3), vec![0, 1]);
        for i in 0..9 {
            assert_eq!(s.index(&s.occupations(i)), i);
        }
    }

    #[test]
    fn budget_enforced() {
        assert!(matches!(FockSpace::new(4, 16), Err(Error::DimensionBudget { .. })));
        assert!(FockSpace::new(2, 255).is_ok());
        assert!(FockSpace::expanded(2, 15).is_ok());
        assert!(matches!(FockSpace::expanded(3, 7), Err(Error::DimensionBudget { .. })));
    }

    #[test]
    fn b_family_needs_expanded_space() {
        let s = FockSpace::new(1, 3).unwrap();
        assert!(matches!(s.slot(Generator::b(1)), Err(Error::FamilyMismatch(Family::B))));
        let e = FockSpace::expanded(2, 3).unwrap();
        assert_eq!(e.slot(Generator::b(1)).unwrap(), 2);
        assert_eq!(e.slots(), 4);
    }

    #[test]
    fn interior_counts() {
        let s = FockSpace::new(2, 3).unwrap();
        assert_eq!(s.interior(1).len(), 9);
        assert_eq!(s.interior(0).len(), 16);
    }
}
