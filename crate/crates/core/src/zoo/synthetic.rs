//! Logical models with known interactions.

use std::collections::BTreeMap;

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::InteractionSet;
use crate::lattice::{check_variable_count, LatticeVector, SubsetMask};
use crate::table::ValueTable;

/// `v(x_T) = bias + Σ_{S⊆T} and[S] + Σ_{S∩T≠∅} or[S]`, with sparse effects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModel {
    pub n: usize,
    pub bias: f64,
    pub planted_and: BTreeMap<SubsetMask, f64>,
    pub planted_or: BTreeMap<SubsetMask, f64>,
}

impl SyntheticModel {
    pub fn new(
        n: usize,
        bias: f64,
        planted_and: BTreeMap<SubsetMask, f64>,
        planted_or: BTreeMap<SubsetMask, f64>,
    ) -> Result<Self> {
        check_variable_count(n)?;
        for (&s, &x) in planted_and.iter().chain(&planted_or) {
            SubsetMask::new(s.bits(), n)?;
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    mask: s.index(),
                    context: "planted effect".into(),
                });
            }
        }
        if planted_and.contains_key(&SubsetMask::EMPTY) || planted_or.contains_key(&SubsetMask::EMPTY) {
            return Err(Error::InvalidInput(
                "the empty subset is the bias, not a planted interaction".into(),
            ));
        }
        Ok(SyntheticModel {
            n,
            bias,
            planted_and,
            planted_or,
        })
    }

    /// Random sparse model: `count` distinct interactions, each AND or OR with
    /// equal odds, magnitudes uniform in `magnitude` and random sign.
    pub fn random(n: usize, count: usize, magnitude: (f64, f64), seed: u64) -> Result<Self> {
        Self::random_bounded(n, count, magnitude, n, seed)
    }

    /// As [`Self::random`], with every planted subset of order at most `max_order`.
    pub fn random_bounded(n: usize, count: usize, magnitude: (f64, f64), max_order: usize, seed: u64) -> Result<Self> {
        check_variable_count(n)?;
        let subsets: Vec<SubsetMask> = SubsetMask::all(n)
            .filter(|s| !s.is_empty() && s.order() <= max_order)
            .collect();
        let slots = 2 * subsets.len();
        if count > slots {
            return Err(Error::InvalidInput(format!(
                "cannot plant {count} interactions of order <= {max_order} over {n} variables"
            )));
        }
        let (lo, hi) = magnitude;
        if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidInput(format!("bad magnitude range [{lo}, {hi}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chosen = (0..slots).choose_multiple(&mut rng, count);
        let mut planted_and = BTreeMap::new();
        let mut planted_or = BTreeMap::new();
        for slot in chosen {
            let s = subsets[slot / 2];
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let x = sign * rng.random_range(lo..=hi);
            if slot % 2 == 0 {
                planted_and.insert(s, x);
            } else {
                planted_or.insert(s, x);
            }
        }
        let bias = rng.random_range(-1.0..1.0);
        Self::new(n, bias, planted_and, planted_or)
    }

    pub fn eval(&self, t: SubsetMask) -> f64 {
        let and: f64 = self
            .planted_and
            .iter()
            .filter(|(s, _)| s.is_subset_of(t))
            .map(|(_, x)| x)
            .sum();
        let or: f64 = self
            .planted_or
            .iter()
            .filter(|(s, _)| s.intersects(t))
            .map(|(_, x)| x)
            .sum();
        self.bias + and + or
    }

    pub fn table(&self) -> Result<ValueTable> {
        ValueTable::from_evaluator(self.n, |t| self.eval(t))
    }

    /// `Σ |planted effect|`.
    pub fn l1_norm(&self) -> f64 {
        self.planted_and.values().chain(self.planted_or.values()).map(|x| x.abs()).sum()
    }

    pub fn interactions(&self, tau: f64) -> Result<InteractionSet> {
        let mut i_and = LatticeVector::zeros(self.n)?;
        i_and.set(SubsetMask::EMPTY, self.bias);
        for (&s, &x) in &self.planted_and {
            i_and.set(s, x);
        }
        let mut i_or = LatticeVector::zeros(self.n)?;
        for (&s, &x) in &self.planted_or {
            i_or.set(s, x);
        }
        InteractionSet::new(self.bias, i_and, i_or, tau)
    }
}

/// `v(x_T)` of `m`.
pub fn synthetic_eval(m: &SyntheticModel, t: SubsetMask) -> f64 {
    m.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(and: &[(&[usize], f64)], or: &[(&[usize], f64)], bias: f64) -> SyntheticModel {
        let map = |xs: &[(&[usize], f64)]| xs.iter().map(|(s, x)| (SubsetMask::from_indices(s), *x)).collect();
        SyntheticModel::new(3, bias, map(and), map(or)).unwrap()
    }

    #[test]
    fn planted_triggers() {
        let m = model(&[(&[0, 1], 2.0)], &[], 1.0);
        assert_eq!(m.eval(SubsetMask::from_indices(&[0, 1])), 3.0);
        assert_eq!(m.eval(SubsetMask::EMPTY), 1.0);
        let m = model(&[], &[(&[0, 1], 2.0)], 0.5);
        assert_eq!(m.eval(SubsetMask::from_indices(&[1])), 2.5);
        assert_eq!(m.eval(SubsetMask::EMPTY), 0.5);
    }

    #[test]
    fn table_matches_reconstruction() {
        let m = SyntheticModel::random(5, 8, (0.5, 3.0), 3).unwrap();
        let t = m.table().unwrap();
        let h = m.interactions(0.0).unwrap().outputs();
        for (s, v) in t.values().iter() {
            assert!((v - h.get(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn random_model_respects_count_and_range() {
        let m = SyntheticModel::random(6, 15, (0.5, 3.0), 9).unwrap();
        assert_eq!(m.planted_and.len() + m.planted_or.len(), 15);
        assert!(m.planted_and.values().chain(m.planted_or.values()).all(|x| (0.5..=3.0).contains(&x.abs())));
        assert_eq!(m, SyntheticModel::random(6, 15, (0.5, 3.0), 9).unwrap());
    }

    #[test]
    fn empty_subset_cannot_be_planted() {
        let mut and = BTreeMap::new();
        and.insert(SubsetMask::EMPTY, 1.0);
        assert!(SyntheticModel::new(2, 0.0, and, BTreeMap::new()).is_err());
    }
}
