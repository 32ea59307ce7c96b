//! Jaccard similarity between train and test interaction distributions.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::InteractionSet;
use crate::lattice::{InteractionKind, SubsetMask};

/// Ordered interactions that vectors are aligned to. Each entry owns two
/// slots, positive then negative.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Universe {
    pub entries: Vec<(SubsetMask, InteractionKind)>,
}

impl Universe {
    /// Union of the salient interactions of all sets, in a fixed order.
    /// `order` keeps only subsets of that size.
    pub fn from_salient<'a>(sets: impl IntoIterator<Item = &'a InteractionSet>, order: Option<usize>) -> Self {
        let mut all = BTreeSet::new();
        for s in sets {
            for &m in &s.omega_and {
                all.insert((m, InteractionKind::And));
            }
            for &m in &s.omega_or {
                all.insert((m, InteractionKind::Or));
            }
        }
        Universe {
            entries: all
                .into_iter()
                .filter(|(m, _)| !m.is_empty() && order.is_none_or(|k| m.order() == k))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Nonnegative `[max(I,0), max(−I,0)]` pairs aligned with a universe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionVector {
    pub values: Vec<f64>,
}

/// Population mean of interaction vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionDistribution {
    pub vector: InteractionVector,
    pub count: usize,
}

/// Splits each universe entry of `iset` into its positive and negative part.
/// Entries outside `Ω` of `iset` contribute zero.
pub fn vectorize(iset: &InteractionSet, universe: &Universe) -> InteractionVector {
    let salient = |m: SubsetMask, kind: InteractionKind| match kind {
        InteractionKind::And => iset.omega_and.contains(&m),
        InteractionKind::Or => iset.omega_or.contains(&m),
    };
    let mut values = Vec::with_capacity(2 * universe.len());
    for &(m, kind) in &universe.entries {
        let x = if m.index() < iset.i_and.len() && salient(m, kind) {
            match kind {
                InteractionKind::And => iset.i_and.get(m),
                InteractionKind::Or => iset.i_or.get(m),
            }
        } else {
            0.0
        };
        values.push(x.max(0.0));
        values.push((-x).max(0.0));
    }
    InteractionVector { values }
}

pub fn average(sets: &[InteractionSet], universe: &Universe) -> Result<InteractionDistribution> {
    if sets.is_empty() {
        return Err(Error::InvalidInput("cannot average an empty population".into()));
    }
    let mut acc = vec![0.0; 2 * universe.len()];
    for s in sets {
        for (a, v) in acc.iter_mut().zip(vectorize(s, universe).values) {
            *a += v;
        }
    }
    let k = sets.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(InteractionDistribution {
        vector: InteractionVector { values: acc },
        count: sets.len(),
    })
}

/// `‖min(a, b)‖₁ / ‖max(a, b)‖₁`.
pub fn jaccard(d_train: &InteractionDistribution, d_test: &InteractionDistribution) -> Result<f64> {
    jaccard_values(&d_train.vector.values, &d_test.vector.values)
}

pub fn jaccard_values(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    if let Some(x) = a.iter().chain(b).find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidInput(format!("entries must be finite and >= 0, got {x}")));
    }
    let (lo, hi) = a.iter().zip(b).fold((0.0, 0.0), |(lo, hi), (x, y)| (lo + x.min(*y), hi + x.max(*y)));
    if hi == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok(lo / hi)
}

/// One row of an order-wise comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSimilarity {
    /// Interaction order; `None` for the comparison over all orders.
    pub m: Option<usize>,
    /// `None` when the order has no salient interaction in either population.
    pub sim: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub universe_size: usize,
}

fn compare(train: &[InteractionSet], test: &[InteractionSet], order: Option<usize>) -> Result<OrderSimilarity> {
    let universe = Universe::from_salient(train.iter().chain(test), order);
    let sim = if universe.is_empty() {
        None
    } else {
        match jaccard(&average(train, &universe)?, &average(test, &universe)?) {
            Ok(s) => Some(s),
            Err(Error::UndefinedSimilarity) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(OrderSimilarity {
        m: order,
        sim,
        n_train: train.len(),
        n_test: test.len(),
        universe_size: universe.len(),
    })
}

fn check_populations(train: &[InteractionSet], test: &[InteractionSet]) -> Result<usize> {
    let n = train
        .first()
        .or(test.first())
        .map(InteractionSet::n)
        .ok_or_else(|| Error::InvalidInput("empty populations".into()))?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidInput("both populations must be nonempty".into()));
    }
    if let Some(s) = train.iter().chain(test).find(|s| s.n() != n) {
        return Err(Error::Shape(format!("interaction sets over {n} and {} variables", s.n())));
    }
    Ok(n)
}

/// Similarity for each order `m = 1..=n`.
pub fn orderwise_jaccard(train: &[InteractionSet], test: &[InteractionSet]) -> Result<Vec<OrderSimilarity>> {
    let n = check_populations(train, test)?;
    (1..=n).map(|m| compare(train, test, Some(m))).collect()
}

/// Similarity over all orders together.
pub fn overall_jaccard(train: &[InteractionSet], test: &[InteractionSet]) -> Result<OrderSimilarity> {
    check_populations(train, test)?;
    compare(train, test, None)
}

/// `m,sim,n_train,n_test,universe_size`; the overall row has `m = all` and
/// empty orders leave `sim` blank.
pub fn jaccard_csv(rows: &[OrderSimilarity]) -> String {
    let mut out = String::from("m,sim,n_train,n_test,universe_size\n");
    for r in rows {
        let m = r.m.map_or_else(|| "all".to_string(), |m| m.to_string());
        let sim = r.sim.map_or_else(String::new, |s| s.to_string());
        let _ = writeln!(out, "{m},{sim},{},{},{}", r.n_train, r.n_test, r.universe_size);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeVector;

    fn set(n: usize, and: &[(&[usize], f64)], or: &[(&[usize], f64)]) -> InteractionSet {
        let mut i_and = LatticeVector::zeros(n).unwrap();
        for (s, x) in and {
            i_and.set(SubsetMask::from_indices(s), *x);
        }
        let mut i_or = LatticeVector::zeros(n).unwrap();
        for (s, x) in or {
            i_or.set(SubsetMask::from_indices(s), *x);
        }
        InteractionSet::new(0.0, i_and, i_or, 0.0).unwrap()
    }

    #[test]
    fn vectorize_splits_signs() {
        let s = set(2, &[(&[0], 2.0)], &[(&[0, 1], -1.0)]);
        let u = Universe::from_salient([&s], None);
        assert_eq!(u.len(), 2);
        assert_eq!(vectorize(&s, &u).values, vec![2.0, 0.0, 0.0, 1.0]);
        let empty = set(2, &[], &[]);
        assert!(vectorize(&empty, &u).values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn jaccard_hand_case() {
        assert_eq!(jaccard_values(&[1.0, 0.0, 2.0], &[0.5, 1.0, 2.0]).unwrap(), 0.625);
        assert_eq!(jaccard_values(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert_eq!(jaccard_values(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(matches!(jaccard_values(&[0.0], &[0.0]), Err(Error::UndefinedSimilarity)));
    }

    #[test]
    fn orderwise_on_identical_and_disjoint_populations() {
        let a = vec![set(3, &[(&[0], 1.0), (&[0, 1], 2.0)], &[])];
        let rows = orderwise_jaccard(&a, &a).unwrap();
        assert_eq!(rows[0].sim, Some(1.0));
        assert_eq!(rows[1].sim, Some(1.0));
        assert_eq!(rows[2].sim, None);
        let b = vec![set(3, &[(&[0], 1.0)], &[])];
        let rows = orderwise_jaccard(&a, &b).unwrap();
        assert_eq!(rows[1].sim, Some(0.0));
        assert_eq!(overall_jaccard(&a, &b).unwrap().sim, Some(1.0 / 3.0));
    }

    #[test]
    fn csv_layout() {
        let a = vec![set(2, &[(&[0], 1.0)], &[])];
        let mut rows = orderwise_jaccard(&a, &a).unwrap();
        rows.push(overall_jaccard(&a, &a).unwrap());
        assert_eq!(
            jaccard_csv(&rows),
            "m,sim,n_train,n_test,universe_size\n1,1,1,1,1\n2,,1,1,0\nall,1,1,1,1\n"
        );
    }
}
