//! Order-wise strength distributions of interaction sets.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::InteractionSet;
use crate::lattice::{LatticeVector, SubsetMask};

/// Summed positive and negative interaction strength per order `m = 0..=n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderDistribution {
    pub n: usize,
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
    /// Divisor already applied to `pos` and `neg`; 1 when unnormalized.
    pub normalizer: f64,
    pub salient_only: bool,
}

impl OrderDistribution {
    pub fn zeros(n: usize) -> Self {
        OrderDistribution {
            n,
            pos: vec![0.0; n + 1],
            neg: vec![0.0; n + 1],
            normalizer: 1.0,
            salient_only: false,
        }
    }

    pub fn new(pos: Vec<f64>, neg: Vec<f64>) -> Result<Self> {
        if pos.is_empty() || pos.len() != neg.len() {
            return Err(Error::Shape(format!(
                "pos has {} orders, neg has {}",
                pos.len(),
                neg.len()
            )));
        }
        if let Some(x) = pos.iter().chain(&neg).find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "distribution entries must be finite and >= 0, got {x}"
            )));
        }
        Ok(OrderDistribution {
            n: pos.len() - 1,
            pos,
            neg,
            normalizer: 1.0,
            salient_only: false,
        })
    }

    fn add(&mut self, s: SubsetMask, x: f64) {
        if x > 0.0 {
            self.pos[s.order()] += x;
        } else if x < 0.0 {
            self.neg[s.order()] -= x;
        }
    }

    /// `Σ_{m≥1} pos[m] + neg[m]`; order 0 holds the bias and is left out.
    pub fn mass(&self) -> f64 {
        self.pos[1..].iter().chain(&self.neg[1..]).sum()
    }

    /// Order `m ≥ 1` with the largest `pos[m] + neg[m]`; ties go to the lower
    /// order. `None` for `n = 0`.
    pub fn argmax_order(&self) -> Option<usize> {
        (1..=self.n)
            .map(|m| (m, self.pos[m] + self.neg[m]))
            .fold(None, |best: Option<(usize, f64)>, (m, x)| match best {
                Some((_, bx)) if bx >= x => best,
                _ => Some((m, x)),
            })
            .map(|(m, _)| m)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        OrderDistribution {
            pos: self.pos.iter().map(|x| x * factor).collect(),
            neg: self.neg.iter().map(|x| x * factor).collect(),
            ..self.clone()
        }
    }

    fn check_same_n(&self, other: &OrderDistribution) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Shape(format!(
                "distributions over {} and {} orders",
                self.n, other.n
            )));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,pos,neg,normalizer,salient_only\n");
        for m in 0..=self.n {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                m, self.pos[m], self.neg[m], self.normalizer, self.salient_only
            );
        }
        out
    }

    pub fn from_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "m,pos,neg,normalizer,salient_only" => {}
            other => {
                return Err(Error::parse(
                    origin,
                    format!("unexpected header {:?}", other.unwrap_or("")),
                ))
            }
        }
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut normalizer = 1.0;
        let mut salient_only = false;
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |what: &str| Error::parse(origin, format!("row {}: {what}", row + 1));
            if fields.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let m: usize = fields[0].parse().map_err(|_| bad("bad order"))?;
            if m != row {
                return Err(bad("orders must run 0, 1, 2, ..."));
            }
            let num = |s: &str| s.parse::<f64>().ok().filter(|x| x.is_finite());
            pos.push(num(fields[1]).ok_or_else(|| bad("bad pos"))?);
            neg.push(num(fields[2]).ok_or_else(|| bad("bad neg"))?);
            normalizer = num(fields[3]).ok_or_else(|| bad("bad normalizer"))?;
            salient_only = fields[4].parse().map_err(|_| bad("bad salient_only"))?;
        }
        let mut d = OrderDistribution::new(pos, neg).map_err(|e| Error::parse(origin, e.to_string()))?;
        d.normalizer = normalizer;
        d.salient_only = salient_only;
        Ok(d)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn accumulate(d: &mut OrderDistribution, i_and: &LatticeVector, i_or: &LatticeVector) {
    for (s, x) in i_and.iter() {
        d.add(s, x);
    }
    for (s, x) in i_or.iter().skip(1) {
        d.add(s, x);
    }
}

/// Positive and negative strength per order, over `Ω` when `salient_only`.
pub fn order_distribution(iset: &InteractionSet, salient_only: bool) -> OrderDistribution {
    let mut d = OrderDistribution::zeros(iset.n());
    d.salient_only = salient_only;
    if salient_only {
        for &s in &iset.omega_and {
            d.add(s, iset.i_and.get(s));
        }
        for &s in iset.omega_or.iter().filter(|s| !s.is_empty()) {
            d.add(s, iset.i_or.get(s));
        }
    } else {
        accumulate(&mut d, &iset.i_and, &iset.i_or);
    }
    d
}

pub fn normalize(d: &OrderDistribution, z: f64) -> Result<OrderDistribution> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("normalizer must be positive, got {z}")));
    }
    let mut out = d.scaled(1.0 / z);
    out.normalizer = d.normalizer * z;
    Ok(out)
}

/// Mean over sets of the salient first-order strength `Σ_{|S|=1} |I^AND_S| + |I^OR_S|`.
pub fn compute_z(isets: &[InteractionSet]) -> Result<f64> {
    if isets.is_empty() {
        return Err(Error::InvalidInput("no interaction sets to normalize over".into()));
    }
    let total: f64 = isets
        .iter()
        .map(|iset| {
            let and: f64 = iset.omega_and.iter().filter(|s| s.order() == 1).map(|&s| iset.i_and.get(s).abs()).sum();
            let or: f64 = iset.omega_or.iter().filter(|s| s.order() == 1).map(|&s| iset.i_or.get(s).abs()).sum();
            and + or
        })
        .sum();
    let z = total / isets.len() as f64;
    if !(z > 0.0) {
        return Err(Error::DegenerateNormalizer(
            "no salient first-order interactions in any set".into(),
        ));
    }
    Ok(z)
}

/// Distribution of the per-subset differences `I_S(a) − I_S(b)` over all subsets.
pub fn delta_distribution(a: &InteractionSet, b: &InteractionSet) -> Result<OrderDistribution> {
    if a.n() != b.n() {
        return Err(Error::Shape(format!("sets over {} and {} variables", a.n(), b.n())));
    }
    let mut d = OrderDistribution::zeros(a.n());
    accumulate(&mut d, &a.i_and.sub(&b.i_and)?, &a.i_or.sub(&b.i_or)?);
    Ok(d)
}

/// Elementwise `|A_overfit − A_ref|` of two distributions.
pub fn delta_stage(d_overfit: &OrderDistribution, d_ref: &OrderDistribution) -> Result<OrderDistribution> {
    abs_diff(d_overfit, d_ref)
}

pub(crate) fn abs_diff(a: &OrderDistribution, b: &OrderDistribution) -> Result<OrderDistribution> {
    a.check_same_n(b)?;
    Ok(OrderDistribution {
        n: a.n,
        pos: a.pos.iter().zip(&b.pos).map(|(x, y)| (x - y).abs()).collect(),
        neg: a.neg.iter().zip(&b.neg).map(|(x, y)| (x - y).abs()).collect(),
        normalizer: a.normalizer,
        salient_only: a.salient_only,
    })
}

/// Entrywise mean of several distributions over the same `n`.
pub fn mean_distribution(ds: &[OrderDistribution]) -> Result<OrderDistribution> {
    let first = ds
        .first()
        .ok_or_else(|| Error::InvalidInput("no distributions to average".into()))?;
    let mut out = OrderDistribution::zeros(first.n);
    out.normalizer = first.normalizer;
    out.salient_only = first.salient_only;
    for d in ds {
        first.check_same_n(d)?;
        for m in 0..=first.n {
            out.pos[m] += d.pos[m];
            out.neg[m] += d.neg[m];
        }
    }
    Ok(out.scaled(1.0 / ds.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize, and: &[(&[usize], f64)], or: &[(&[usize], f64)], tau: f64) -> InteractionSet {
        let mut i_and = LatticeVector::zeros(n).unwrap();
        for (s, x) in and {
            i_and.set(SubsetMask::from_indices(s), *x);
        }
        let mut i_or = LatticeVector::zeros(n).unwrap();
        for (s, x) in or {
            i_or.set(SubsetMask::from_indices(s), *x);
        }
        InteractionSet::new(0.0, i_and, i_or, tau).unwrap()
    }

    #[test]
    fn single_positive_and() {
        let d = order_distribution(&set(3, &[(&[0, 1], 2.0)], &[], 0.0), true);
        assert_eq!(d.pos, vec![0.0, 0.0, 2.0, 0.0]);
        assert!(d.neg.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mixed_signs_at_one_order() {
        let d = order_distribution(&set(2, &[(&[0], -1.0)], &[(&[0], 1.0)], 0.0), false);
        assert_eq!(d.pos[1], 1.0);
        assert_eq!(d.neg[1], 1.0);
    }

    #[test]
    fn salient_only_skips_small_effects() {
        let s = set(3, &[(&[0], 0.05), (&[1, 2], 1.0)], &[], 0.1);
        assert_eq!(order_distribution(&s, true).pos[1], 0.0);
        assert_eq!(order_distribution(&s, false).pos[1], 0.05);
    }

    #[test]
    fn z_is_mean_of_first_order_strength() {
        assert_eq!(compute_z(&[set(2, &[(&[0], 3.0)], &[], 0.0)]).unwrap(), 3.0);
        let a = set(2, &[(&[0], 2.0)], &[], 0.0);
        let b = set(2, &[(&[0], 1.0)], &[(&[1], -3.0)], 0.0);
        assert_eq!(compute_z(&[a, b]).unwrap(), 3.0);
        let none = set(2, &[(&[0, 1], 1.0)], &[], 0.0);
        assert!(matches!(compute_z(&[none]), Err(Error::DegenerateNormalizer(_))));
    }

    #[test]
    fn normalize_divides_and_records() {
        let d = order_distribution(&set(2, &[(&[0], 2.0), (&[0, 1], 4.0)], &[], 0.0), true);
        let h = normalize(&d, 2.0).unwrap();
        assert_eq!(h.pos, vec![0.0, 1.0, 2.0]);
        assert_eq!(h.normalizer, 2.0);
        assert!(normalize(&d, 0.0).is_err());
    }

    #[test]
    fn delta_of_subsets() {
        let a = set(2, &[(&[0], 1.0)], &[], 0.0);
        let b = set(2, &[(&[0], 3.0)], &[], 0.0);
        let d = delta_distribution(&a, &b).unwrap();
        assert_eq!(d.neg[1], 2.0);
        assert_eq!(d.pos[1], 0.0);
    }

    #[test]
    fn stage_delta_and_mass() {
        let mut a = OrderDistribution::zeros(6);
        let mut b = OrderDistribution::zeros(6);
        a.pos[5] = 3.0;
        b.pos[5] = 1.0;
        b.neg[2] = 0.5;
        let d = delta_stage(&a, &b).unwrap();
        assert_eq!(d.pos[5], 2.0);
        assert_eq!(d, delta_stage(&b, &a).unwrap());
        assert_eq!(d.mass(), 2.5);
        assert_eq!(d.argmax_order(), Some(5));
    }

    #[test]
    fn csv_round_trip() {
        let mut d = order_distribution(&set(3, &[(&[0], 0.1), (&[1, 2], -2.5)], &[(&[2], 1.0 / 3.0)], 0.0), true);
        d.normalizer = 1.5;
        let back = OrderDistribution::from_csv(&d.to_csv(), Path::new("mem")).unwrap();
        assert_eq!(back, d);
        assert!(OrderDistribution::from_csv("m,pos\n0,1\n", Path::new("mem")).is_err());
    }
}
