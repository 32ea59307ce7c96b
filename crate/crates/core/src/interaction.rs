//! AND-OR interaction sets and their JSON file format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_variable_count, reconstruct_all, LatticeVector, SubsetMask};

/// AND and OR interaction effects of one sample, plus the salient subsets.
///
/// `i_and[∅]` carries the empty-sample output (the AND side owns it) and
/// `i_or[∅]` is always zero. Neither enters the logical model as an
/// interaction: the model adds `bias` instead.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionSet {
    pub i_and: LatticeVector,
    pub i_or: LatticeVector,
    pub bias: f64,
    pub tau: f64,
    pub omega_and: Vec<SubsetMask>,
    pub omega_or: Vec<SubsetMask>,
}

#[derive(Serialize, Deserialize)]
struct InteractionFile {
    format_version: u32,
    n: usize,
    bias: f64,
    tau: f64,
    i_and: Vec<f64>,
    i_or: Vec<f64>,
    omega_and: Vec<u32>,
    omega_or: Vec<u32>,
}

impl InteractionSet {
    /// Builds a set and derives `Ω` from `tau`.
    pub fn new(bias: f64, i_and: LatticeVector, mut i_or: LatticeVector, tau: f64) -> Result<Self> {
        if i_and.n() != i_or.n() {
            return Err(Error::Shape(format!(
                "AND effects over {} variables, OR effects over {}",
                i_and.n(),
                i_or.n()
            )));
        }
        if !(tau >= 0.0) {
            return Err(Error::Domain(format!("threshold tau = {tau} must be >= 0")));
        }
        i_or.set(SubsetMask::EMPTY, 0.0);
        if !bias.is_finite() {
            return Err(Error::NonFinite {
                mask: 0,
                context: "bias".into(),
            });
        }
        let (omega_and, omega_or) = salient_sets(&i_and, &i_or, tau);
        Ok(InteractionSet {
            i_and,
            i_or,
            bias,
            tau,
            omega_and,
            omega_or,
        })
    }

    /// A set with no interactions; `i_and[∅]` holds the bias.
    pub fn empty(n: usize, bias: f64) -> Result<Self> {
        let mut i_and = LatticeVector::zeros(n)?;
        i_and.set(SubsetMask::EMPTY, bias);
        Self::new(bias, i_and, LatticeVector::zeros(n)?, 0.0)
    }

    pub fn n(&self) -> usize {
        self.i_and.n()
    }

    /// Re-threshold with a new `tau`.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.bias, self.i_and.clone(), self.i_or.clone(), tau)
    }

    /// `sum_{S≠∅} |I^AND_S| + |I^OR_S|`.
    pub fn l1_norm(&self) -> f64 {
        let and: f64 = self.i_and.as_slice()[1..].iter().map(|x| x.abs()).sum();
        let or: f64 = self.i_or.as_slice()[1..].iter().map(|x| x.abs()).sum();
        and + or
    }

    pub fn salient_count(&self) -> usize {
        self.omega_and.len() + self.omega_or.len()
    }

    /// Logical-model outputs on all masked samples.
    pub fn outputs(&self) -> LatticeVector {
        reconstruct_all(self.bias, &self.i_and, &self.i_or).expect("AND and OR share n")
    }

    /// Elementwise scaling of every effect, the bias and the threshold.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.bias * factor,
            self.i_and.scaled(factor),
            self.i_or.scaled(factor),
            self.tau * factor.abs(),
        )
    }

    pub fn to_json(&self) -> String {
        let file = InteractionFile {
            format_version: crate::table::FORMAT_VERSION,
            n: self.n(),
            bias: self.bias,
            tau: self.tau,
            i_and: self.i_and.as_slice().to_vec(),
            i_or: self.i_or.as_slice().to_vec(),
            omega_and: self.omega_and.iter().map(|s| s.bits()).collect(),
            omega_or: self.omega_or.iter().map(|s| s.bits()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("interaction set serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let file: InteractionFile =
            serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        check_variable_count(file.n).map_err(|e| Error::parse(origin, e.to_string()))?;
        let vector = |name: &str, values: Vec<f64>| {
            LatticeVector::new(file.n, values).map_err(|e| Error::parse(origin, format!("{name}: {e}")))
        };
        let i_and = vector("i_and", file.i_and)?;
        let i_or = vector("i_or", file.i_or)?;
        let masks = |name: &str, bits: Vec<u32>| {
            bits.into_iter()
                .map(|b| SubsetMask::new(b, file.n).map_err(|e| Error::parse(origin, format!("{name}: {e}"))))
                .collect::<Result<Vec<_>>>()
        };
        Ok(InteractionSet {
            omega_and: masks("omega_and", file.omega_and)?,
            omega_or: masks("omega_or", file.omega_or)?,
            i_and,
            i_or,
            bias: file.bias,
            tau: file.tau,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

fn salient_sets(
    i_and: &LatticeVector,
    i_or: &LatticeVector,
    tau: f64,
) -> (Vec<SubsetMask>, Vec<SubsetMask>) {
    let pick = |v: &LatticeVector| {
        v.iter()
            .filter(|(_, x)| x.abs() > tau)
            .map(|(s, _)| s)
            .collect::<Vec<_>>()
    };
    (pick(i_and), pick(i_or))
}

/// `Ω^AND = {S : |I^AND_S| > τ}` and likewise for OR.
pub fn salient_filter(iset: &InteractionSet, tau: f64) -> Result<(Vec<SubsetMask>, Vec<SubsetMask>)> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("threshold tau = {tau} must be >= 0")));
    }
    Ok(salient_sets(&iset.i_and, &iset.i_or, tau))
}

/// Largest order among interactions with `|I| > tau`; 0 if there are none.
///
/// The empty subset is the bias, not an interaction, and never counts.
pub fn max_order(iset: &InteractionSet, tau: f64) -> usize {
    iset.i_and
        .iter()
        .chain(iset.i_or.iter())
        .filter(|(s, x)| !s.is_empty() && x.abs() > tau)
        .map(|(s, _)| s.order())
        .max()
        .unwrap_or(0)
}
