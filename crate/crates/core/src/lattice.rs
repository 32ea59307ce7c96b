//! Subsets of the variable set `N = {0, .., n-1}` as bitmasks, and the exact
//! transforms between masked-output tables and interaction effects.
//!
//! Every table over the subset lattice is a flat array indexed by mask value,
//! so the zeta and Möbius transforms run in place in `O(n 2^n)`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest variable count accepted by the lattice transforms.
pub const MAX_VARIABLES: usize = 20;

/// Largest variable count for which dense `2^n x 2^n` matrices are built.
pub const MAX_DENSE_VARIABLES: usize = 12;

/// A subset `S` of the variables; bit `i` set means variable `i` is present.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetMask(u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    /// Checked constructor: `n <= MAX_VARIABLES` and `bits < 2^n`.
    pub fn new(bits: u32, n: usize) -> Result<Self> {
        check_variable_count(n)?;
        if (bits as u64) >= (1u64 << n) {
            return Err(Error::InvalidInput(format!(
                "mask {bits:#b} has bits outside of {n} variables"
            )));
        }
        Ok(SubsetMask(bits))
    }

    /// Wraps raw bits without a range check.
    pub const fn from_bits(bits: u32) -> Self {
        SubsetMask(bits)
    }

    /// The full set `N` for `n` variables.
    pub fn full(n: usize) -> Self {
        SubsetMask(((1u64 << n) - 1) as u32)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        SubsetMask(indices.iter().fold(0u32, |acc, &i| acc | (1 << i)))
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    /// Position of this subset in a lattice array.
    pub const fn index(self) -> usize {
        self.0 as usize
    }

    /// `|S|`, the interaction order.
    pub const fn order(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains(self, variable: usize) -> bool {
        self.0 & (1 << variable) != 0
    }

    pub const fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn intersects(self, other: SubsetMask) -> bool {
        self.0 & other.0 != 0
    }

    /// `N \ S` for `n` variables.
    pub fn complement(self, n: usize) -> Self {
        SubsetMask(Self::full(n).0 & !self.0)
    }

    /// Variable indices in ascending order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |i| bits & (1 << i) != 0)
    }

    /// All `2^n` subsets of `N` in mask order.
    pub fn all(n: usize) -> impl Iterator<Item = SubsetMask> {
        (0..(1u32 << n)).map(SubsetMask)
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

pub(crate) fn check_variable_count(n: usize) -> Result<()> {
    if n > MAX_VARIABLES {
        return Err(Error::Resource(format!(
            "{n} variables exceeds the lattice limit of {MAX_VARIABLES}"
        )));
    }
    Ok(())
}

/// Which trigger semantics an interaction uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    /// Active iff every variable of `S` is present.
    And,
    /// Active iff at least one variable of `S` is present.
    Or,
}

impl InteractionKind {
    /// Trigger value of interaction `s` on the masked sample that keeps `t`.
    pub fn triggers(self, s: SubsetMask, t: SubsetMask) -> bool {
        match self {
            InteractionKind::And => s.is_subset_of(t),
            InteractionKind::Or => s.intersects(t),
        }
    }
}

/// A real value for every subset of `N`, indexed by mask.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeVector {
    n: usize,
    values: Vec<f64>,
}

impl LatticeVector {
    pub fn zeros(n: usize) -> Result<Self> {
        check_variable_count(n)?;
        Ok(LatticeVector {
            n,
            values: vec![0.0; 1 << n],
        })
    }

    /// Builds a vector for `n` variables; the length must be `2^n` and every
    /// entry finite.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_variable_count(n)?;
        if values.len() != 1 << n {
            return Err(Error::InvalidInput(format!(
                "expected {} values for {n} variables, got {}",
                1usize << n,
                values.len()
            )));
        }
        if let Some(mask) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                mask,
                context: "lattice vector entry".into(),
            });
        }
        Ok(LatticeVector { n, values })
    }

    /// Infers `n` from the length, which must be a power of two.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let n = variable_count_for_len(values.len())?;
        Self::new(n, values)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(SubsetMask) -> f64) -> Result<Self> {
        check_variable_count(n)?;
        Self::new(n, SubsetMask::all(n).map(&mut f).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: SubsetMask) -> f64 {
        self.values[s.index()]
    }

    pub fn set(&mut self, s: SubsetMask, value: f64) {
        self.values[s.index()] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubsetMask, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &v)| (SubsetMask(k as u32), v))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        LatticeVector {
            n: self.n,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &LatticeVector) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Shape(format!(
                "lattice vectors over {} and {} variables",
                self.n, other.n
            )));
        }
        Ok(LatticeVector {
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

impl std::ops::Index<SubsetMask> for LatticeVector {
    type Output = f64;

    fn index(&self, s: SubsetMask) -> &f64 {
        &self.values[s.index()]
    }
}

fn variable_count_for_len(len: usize) -> Result<usize> {
    if !len.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "lattice length {len} is not a power of two"
        )));
    }
    let n = len.trailing_zeros() as usize;
    check_variable_count(n)?;
    Ok(n)
}

/// Applies `op(low, high)` to every pair of entries that differ in exactly one
/// bit, one bit position at a time. This is the butterfly shared by all four
/// subset-sum transforms.
fn butterfly(xs: &mut [f64], op: impl Fn(&mut f64, &mut f64)) {
    let len = xs.len();
    let mut half = 1;
    while half < len {
        for block in xs.chunks_exact_mut(2 * half) {
            let (low, high) = block.split_at_mut(half);
            for (l, h) in low.iter_mut().zip(high) {
                op(l, h);
            }
        }
        half <<= 1;
    }
}

/// In place: `xs[T] <- sum_{S ⊆ T} xs[S]`.
pub fn subset_sums(xs: &mut [f64]) -> Result<()> {
    variable_count_for_len(xs.len())?;
    butterfly(xs, |l, h| *h += *l);
    Ok(())
}

/// In place: `xs[S] <- sum_{T ⊆ S} (-1)^{|S|-|T|} xs[T]`, the inverse of
/// [`subset_sums`].
pub fn mobius_in_place(xs: &mut [f64]) -> Result<()> {
    variable_count_for_len(xs.len())?;
    butterfly(xs, |l, h| *h -= *l);
    Ok(())
}

/// In place: `xs[T] <- sum_{S ⊇ T} (-1)^{|S|-|T|} xs[S]`. This is the
/// transpose of [`mobius_in_place`], used to back-propagate through it.
pub fn superset_mobius_in_place(xs: &mut [f64]) -> Result<()> {
    variable_count_for_len(xs.len())?;
    butterfly(xs, |l, h| *l -= *h);
    Ok(())
}

/// AND interactions from an AND component:
/// `I_S = sum_{T ⊆ S} (-1)^{|S|-|T|} u_T`.
pub fn mobius_and(u: &LatticeVector) -> LatticeVector {
    let mut values = u.values.clone();
    butterfly(&mut values, |l, h| *h -= *l);
    LatticeVector { n: u.n, values }
}

/// OR interactions from an OR component:
/// `I_S = -sum_{T ⊆ S} (-1)^{|S|-|T|} u_{N \ T}` for `S ≠ ∅`, and `I_∅ = 0`
/// because the empty-sample output belongs to the AND side.
pub fn mobius_or(u: &LatticeVector) -> LatticeVector {
    // Complement indexing reverses a mask-ordered array.
    let mut values: Vec<f64> = u.values.iter().rev().map(|v| -v).collect();
    butterfly(&mut values, |l, h| *h -= *l);
    values[0] = 0.0;
    LatticeVector { n: u.n, values }
}

/// Inverse of [`mobius_and`]: `u_T = sum_{S ⊆ T} I_S`.
pub fn zeta_and(i_and: &LatticeVector) -> LatticeVector {
    let mut values = i_and.values.clone();
    butterfly(&mut values, |l, h| *h += *l);
    LatticeVector { n: i_and.n, values }
}

/// OR component generated by OR interactions:
/// `u_T = sum_{S ∩ T ≠ ∅} I_S`, so `u_∅ = 0`.
pub fn zeta_or(i_or: &LatticeVector) -> LatticeVector {
    let mut within = i_or.values.clone();
    within[0] = 0.0;
    let total: f64 = within.iter().sum();
    butterfly(&mut within, |l, h| *h += *l);
    // Subsets that miss T are exactly the subsets of N \ T.
    let values = within.iter().rev().map(|w| total - w).collect();
    LatticeVector { n: i_or.n, values }
}

fn check_same_n(a: &LatticeVector, b: &LatticeVector) -> Result<()> {
    if a.n != b.n {
        return Err(Error::Shape(format!(
            "AND vector has {} variables, OR vector has {}",
            a.n, b.n
        )));
    }
    Ok(())
}

/// Logical-model output on the masked sample keeping `t`:
/// `b + sum_{∅≠S⊆T} I^AND_S + sum_{S∩T≠∅} I^OR_S`, by direct trigger
/// evaluation.
pub fn reconstruct(
    bias: f64,
    i_and: &LatticeVector,
    i_or: &LatticeVector,
    t: SubsetMask,
) -> Result<f64> {
    check_same_n(i_and, i_or)?;
    let mut out = bias;
    for (s, effect) in i_and.iter().skip(1) {
        if s.is_subset_of(t) {
            out += effect;
        }
    }
    for (s, effect) in i_or.iter().skip(1) {
        if s.intersects(t) {
            out += effect;
        }
    }
    Ok(out)
}

/// [`reconstruct`] on every mask at once, in `O(n 2^n)`.
pub fn reconstruct_all(
    bias: f64,
    i_and: &LatticeVector,
    i_or: &LatticeVector,
) -> Result<LatticeVector> {
    check_same_n(i_and, i_or)?;
    let mut and_part = i_and.clone();
    and_part.values[0] = 0.0;
    let and_part = zeta_and(&and_part);
    let or_part = zeta_or(i_or);
    let values = and_part
        .values
        .iter()
        .zip(&or_part.values)
        .map(|(a, o)| bias + a + o)
        .collect();
    Ok(LatticeVector { n: i_and.n, values })
}

/// Dense trigger matrix: row `T` (masked sample), column `S` (interaction),
/// entry 1 when interaction `S` of the given kind fires on `x_T`.
pub fn trigger_matrix(n: usize, kind: InteractionKind) -> Result<DMatrix<f64>> {
    if n > MAX_DENSE_VARIABLES {
        return Err(Error::Resource(format!(
            "dense trigger matrix for {n} variables exceeds the limit of {MAX_DENSE_VARIABLES}"
        )));
    }
    let size = 1usize << n;
    Ok(DMatrix::from_fn(size, size, |t, s| {
        let hit = kind.triggers(SubsetMask(s as u32), SubsetMask(t as u32));
        if hit {
            1.0
        } else {
            0.0
        }
    }))
}
