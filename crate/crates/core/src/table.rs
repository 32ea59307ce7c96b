//! The `2^n` masked-output table of one sample, its JSON file format, and the
//! sparsity diagnostics that can be read off the table alone.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_variable_count, LatticeVector, SubsetMask};

/// Version tag written into every value-table file.
pub const FORMAT_VERSION: u32 = 1;

/// Model outputs `v(x_T)` for every masked variant `x_T` of one sample.
///
/// `values[0]` is the output with every variable masked, which is also the
/// bias of the logical model.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub sample_id: String,
    pub variable_labels: Vec<String>,
    pub baseline_note: String,
    values: LatticeVector,
}

#[derive(Serialize, Deserialize)]
struct ValueTableFile {
    format_version: u32,
    n: usize,
    sample_id: String,
    variable_labels: Vec<String>,
    baseline_note: String,
    values: Vec<serde_json::Value>,
}

impl ValueTable {
    pub fn new(values: LatticeVector) -> Self {
        let n = values.n();
        ValueTable {
            sample_id: String::new(),
            variable_labels: (0..n).map(|i| format!("x{i}")).collect(),
            baseline_note: String::new(),
            values,
        }
    }

    pub fn with_sample_id(mut self, id: impl Into<String>) -> Self {
        self.sample_id = id.into();
        self
    }

    pub fn with_baseline_note(mut self, note: impl Into<String>) -> Self {
        self.baseline_note = note.into();
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Shape(format!(
                "{} labels for {} variables",
                labels.len(),
                self.n()
            )));
        }
        self.variable_labels = labels;
        Ok(self)
    }

    /// Fills the table by calling `eval` once per mask, sequentially.
    pub fn from_evaluator(n: usize, mut eval: impl FnMut(SubsetMask) -> f64) -> Result<Self> {
        check_variable_count(n)?;
        let mut values = Vec::with_capacity(1 << n);
        for t in SubsetMask::all(n) {
            let v = eval(t);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    mask: t.index(),
                    context: "evaluator output".into(),
                });
            }
            values.push(v);
        }
        Ok(Self::new(LatticeVector::new(n, values)?))
    }

    /// Like [`ValueTable::from_evaluator`], for a reentrant callback that may
    /// be invoked from several threads at once.
    pub fn from_evaluator_par(n: usize, eval: impl Fn(SubsetMask) -> f64 + Sync) -> Result<Self> {
        check_variable_count(n)?;
        let values: Vec<f64> = (0..1u32 << n)
            .into_par_iter()
            .map(|bits| eval(SubsetMask::from_bits(bits)))
            .collect();
        if let Some(mask) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                mask,
                context: "evaluator output".into(),
            });
        }
        Ok(Self::new(LatticeVector::new(n, values)?))
    }

    pub fn n(&self) -> usize {
        self.values.n()
    }

    pub fn values(&self) -> &LatticeVector {
        &self.values
    }

    pub fn get(&self, t: SubsetMask) -> f64 {
        self.values.get(t)
    }

    /// `v(x_∅)`.
    pub fn bias(&self) -> f64 {
        self.values.get(SubsetMask::EMPTY)
    }

    /// `|v(x_N) - v(x_∅)|`, the single-sample stand-in for
    /// `E_x |v(x) - v(x_∅)|`.
    pub fn output_scale(&self) -> f64 {
        (self.values.get(SubsetMask::full(self.n())) - self.bias()).abs()
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = LatticeVector::new(self.n(), self.values.as_slice().iter().map(|&v| f(v)).collect())?;
        Ok(ValueTable {
            values,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> String {
        let file = ValueTableFile {
            format_version: FORMAT_VERSION,
            n: self.n(),
            sample_id: self.sample_id.clone(),
            variable_labels: self.variable_labels.clone(),
            baseline_note: self.baseline_note.clone(),
            values: self
                .values
                .as_slice()
                .iter()
                .map(|&v| serde_json::Value::from(v))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("value table serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let file: ValueTableFile =
            serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::parse(
                origin,
                format!("unsupported format_version {}", file.format_version),
            ));
        }
        check_variable_count(file.n).map_err(|e| Error::parse(origin, e.to_string()))?;
        let expected = 1usize << file.n;
        if file.values.len() != expected {
            return Err(Error::parse(
                origin,
                format!(
                    "values has length {} but n = {} requires {expected}",
                    file.values.len(),
                    file.n
                ),
            ));
        }
        if file.variable_labels.len() != file.n {
            return Err(Error::parse(
                origin,
                format!(
                    "variable_labels has {} entries for n = {}",
                    file.variable_labels.len(),
                    file.n
                ),
            ));
        }
        let mut values = Vec::with_capacity(expected);
        for (mask, raw) in file.values.iter().enumerate() {
            match raw.as_f64() {
                Some(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::parse(
                        origin,
                        format!("value at mask {mask} is not a finite number: {raw}"),
                    ))
                }
            }
        }
        Ok(ValueTable {
            sample_id: file.sample_id,
            variable_labels: file.variable_labels,
            baseline_note: file.baseline_note,
            values: LatticeVector::new(file.n, values)?,
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

/// `log(p / (1 - p))`, the scalar confidence of the ground-truth class.
pub fn log_odds(p_truth: f64) -> Result<f64> {
    if !(p_truth > 0.0 && p_truth < 1.0) {
        return Err(Error::Domain(format!(
            "probability {p_truth} is outside the open interval (0, 1)"
        )));
    }
    Ok(p_truth.ln() - (-p_truth).ln_1p())
}

/// Diagnostics for the monotonicity and polynomial-lower-bound conditions
/// under which sparse interactions are expected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    /// `ū^(k)` for `k = 0..=n`: mean of `v(x_T) - v(x_∅)` over `|T| = k`.
    pub mean_output_by_order: Vec<f64>,
    pub condition2_ok: bool,
    pub condition3_ok: bool,
    /// Smallest exponent in the grid for which the lower bound holds.
    pub fitted_p: Option<f64>,
    /// Largest violation of either condition (0 when both hold).
    pub max_violation: f64,
}

const SPARSITY_TOL: f64 = 1e-9;

pub fn mean_output_by_order(t: &ValueTable) -> Vec<f64> {
    let n = t.n();
    let bias = t.bias();
    let mut sums = vec![0.0; n + 1];
    let mut counts = vec![0usize; n + 1];
    for (s, v) in t.values.iter() {
        sums[s.order()] += v - bias;
        counts[s.order()] += 1;
    }
    sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect()
}

/// Worst gap `(k'/k)^p ū^(k) - ū^(k')` over `k' <= k` with `ū^(k) > 0`.
fn lower_bound_gap(u: &[f64], p: f64) -> f64 {
    let mut worst = 0.0f64;
    for k in 1..u.len() {
        if u[k] <= 0.0 {
            continue;
        }
        for kp in 0..=k {
            let bound = (kp as f64 / k as f64).powf(p) * u[k];
            worst = worst.max(bound - u[kp]);
        }
    }
    worst
}

pub fn check_sparsity_conditions(t: &ValueTable, p_grid: &[f64]) -> SparsityReport {
    let u = mean_output_by_order(t);
    let monotone_gap = u
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(0.0f64, f64::max);
    let condition2_ok = monotone_gap <= SPARSITY_TOL;

    let mut fitted_p: Option<f64> = None;
    let mut least_gap = f64::INFINITY;
    for &p in p_grid.iter().filter(|p| **p > 0.0) {
        let gap = lower_bound_gap(&u, p);
        if gap <= SPARSITY_TOL && fitted_p.is_none_or(|q| p < q) {
            fitted_p = Some(p);
        }
        least_gap = least_gap.min(gap);
    }
    let cond3_gap = match fitted_p {
        Some(p) => lower_bound_gap(&u, p),
        None if least_gap.is_finite() => least_gap,
        None => 0.0,
    };
    SparsityReport {
        mean_output_by_order: u,
        condition2_ok,
        condition3_ok: fitted_p.is_some(),
        fitted_p,
        max_violation: monotone_gap.max(cond3_gap).max(0.0),
    }
}
