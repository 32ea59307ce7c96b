//! Sparsest AND-OR decomposition of a value table.
//!
//! The table is split as `u^AND_T = ½(v_T − δ_T) + γ_T` and
//! `u^OR_T = ½(v_T − δ_T) − γ_T`; the split parameters `γ` and the bounded
//! noise terms `δ` are learned by minimizing `Σ_{S≠∅} |I^AND_S| + |I^OR_S|`.
//! Whatever `γ` is, the resulting logical model reproduces `v − δ` on every
//! masked sample, so the optimizer only ever trades sparsity.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::InteractionSet;
use crate::lattice::{mobius_and, mobius_or, reconstruct_all, superset_mobius_in_place, LatticeVector, SubsetMask};
use crate::table::ValueTable;

/// Largest variable count the optimizer accepts.
pub const MAX_EXTRACT_VARIABLES: usize = 14;

/// Update rule applied to the subgradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// Plain full-batch gradient descent.
    Sgd,
    /// Per-coordinate adaptive steps (Adam moments).
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    /// Initial step, as a fraction of the table's mean absolute deviation
    /// `mean_T |v(x_T) − v(x_∅)|`. Expressing it relative to the table keeps
    /// extraction equivariant under rescaling of the outputs.
    pub learning_rate: f64,
    pub iterations: usize,
    /// The step decays geometrically to `learning_rate * final_lr_ratio` at
    /// the last iteration; `1.0` keeps it fixed.
    pub final_lr_ratio: f64,
    pub step_rule: StepRule,
    /// `ζ = zeta_coeff · E|v(x) − v(x_∅)|`.
    pub zeta_coeff: f64,
    /// `τ = tau_coeff · E|v(x) − v(x_∅)|`.
    pub tau_coeff: f64,
    pub enable_noise: bool,
    /// Replaces `|x|` with `sqrt(x² + ε²)` when set.
    pub smooth_eps: Option<f64>,
    /// Population estimate of `E|v(x) − v(x_∅)|`; the per-sample
    /// `|v(x_N) − v(x_∅)|` is used when absent.
    pub population_scale: Option<f64>,
    /// Trace sampling interval in iterations.
    pub log_every: usize,
    pub seed: u64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            learning_rate: 0.2,
            iterations: 20_000,
            final_lr_ratio: 1e-5,
            step_rule: StepRule::Adam,
            zeta_coeff: 0.02,
            tau_coeff: 0.02,
            enable_noise: true,
            smooth_eps: None,
            population_scale: None,
            log_every: 10,
            seed: 0,
        }
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.final_lr_ratio > 0.0 && self.final_lr_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "final_lr_ratio must lie in (0, 1], got {}",
                self.final_lr_ratio
            )));
        }
        if !(self.zeta_coeff >= 0.0) || !(self.tau_coeff >= 0.0) {
            return Err(Error::Config("zeta_coeff and tau_coeff must be >= 0".into()));
        }
        if let Some(eps) = self.smooth_eps {
            if !(eps > 0.0) {
                return Err(Error::Config(format!("smooth_eps must be positive, got {eps}")));
            }
        }
        if let Some(scale) = self.population_scale {
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(Error::Config(format!("population_scale must be >= 0, got {scale}")));
            }
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Learned split parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitParams {
    /// `γ_T`, the AND/OR allocation of each output.
    pub gamma: LatticeVector,
    /// `δ_T`, bounded by `zeta`. `δ_∅` stays 0 so the bias is exact.
    pub noise: LatticeVector,
    pub zeta: f64,
}

impl SplitParams {
    pub fn zeros(n: usize) -> Result<Self> {
        Ok(SplitParams {
            gamma: LatticeVector::zeros(n)?,
            noise: LatticeVector::zeros(n)?,
            zeta: 0.0,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub loss: f64,
    pub step: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceLog {
    pub entries: Vec<TraceEntry>,
    /// Loss of the symmetric ½/½ split the optimizer starts from.
    pub initial_loss: f64,
    pub best_loss: f64,
    pub best_iteration: usize,
}

impl TraceLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss,step\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{}", e.iteration, e.loss, e.step);
        }
        out
    }
}

/// Both halves of the decomposition for given parameters.
fn split_interactions(v: &[f64], gamma: &[f64], noise: &[f64], n: usize) -> (LatticeVector, LatticeVector) {
    let clean = v.iter().zip(noise).map(|(v, d)| 0.5 * (v - d));
    let (u_and, u_or): (Vec<f64>, Vec<f64>) = clean
        .zip(gamma)
        .map(|(half, g)| (half + g, half - g))
        .unzip();
    let u_and = LatticeVector::new(n, u_and).expect("finite split");
    let u_or = LatticeVector::new(n, u_or).expect("finite split");
    (mobius_and(&u_and), mobius_or(&u_or))
}

struct Penalty {
    smooth_eps: Option<f64>,
}

impl Penalty {
    fn value(&self, x: f64) -> f64 {
        match self.smooth_eps {
            Some(eps) => (x * x + eps * eps).sqrt(),
            None => x.abs(),
        }
    }

    fn slope(&self, x: f64) -> f64 {
        match self.smooth_eps {
            Some(eps) => x / (x * x + eps * eps).sqrt(),
            // Subgradient 0 at the kink.
            None if x > 0.0 => 1.0,
            None if x < 0.0 => -1.0,
            None => 0.0,
        }
    }

    fn total(&self, i_and: &[f64], i_or: &[f64]) -> f64 {
        i_and[1..].iter().chain(&i_or[1..]).map(|&x| self.value(x)).sum()
    }
}

/// Loss and gradients with respect to `γ` and `δ`.
fn loss_and_gradient(
    v: &[f64],
    gamma: &[f64],
    noise: &[f64],
    n: usize,
    penalty: &Penalty,
    grad_gamma: &mut [f64],
    grad_noise: &mut [f64],
) -> f64 {
    let (i_and, i_or) = split_interactions(v, gamma, noise, n);
    let (i_and, i_or) = (i_and.as_slice(), i_or.as_slice());
    let loss = penalty.total(i_and, i_or);

    // dL/du^AND = Aᵀ g_and with A the Möbius matrix.
    let mut d_and: Vec<f64> = i_and.iter().map(|&x| penalty.slope(x)).collect();
    d_and[0] = 0.0;
    superset_mobius_in_place(&mut d_and).expect("power of two");
    // I^OR = −A R u^OR with R the complement permutation, so
    // dL/du^OR = −R Aᵀ g_or.
    let mut d_or: Vec<f64> = i_or.iter().map(|&x| penalty.slope(x)).collect();
    d_or[0] = 0.0;
    superset_mobius_in_place(&mut d_or).expect("power of two");
    let len = v.len();
    for t in 0..len {
        let g_and = d_and[t];
        let g_or = -d_or[len - 1 - t];
        grad_gamma[t] = g_and - g_or;
        grad_noise[t] = -0.5 * (g_and + g_or);
    }
    loss
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-12;

    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Mean absolute deviation of the table from its empty-sample output; the
/// unit in which step sizes are expressed.
fn step_scale(t: &ValueTable) -> f64 {
    let b = t.bias();
    let vals = t.values().as_slice();
    let mad = vals.iter().map(|v| (v - b).abs()).sum::<f64>() / vals.len() as f64;
    if mad > 0.0 {
        mad
    } else {
        1.0
    }
}

/// Result of one extraction run.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub interactions: InteractionSet,
    pub split: SplitParams,
    pub trace: TraceLog,
}

/// Learns the sparsest AND-OR decomposition of `t`.
pub fn extract(t: &ValueTable, cfg: &ExtractConfig) -> Result<Extraction> {
    cfg.validate()?;
    let n = t.n();
    if n > MAX_EXTRACT_VARIABLES {
        return Err(Error::Resource(format!(
            "extraction supports at most {MAX_EXTRACT_VARIABLES} variables, table has {n}"
        )));
    }
    let v = t.values().as_slice();
    let len = v.len();
    let scale = cfg.population_scale.unwrap_or_else(|| t.output_scale());
    let zeta = if cfg.enable_noise { cfg.zeta_coeff * scale } else { 0.0 };
    let tau = cfg.tau_coeff * scale;
    let penalty = Penalty {
        smooth_eps: cfg.smooth_eps,
    };

    let lr0 = cfg.learning_rate * step_scale(t);
    let decay = if cfg.iterations > 1 {
        cfg.final_lr_ratio.powf(1.0 / (cfg.iterations - 1) as f64)
    } else {
        1.0
    };

    let mut gamma = vec![0.0; len];
    let mut noise = vec![0.0; len];
    let mut grad_gamma = vec![0.0; len];
    let mut grad_noise = vec![0.0; len];
    let mut adam_gamma = Adam::new(len);
    let mut adam_noise = Adam::new(len);

    let mut trace = TraceLog::default();
    let mut best = (f64::INFINITY, 0usize, gamma.clone(), noise.clone());
    let mut lr = lr0;

    for it in 0..=cfg.iterations {
        let loss = loss_and_gradient(v, &gamma, &noise, n, &penalty, &mut grad_gamma, &mut grad_noise);
        if !loss.is_finite() {
            return Err(Error::Optimization { iteration: it, loss });
        }
        if it == 0 {
            trace.initial_loss = loss;
        }
        if loss < best.0 {
            best.0 = loss;
            best.1 = it;
            best.2.copy_from_slice(&gamma);
            best.3.copy_from_slice(&noise);
        }
        if it % cfg.log_every == 0 || it == cfg.iterations {
            trace.entries.push(TraceEntry {
                iteration: it,
                loss,
                step: lr,
            });
        }
        if it == cfg.iterations {
            break;
        }

        match cfg.step_rule {
            StepRule::Sgd => {
                for (g, d) in gamma.iter_mut().zip(&grad_gamma) {
                    *g -= lr * d;
                }
            }
            StepRule::Adam => adam_gamma.step(&mut gamma, &grad_gamma, lr),
        }
        if cfg.enable_noise && zeta > 0.0 {
            match cfg.step_rule {
                StepRule::Sgd => {
                    for (x, d) in noise.iter_mut().zip(&grad_noise) {
                        *x -= lr * d;
                    }
                }
                StepRule::Adam => adam_noise.step(&mut noise, &grad_noise, lr),
            }
            for x in noise.iter_mut() {
                *x = x.clamp(-zeta, zeta);
            }
            noise[0] = 0.0;
        }
        lr *= decay;
    }
    trace.best_loss = best.0;
    trace.best_iteration = best.1;

    let (_, _, mut gamma, noise) = best;
    // A uniform shift of γ changes only the ∅ slots. Fix it so that
    // u^OR_∅ = 0: the empty-sample output then sits entirely in I^AND_∅.
    let shift = 0.5 * (v[0] - noise[0]) - gamma[0];
    for g in gamma.iter_mut() {
        *g += shift;
    }
    let (i_and, i_or) = split_interactions(v, &gamma, &noise, n);
    let interactions = InteractionSet::new(t.bias(), i_and, i_or, tau)?;
    Ok(Extraction {
        interactions,
        split: SplitParams {
            gamma: LatticeVector::new(n, gamma)?,
            noise: LatticeVector::new(n, noise)?,
            zeta,
        },
        trace,
    })
}

/// Interactions of the fixed split given by `sp`, without optimization.
pub fn interactions_for_split(t: &ValueTable, sp: &SplitParams, tau: f64) -> Result<InteractionSet> {
    if sp.gamma.n() != t.n() || sp.noise.n() != t.n() {
        return Err(Error::Shape("split parameters and table disagree on n".into()));
    }
    let (i_and, i_or) = split_interactions(t.values().as_slice(), sp.gamma.as_slice(), sp.noise.as_slice(), t.n());
    InteractionSet::new(t.bias(), i_and, i_or, tau)
}

/// `max_T |v(x_T) − δ_T − h(x_T)|`, the universal-matching residual.
pub fn matching_error(t: &ValueTable, iset: &InteractionSet, sp: &SplitParams) -> Result<f64> {
    if iset.n() != t.n() || sp.noise.n() != t.n() {
        return Err(Error::Shape(format!(
            "table has {} variables, interactions {}, split {}",
            t.n(),
            iset.n(),
            sp.noise.n()
        )));
    }
    let h = reconstruct_all(iset.bias, &iset.i_and, &iset.i_or)?;
    Ok(t.values()
        .iter()
        .map(|(s, v)| (v - sp.noise.get(s) - h.get(s)).abs())
        .fold(0.0, f64::max))
}

/// Values of the extraction objective at the symmetric split.
pub fn symmetric_split_loss(t: &ValueTable) -> Result<f64> {
    let sp = SplitParams::zeros(t.n())?;
    Ok(interactions_for_split(t, &sp, 0.0)?.l1_norm())
}

/// `Σ_{S ≠ ∅}` L1 norm of a set, restricted to `S` with `|S| = m`.
pub fn l1_by_order(iset: &InteractionSet) -> Vec<f64> {
    let mut out = vec![0.0; iset.n() + 1];
    for (s, x) in iset.i_and.iter().chain(iset.i_or.iter()) {
        if s != SubsetMask::EMPTY {
            out[s.order()] += x.abs();
        }
    }
    out
}
