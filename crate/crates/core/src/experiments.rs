//! Desk-scale experiments on trained TinyNets: parameter and input noise,
//! the two training stages, and train/test similarity per order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{compute_z, delta_distribution, delta_stage, mean_distribution, normalize, order_distribution, OrderDistribution};
use crate::error::{Error, Result};
use crate::extract::{extract, ExtractConfig};
use crate::generalization::{orderwise_jaccard, overall_jaccard, OrderSimilarity};
use crate::interaction::InteractionSet;
use crate::parametric::{fit_curves, fit_spindle, DecayOperator, DisentangleResult, FitGrid, SpindleFit};
use crate::stats::spearman;
use crate::table::ValueTable;
use crate::zoo::data::{DatasetConfig, SyntheticDataset};
use crate::zoo::net::{fgsm_perturb, gaussian_perturb, masked_table, TinyNet};
use crate::zoo::train::{train, Checkpoint, TrainConfig};

/// Network and training setup shared by the experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSetup {
    pub dataset: DatasetConfig,
    /// Hidden layer widths; input and output widths follow from the data.
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for NetSetup {
    fn default() -> Self {
        NetSetup {
            dataset: DatasetConfig {
                features_per_variable: 1,
                hidden_interactions: 6,
                hidden_max_order: 2,
                ..DatasetConfig::default()
            },
            hidden: vec![32, 32, 32],
            train: TrainConfig {
                epochs: 640,
                batch_size: 16,
                learning_rate: 0.01,
                label_noise_ratio: 0.05,
                seed: 0,
                checkpoint_epochs: vec![0, 5, 10, 20, 40, 80, 160, 320, 640],
            },
        }
    }
}

impl NetSetup {
    /// Same setup with every seed derived from `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.dataset.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.dataset.n_variables * self.dataset.features_per_variable];
        sizes.extend(&self.hidden);
        sizes.push(1);
        sizes
    }

    /// Generates the data and trains, keeping the configured checkpoints.
    pub fn run(&self) -> Result<(SyntheticDataset, Vec<Checkpoint>)> {
        let data = SyntheticDataset::generate(&self.dataset)?;
        let net = TinyNet::new(&self.layer_sizes(), self.train.seed)?;
        let run = train(&net, &data, &self.train)?;
        Ok((data, run.checkpoints))
    }
}

/// Extracts every table independently, in parallel.
pub fn extract_all(tables: &[ValueTable], cfg: &ExtractConfig) -> Result<Vec<InteractionSet>> {
    tables
        .par_iter()
        .map(|t| extract(t, cfg).map(|ex| ex.interactions))
        .collect()
}

pub fn tables_for(net: &TinyNet, inputs: &[&[f64]], groups: &[Vec<usize>]) -> Result<Vec<ValueTable>> {
    inputs.iter().map(|x| masked_table(net, x, groups)).collect()
}

/// Mean order distribution of a population.
pub fn mean_order_distribution(isets: &[InteractionSet], salient_only: bool) -> Result<OrderDistribution> {
    let ds: Vec<_> = isets.iter().map(|s| order_distribution(s, salient_only)).collect();
    mean_distribution(&ds)
}

/// Unit-scale decay curves of several populations, one operator per `δ`.
pub fn decay_curves(populations: &[&[InteractionSet]], deltas: &[f64]) -> Result<Vec<Vec<(f64, OrderDistribution)>>> {
    let n = populations
        .iter()
        .flat_map(|p| p.first())
        .map(InteractionSet::n)
        .next()
        .ok_or_else(|| Error::InvalidInput("no interaction sets".into()))?;
    let per_delta = deltas
        .par_iter()
        .map(|&delta| {
            let op = DecayOperator::new(delta, n)?;
            populations
                .iter()
                .map(|pop| {
                    let ds = pop
                        .iter()
                        .map(|s| Ok(order_distribution(&op.predict(s)?, false)))
                        .collect::<Result<Vec<_>>>()?;
                    mean_distribution(&ds)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..populations.len())
        .map(|p| deltas.iter().zip(&per_delta).map(|(&d, curves)| (d, curves[p].clone())).collect())
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    /// Gaussian noise on every network parameter.
    Gaussian,
    /// Signed-gradient step on the input.
    Fgsm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub mode: PerturbMode,
    pub sigmas: Vec<f64>,
    /// Seed of the parameter noise; shared by every `σ`.
    pub seed: u64,
    pub extract: ExtractConfig,
    /// Alphas searched by the spindle fit of each `ΔA`.
    pub alphas: Vec<f64>,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            mode: PerturbMode::Gaussian,
            sigmas: vec![0.02, 0.05, 0.1],
            seed: 0,
            extract: ExtractConfig::default(),
            alphas: FitGrid::default().alphas,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbRow {
    pub sigma: f64,
    /// Mean over samples of the distribution of `I − I_noise`.
    pub delta: OrderDistribution,
    pub mass: f64,
    pub spindle: SpindleFit,
    pub relative_residual: f64,
}

/// Distribution of interactions that change under noise of each size.
/// Rows come out sorted by `σ`.
pub fn perturbation_sweep(
    net: &TinyNet,
    inputs: &[&[f64]],
    groups: &[Vec<usize>],
    cfg: &PerturbConfig,
) -> Result<Vec<PerturbRow>> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput("no samples to perturb".into()));
    }
    let mut sigmas = cfg.sigmas.clone();
    if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::Config("sigmas must be finite and >= 0".into()));
    }
    sigmas.sort_by(f64::total_cmp);
    let reference = extract_all(&tables_for(net, inputs, groups)?, &cfg.extract)?;
    let mut rows = Vec::with_capacity(sigmas.len());
    for sigma in sigmas {
        let tables = match cfg.mode {
            PerturbMode::Gaussian => tables_for(&gaussian_perturb(net, sigma, cfg.seed)?, inputs, groups)?,
            PerturbMode::Fgsm => {
                let moved = inputs
                    .iter()
                    .map(|x| fgsm_perturb(net, x, sigma))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&[f64]> = moved.iter().map(Vec::as_slice).collect();
                tables_for(net, &refs, groups)?
            }
        };
        let noisy = extract_all(&tables, &cfg.extract)?;
        let deltas = reference
            .iter()
            .zip(&noisy)
            .map(|(a, b)| delta_distribution(a, b))
            .collect::<Result<Vec<_>>>()?;
        let delta = mean_distribution(&deltas)?;
        let spindle = fit_spindle(&delta, &cfg.alphas)?;
        rows.push(PerturbRow {
            sigma,
            mass: delta.mass(),
            relative_residual: spindle.relative_residual(&delta),
            delta,
            spindle,
        });
    }
    Ok(rows)
}

/// Perturbation sweep on a freshly trained network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrendConfig {
    pub setup: NetSetup,
    /// Test samples whose tables are perturbed.
    pub samples: usize,
    pub perturb: PerturbConfig,
}

impl Default for NoiseTrendConfig {
    fn default() -> Self {
        let mut setup = NetSetup::default();
        setup.train.epochs = 160;
        setup.train.checkpoint_epochs = vec![160];
        NoiseTrendConfig {
            setup,
            samples: 6,
            perturb: PerturbConfig::default(),
        }
    }
}

impl NoiseTrendConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.setup = self.setup.with_seed(seed);
        self.perturb.seed = seed;
        self
    }
}

/// Trains the configured network and sweeps `σ` on its final weights.
pub fn noise_trend(cfg: &NoiseTrendConfig) -> Result<Vec<PerturbRow>> {
    let (data, checkpoints) = cfg.setup.run()?;
    let net = &checkpoints.last().ok_or_else(|| Error::Config("no checkpoints kept".into()))?.net;
    let inputs: Vec<&[f64]> = data.test.iter().take(cfg.samples).map(|&i| data.features[i].as_slice()).collect();
    perturbation_sweep(net, &inputs, &data.groups, &cfg.perturb)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    pub setup: NetSetup,
    /// Training samples whose tables are tracked.
    pub samples: usize,
    pub extract: ExtractConfig,
    pub grid: FitGrid,
    /// Largest test-minus-train loss still counted as the first stage.
    pub gap_threshold: f64,
    pub salient_only: bool,
}

impl Default for TwoStageConfig {
    fn default() -> Self {
        TwoStageConfig {
            setup: NetSetup::default(),
            samples: 5,
            extract: ExtractConfig::default(),
            grid: FitGrid::default(),
            gap_threshold: 0.05,
            salient_only: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub loss_gap: f64,
    /// Mean distribution, normalized by the checkpoint's own `Z` when that
    /// is defined.
    pub distribution: OrderDistribution,
    pub fit: DisentangleResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageReport {
    pub rows: Vec<StageRow>,
    /// Row with the lowest test loss, taken as the end of the first stage.
    pub stage1_end: usize,
    /// Last row up to `stage1_end` (after initialization) whose loss gap is
    /// below the threshold.
    pub early: Option<usize>,
    /// `|A_last − A_stage1_end|`.
    pub overfit_delta: OrderDistribution,
}

impl TwoStageReport {
    pub fn overfit_argmax(&self) -> Option<usize> {
        self.overfit_delta.argmax_order()
    }

    pub fn early_decay_fraction(&self) -> Option<f64> {
        self.early.map(|i| self.rows[i].fit.decay_fraction())
    }
}

/// Trains, extracts at each checkpoint and fits spindle plus decay, with each
/// checkpoint's own interactions feeding its decay component.
pub fn two_stage(cfg: &TwoStageConfig) -> Result<TwoStageReport> {
    let (data, checkpoints) = cfg.setup.run()?;
    two_stage_on(cfg, &data, &checkpoints)
}

/// As [`two_stage`], on an already trained run.
pub fn two_stage_on(cfg: &TwoStageConfig, data: &SyntheticDataset, checkpoints: &[Checkpoint]) -> Result<TwoStageReport> {
    if checkpoints.is_empty() {
        return Err(Error::Config("no checkpoints requested".into()));
    }
    let inputs: Vec<&[f64]> = data.train.iter().take(cfg.samples).map(|&i| data.features[i].as_slice()).collect();
    if inputs.is_empty() {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let sets = checkpoints
        .iter()
        .map(|c| extract_all(&tables_for(&c.net, &inputs, &data.groups)?, &cfg.extract))
        .collect::<Result<Vec<_>>>()?;
    let pops: Vec<&[InteractionSet]> = sets.iter().map(Vec::as_slice).collect();
    let curves = decay_curves(&pops, &cfg.grid.deltas)?;
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut raw = Vec::with_capacity(checkpoints.len());
    for ((c, s), curve) in checkpoints.iter().zip(&sets).zip(&curves) {
        let a = mean_order_distribution(s, cfg.salient_only)?;
        let fit = fit_curves(&a, curve, &cfg.grid)?;
        let distribution = match compute_z(s) {
            Ok(z) => normalize(&a, z)?,
            Err(_) => a.clone(),
        };
        raw.push(a);
        rows.push(StageRow {
            epoch: c.epoch,
            train_loss: c.train_loss,
            test_loss: c.test_loss,
            loss_gap: c.loss_gap(),
            distribution,
            fit,
        });
    }
    let stage1_end = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.test_loss.total_cmp(&b.1.test_loss))
        .map(|(i, _)| i)
        .unwrap();
    let early = (0..=stage1_end)
        .rev()
        .find(|&i| rows[i].epoch > 0 && rows[i].loss_gap < cfg.gap_threshold);
    let overfit_delta = delta_stage(raw.last().unwrap(), &raw[stage1_end])?;
    Ok(TwoStageReport {
        rows,
        stage1_end,
        early,
        overfit_delta,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JaccardConfig {
    pub setup: NetSetup,
    pub train_samples: usize,
    pub test_samples: usize,
    pub extract: ExtractConfig,
}

impl Default for JaccardConfig {
    fn default() -> Self {
        let mut setup = NetSetup::default();
        setup.train.epochs = 80;
        setup.train.checkpoint_epochs = vec![80];
        JaccardConfig {
            setup,
            train_samples: 30,
            test_samples: 30,
            extract: ExtractConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JaccardReport {
    pub orders: Vec<OrderSimilarity>,
    pub overall: OrderSimilarity,
    /// Rank correlation between order and similarity over populated orders.
    pub spearman: Option<f64>,
}

pub fn jaccard_report(train: &[InteractionSet], test: &[InteractionSet]) -> Result<JaccardReport> {
    let orders = orderwise_jaccard(train, test)?;
    let overall = overall_jaccard(train, test)?;
    let (ms, sims): (Vec<f64>, Vec<f64>) = orders
        .iter()
        .filter_map(|r| Some((r.m? as f64, r.sim?)))
        .unzip();
    Ok(JaccardReport {
        spearman: spearman(&ms, &sims),
        orders,
        overall,
    })
}

/// Trains a net and compares interactions on training and test samples.
pub fn jaccard_experiment(cfg: &JaccardConfig) -> Result<JaccardReport> {
    let (data, checkpoints) = cfg.setup.run()?;
    let net = &checkpoints
        .last()
        .ok_or_else(|| Error::Config("no checkpoints requested".into()))?
        .net;
    let pick = |idx: &[usize], k: usize| -> Vec<&[f64]> { idx.iter().take(k).map(|&i| data.features[i].as_slice()).collect() };
    let train_sets = extract_all(&tables_for(net, &pick(&data.train, cfg.train_samples), &data.groups)?, &cfg.extract)?;
    let test_sets = extract_all(&tables_for(net, &pick(&data.test, cfg.test_samples), &data.groups)?, &cfg.extract)?;
    jaccard_report(&train_sets, &test_sets)
}
