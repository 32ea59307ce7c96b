//! Minibatch SGD on the logistic loss, with checkpoints and label noise.

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zoo::data::SyntheticDataset;
use crate::zoo::net::{logistic_loss, TinyNet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of training labels reset to a uniformly random class.
    pub label_noise_ratio: f64,
    pub seed: u64,
    /// Epochs after which a checkpoint is kept; epoch 0 is the initialization.
    pub checkpoint_epochs: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            learning_rate: 0.05,
            label_noise_ratio: 0.0,
            seed: 0,
            checkpoint_epochs: vec![0, 100],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub net: TinyNet,
    /// Mean logistic loss on the (possibly noisy) training labels.
    pub train_loss: f64,
    pub test_loss: f64,
}

impl Checkpoint {
    pub fn loss_gap(&self) -> f64 {
        self.test_loss - self.train_loss
    }
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub checkpoints: Vec<Checkpoint>,
    /// Training labels actually used, after noise injection.
    pub train_labels: Vec<u8>,
    /// Indices (into the dataset) whose labels were reset.
    pub noisy_indices: Vec<usize>,
}

/// Resets `round(ratio · |train|)` distinct training labels to a fair coin.
pub fn inject_label_noise(data: &SyntheticDataset, ratio: f64, seed: u64) -> Result<(Vec<u8>, Vec<usize>)> {
    if !(0.0..=0.5).contains(&ratio) {
        return Err(Error::Config(format!("label_noise_ratio must lie in [0, 0.5], got {ratio}")));
    }
    let mut labels = data.labels.clone();
    let count = (ratio * data.train.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = data.train.iter().copied().choose_multiple(&mut rng, count);
    chosen.sort_unstable();
    for &i in &chosen {
        labels[i] = u8::from(rng.random::<bool>());
    }
    Ok((labels, chosen))
}

pub fn mean_loss(net: &TinyNet, data: &SyntheticDataset, idx: &[usize], labels: &[u8]) -> f64 {
    let total: f64 = idx
        .iter()
        .map(|&i| logistic_loss(net.forward(&data.features[i]), f64::from(labels[i])))
        .sum();
    total / idx.len().max(1) as f64
}

/// Trains `net` in place of a copy. The feature baseline is set to the
/// training-feature mean before the first checkpoint.
pub fn train(net: &TinyNet, data: &SyntheticDataset, cfg: &TrainConfig) -> Result<TrainRun> {
    if data.train.is_empty() {
        return Err(Error::InvalidInput("empty training split".into()));
    }
    if data.n_features() != net.n_features() {
        return Err(Error::Shape(format!(
            "network takes {} features, dataset has {}",
            net.n_features(),
            data.n_features()
        )));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Config("batch_size and learning_rate must be positive".into()));
    }
    let (labels, noisy_indices) = inject_label_noise(data, cfg.label_noise_ratio, cfg.seed)?;
    let mut net = net.clone();
    net.feature_baseline = data.train_mean();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order = data.train.clone();
    let mut checkpoints = Vec::new();
    let keep = |epoch: usize| cfg.checkpoint_epochs.contains(&epoch);
    let snapshot = |net: &TinyNet, epoch: usize| -> Result<Checkpoint> {
        let train_loss = mean_loss(net, data, &data.train, &labels);
        let test_loss = mean_loss(net, data, &data.test, &data.labels);
        if !(train_loss.is_finite() && test_loss.is_finite()) {
            return Err(Error::Training { epoch, loss: train_loss });
        }
        Ok(Checkpoint {
            epoch,
            net: net.clone(),
            train_loss,
            test_loss,
        })
    };
    if keep(0) {
        checkpoints.push(snapshot(&net, 0)?);
    }
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| data.features[i].as_slice()).collect();
            let ys: Vec<f64> = batch.iter().map(|&i| f64::from(labels[i])).collect();
            let (loss, grads) = net.logistic_loss_grad(&xs, &ys);
            if !loss.is_finite() {
                return Err(Error::Training { epoch, loss });
            }
            net.sgd_step(&grads, cfg.learning_rate);
        }
        if keep(epoch) {
            checkpoints.push(snapshot(&net, epoch)?);
        }
    }
    Ok(TrainRun {
        checkpoints,
        train_labels: labels,
        noisy_indices,
    })
}
