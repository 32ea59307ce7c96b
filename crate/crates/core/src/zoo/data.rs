//! Synthetic binary classification data with a hidden interaction structure.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SubsetMask;
use crate::zoo::net::contiguous_groups;
use crate::zoo::synthetic::SyntheticModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_variables: usize,
    pub features_per_variable: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Interactions planted in the hidden labeling model.
    pub hidden_interactions: usize,
    /// Largest order among the hidden interactions.
    pub hidden_max_order: usize,
    /// Probability of flipping each generated label.
    pub flip_prob: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_variables: 10,
            features_per_variable: 3,
            n_train: 200,
            n_test: 200,
            hidden_interactions: 12,
            hidden_max_order: 3,
            flip_prob: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Feature indices of each variable.
    pub groups: Vec<Vec<usize>>,
}

impl SyntheticDataset {
    /// Features i.i.d. uniform in `[-1, 1]`. Variable `i` counts as present
    /// when its features average above zero; the label is whether a hidden
    /// random logical model is positive on the present set. The hidden bias
    /// is set so that half of all presence patterns are positive.
    pub fn generate(cfg: &DatasetConfig) -> Result<Self> {
        if cfg.n_variables == 0 || cfg.features_per_variable == 0 {
            return Err(Error::Config("need at least one variable and one feature each".into()));
        }
        if cfg.n_train == 0 || cfg.n_test == 0 {
            return Err(Error::Config("train and test splits must be nonempty".into()));
        }
        if !(0.0..=1.0).contains(&cfg.flip_prob) {
            return Err(Error::Config(format!("flip_prob must lie in [0, 1], got {}", cfg.flip_prob)));
        }
        let mut hidden = SyntheticModel::random_bounded(
            cfg.n_variables,
            cfg.hidden_interactions,
            (0.5, 3.0),
            cfg.hidden_max_order,
            cfg.seed,
        )?;
        hidden.bias = 0.0;
        let mut outputs: Vec<f64> = SubsetMask::all(cfg.n_variables).map(|t| hidden.eval(t)).collect();
        outputs.sort_by(f64::total_cmp);
        let mid = outputs.len() / 2;
        hidden.bias = -0.5 * (outputs[mid.saturating_sub(1)] + outputs[mid]);
        let groups = contiguous_groups(cfg.n_variables, cfg.features_per_variable);
        let width = cfg.n_variables * cfg.features_per_variable;
        let total = cfg.n_train + cfg.n_test;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        let mut features = Vec::with_capacity(total);
        let mut labels = Vec::with_capacity(total);
        for _ in 0..total {
            let x: Vec<f64> = (0..width).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let present = groups
                .iter()
                .enumerate()
                .filter(|(_, g)| g.iter().map(|&f| x[f]).sum::<f64>() > 0.0)
                .fold(SubsetMask::EMPTY, |t, (i, _)| SubsetMask::from_bits(t.bits() | 1 << i));
            let mut y = u8::from(hidden.eval(present) > 0.0);
            if rng.random::<f64>() < cfg.flip_prob {
                y = 1 - y;
            }
            features.push(x);
            labels.push(y);
        }
        let mut order: Vec<usize> = (0..total).collect();
        order.shuffle(&mut rng);
        let test = order.split_off(cfg.n_train);
        Ok(SyntheticDataset {
            features,
            labels,
            train: order,
            test,
            groups,
        })
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Per-feature mean over the training split.
    pub fn train_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n_features()];
        for &i in &self.train {
            for (m, x) in mean.iter_mut().zip(&self.features[i]) {
                *m += x;
            }
        }
        let k = self.train.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        mean
    }

    /// CSV with columns `f0..f{d-1},label,split`.
    pub fn to_csv(&self) -> String {
        let mut split = vec![""; self.features.len()];
        for &i in &self.train {
            split[i] = "train";
        }
        for &i in &self.test {
            split[i] = "test";
        }
        let mut out = String::new();
        for j in 0..self.n_features() {
            let _ = write!(out, "f{j},");
        }
        out.push_str("label,split\n");
        for (i, (x, y)) in self.features.iter().zip(&self.labels).enumerate() {
            for v in x {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{y},{}", split[i]);
        }
        out
    }

    /// Reads [`Self::to_csv`] output; variables are `features_per_variable`
    /// contiguous columns each.
    pub fn from_csv(text: &str, features_per_variable: usize, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| Error::parse(origin, "empty file"))?.split(',').collect();
        if header.len() < 3 || header[header.len() - 2] != "label" || header[header.len() - 1] != "split" {
            return Err(Error::parse(origin, "header must end with label,split"));
        }
        let width = header.len() - 2;
        if features_per_variable == 0 || width % features_per_variable != 0 {
            return Err(Error::parse(
                origin,
                format!("{width} features do not split into groups of {features_per_variable}"),
            ));
        }
        let mut data = SyntheticDataset {
            features: Vec::new(),
            labels: Vec::new(),
            train: Vec::new(),
            test: Vec::new(),
            groups: contiguous_groups(width / features_per_variable, features_per_variable),
        };
        for (row, line) in lines.enumerate() {
            let bad = |what: &str| Error::parse(origin, format!("row {}: {what}", row + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != width + 2 {
                return Err(bad("wrong number of fields"));
            }
            let x = fields[..width]
                .iter()
                .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad("bad feature value"))?;
            let y = match fields[width] {
                "0" => 0,
                "1" => 1,
                _ => return Err(bad("label must be 0 or 1")),
            };
            match fields[width + 1] {
                "train" => data.train.push(row),
                "test" => data.test.push(row),
                _ => return Err(bad("split must be train or test")),
            }
            data.features.push(x);
            data.labels.push(y);
        }
        if data.train.is_empty() || data.test.is_empty() {
            return Err(Error::parse(origin, "both splits must be nonempty"));
        }
        Ok(data)
    }
}
