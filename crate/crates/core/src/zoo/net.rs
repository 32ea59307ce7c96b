//! A small rectifier MLP with one logit output and hand-written backprop.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_variable_count, SubsetMask};
use crate::table::ValueTable;

/// Fully connected ReLU network `n_features → hidden… → 1`.
///
/// `weights[l]` is row-major with shape `layer_sizes[l+1] × layer_sizes[l]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TinyNet {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// Value a masked feature takes.
    pub feature_baseline: Vec<f64>,
    pub seed: u64,
}

/// Parameter gradients, shaped like the network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &TinyNet) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

impl TinyNet {
    /// He-uniform weights `U(±sqrt(6 / fan_in))`, zero biases, zero baseline.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::Config(
                "a network needs an input, at least one hidden layer and an output".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if *layer_sizes.last().unwrap() != 1 {
            return Err(Error::Config("the output layer must have exactly one unit".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            weights.push((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect());
            biases.push(vec![0.0; fan_out]);
        }
        Ok(TinyNet {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            feature_baseline: vec![0.0; layer_sizes[0]],
            seed,
        })
    }

    pub fn n_features(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "network takes {} features, got {}",
                self.n_features(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Activations of every layer, input first; the last entry is `[logit]`.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let input = &acts[l];
            let fan_in = input.len();
            let out: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(j, bj)| {
                    let z = bj + w[j * fan_in..(j + 1) * fan_in].iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.max(0.0)
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    /// The logit. Panics if `x` has the wrong length.
    pub fn forward(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n_features(), "input width");
        self.activations(x).last().unwrap()[0]
    }

    /// Gradients of `upstream · logit(x)` with respect to parameters and input.
    pub fn backward(&self, x: &[f64], upstream: f64) -> Result<(f64, Gradients, Vec<f64>)> {
        self.check_input(x)?;
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward_into(x, upstream, &mut grads);
        let logit = self.forward(x);
        Ok((logit, grads, input_grad))
    }

    /// Adds the parameter gradient into `grads`; returns the input gradient.
    fn backward_into(&self, x: &[f64], upstream: f64, grads: &mut Gradients) -> Vec<f64> {
        let acts = self.activations(x);
        let mut delta = vec![upstream];
        for l in (0..self.weights.len()).rev() {
            let input = &acts[l];
            let fan_in = input.len();
            let w = &self.weights[l];
            for (j, dj) in delta.iter().enumerate() {
                grads.biases[l][j] += dj;
                for (g, a) in grads.weights[l][j * fan_in..(j + 1) * fan_in].iter_mut().zip(input) {
                    *g += dj * a;
                }
            }
            let mut prev = vec![0.0; fan_in];
            for (j, dj) in delta.iter().enumerate() {
                for (p, wji) in prev.iter_mut().zip(&w[j * fan_in..(j + 1) * fan_in]) {
                    *p += dj * wji;
                }
            }
            if l > 0 {
                // ReLU gate of the layer feeding this one.
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        delta
    }

    /// `∇_x logit(x)`.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.backward(x, 1.0)?.2)
    }

    /// Mean logistic loss and its parameter gradient over `(x, y)` pairs.
    pub fn logistic_loss_grad(&self, xs: &[&[f64]], ys: &[f64]) -> (f64, Gradients) {
        let mut grads = Gradients::zeros_like(self);
        let mut loss = 0.0;
        let k = xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let z = self.forward(x);
            loss += logistic_loss(z, y);
            self.backward_into(x, (sigmoid(z) - y) / k, &mut grads);
        }
        (loss / k, grads)
    }

    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= lr * gi;
            }
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            for (bi, gi) in b.iter_mut().zip(g) {
                *bi -= lr * gi;
            }
        }
    }

    /// Every weight then every bias, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        self.weights.iter().flatten().chain(self.biases.iter().flatten()).copied().collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "network has {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter();
        for p in self.weights.iter_mut().flatten().chain(self.biases.iter_mut().flatten()) {
            *p = *it.next().unwrap();
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let net: TinyNet = serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        let sizes = &net.layer_sizes;
        let ok = sizes.len() >= 3
            && net.weights.len() == sizes.len() - 1
            && net.biases.len() == sizes.len() - 1
            && sizes.windows(2).zip(&net.weights).all(|(s, w)| w.len() == s[0] * s[1])
            && sizes[1..].iter().zip(&net.biases).all(|(s, b)| b.len() == *s)
            && net.feature_baseline.len() == sizes[0]
            && sizes.last() == Some(&1);
        if !ok {
            return Err(Error::parse(origin, "parameter shapes disagree with layer_sizes"));
        }
        if net.params().iter().chain(&net.feature_baseline).any(|x| !x.is_finite()) {
            return Err(Error::parse(origin, "non-finite parameter"));
        }
        Ok(net)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `−y log σ(z) − (1−y) log(1−σ(z))`, computed without overflow.
pub fn logistic_loss(z: f64, y: f64) -> f64 {
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    softplus - y * z
}

/// Contiguous groups of `k` features per variable.
pub fn contiguous_groups(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| (i * k..(i + 1) * k).collect()).collect()
}

/// Checks that `groups` partitions `0..n_features`.
pub fn check_groups(groups: &[Vec<usize>], n_features: usize) -> Result<()> {
    check_variable_count(groups.len())?;
    let mut seen = vec![false; n_features];
    for g in groups {
        if g.is_empty() {
            return Err(Error::Config("variable with no features".into()));
        }
        for &f in g {
            if f >= n_features || seen[f] {
                return Err(Error::Config(format!(
                    "groups do not partition {n_features} features (feature {f})"
                )));
            }
            seen[f] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Config("groups leave some features unassigned".into()));
    }
    Ok(())
}

/// `x` with every variable outside `t` set to the baseline.
pub fn masked_input(x: &[f64], t: SubsetMask, groups: &[Vec<usize>], baseline: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    for (i, g) in groups.iter().enumerate() {
        if !t.contains(i) {
            for &f in g {
                out[f] = baseline[f];
            }
        }
    }
    out
}

/// Logit of `x` with variables outside `t` masked.
pub fn masked_forward(net: &TinyNet, x: &[f64], t: SubsetMask, groups: &[Vec<usize>]) -> Result<f64> {
    net.check_input(x)?;
    check_groups(groups, net.n_features())?;
    Ok(net.forward(&masked_input(x, t, groups, &net.feature_baseline)))
}

/// Value table of `x` under `net` over all `2^n` maskings.
pub fn masked_table(net: &TinyNet, x: &[f64], groups: &[Vec<usize>]) -> Result<ValueTable> {
    net.check_input(x)?;
    check_groups(groups, net.n_features())?;
    ValueTable::from_evaluator(groups.len(), |t| {
        net.forward(&masked_input(x, t, groups, &net.feature_baseline))
    })
}

/// Copy of `net` with `N(0, σ²)` noise added to every weight and bias.
pub fn gaussian_perturb(net: &TinyNet, sigma: f64, seed: u64) -> Result<TinyNet> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut out = net.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in out.weights.iter_mut().flatten().chain(out.biases.iter_mut().flatten()) {
        *p += normal.sample(&mut rng);
    }
    Ok(out)
}

/// `x + σ · sign(∇_x logit(x))`, with `sign(0) = 0`.
pub fn fgsm_perturb(net: &TinyNet, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    let grad = net.input_gradient(x)?;
    Ok(x.iter()
        .zip(grad)
        .map(|(xi, g)| {
            let s = if g > 0.0 {
                1.0
            } else if g < 0.0 {
                -1.0
            } else {
                0.0
            };
            xi + sigma * s
        })
        .collect())
}

/// Table of a freshly initialized network on one random sample with inputs
/// uniform in `[-1, 1]` and `k = layer_sizes[0] / n` features per variable.
pub fn random_init_table(layer_sizes: &[usize], n: usize, seed: u64) -> Result<ValueTable> {
    let net = TinyNet::new(layer_sizes, seed)?;
    if n == 0 || net.n_features() % n != 0 {
        return Err(Error::Config(format!(
            "{} features cannot be split evenly over {n} variables",
            net.n_features()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let x: Vec<f64> = (0..net.n_features()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    masked_table(&net, &x, &contiguous_groups(n, net.n_features() / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_x(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn shapes_and_param_count() {
        let net = TinyNet::new(&[6, 5, 4, 1], 0).unwrap();
        assert_eq!(net.param_count(), 6 * 5 + 5 + 5 * 4 + 4 + 4 + 1);
        assert!(TinyNet::new(&[6, 1], 0).is_err());
        assert!(TinyNet::new(&[6, 4, 2], 0).is_err());
    }

    #[test]
    fn masking_semantics() {
        let mut net = TinyNet::new(&[4, 8, 1], 3).unwrap();
        net.feature_baseline = vec![0.1, -0.2, 0.3, 0.0];
        let groups = contiguous_groups(2, 2);
        let x = random_x(4, 1);
        let full = SubsetMask::full(2);
        assert_eq!(masked_forward(&net, &x, full, &groups).unwrap(), net.forward(&x));
        assert_eq!(
            masked_forward(&net, &x, SubsetMask::EMPTY, &groups).unwrap(),
            net.forward(&net.feature_baseline)
        );
        let once = masked_input(&x, SubsetMask::from_indices(&[1]), &groups, &net.feature_baseline);
        let twice = masked_input(&once, SubsetMask::from_indices(&[1]), &groups, &net.feature_baseline);
        assert_eq!(once, twice);
        assert!(masked_forward(&net, &x, full, &[vec![0, 1], vec![1, 2, 3]]).is_err());
        assert!(masked_forward(&net, &x, full, &[vec![0, 1], vec![2]]).is_err());
    }

    #[test]
    fn gaussian_noise_statistics() {
        let net = TinyNet::new(&[100, 100, 1], 4).unwrap();
        assert_eq!(gaussian_perturb(&net, 0.0, 1).unwrap(), net);
        let noisy = gaussian_perturb(&net, 0.3, 1).unwrap();
        assert_eq!(noisy.param_count(), net.param_count());
        let diffs: Vec<f64> = noisy.params().iter().zip(net.params()).map(|(a, b)| a - b).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
        assert!(diffs.len() >= 10_000);
        assert!((sd - 0.3).abs() < 0.05 * 0.3, "sd {sd}");
        assert_eq!(noisy, gaussian_perturb(&net, 0.3, 1).unwrap());
    }

    #[test]
    fn fgsm_is_bounded() {
        let net = TinyNet::new(&[5, 7, 1], 2).unwrap();
        let x = random_x(5, 3);
        assert_eq!(fgsm_perturb(&net, &x, 0.0).unwrap(), x);
        let adv = fgsm_perturb(&net, &x, 0.1).unwrap();
        assert!(adv.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 0.1 + 1e-15));
        assert!(net.forward(&adv) >= net.forward(&x));
    }

    #[test]
    fn random_init_tables() {
        let a = random_init_table(&[20, 16, 1], 5, 1).unwrap();
        assert_eq!(a.values().len(), 32);
        assert_eq!(a, random_init_table(&[20, 16, 1], 5, 1).unwrap());
        assert_ne!(a, random_init_table(&[20, 16, 1], 5, 2).unwrap());
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = TinyNet::new(&[3, 4, 1], 8).unwrap();
        let back = TinyNet::from_json(&net.to_json(), Path::new("mem")).unwrap();
        assert_eq!(back, net);
        let mut broken = net.clone();
        broken.biases[0].pop();
        assert!(TinyNet::from_json(&broken.to_json(), Path::new("mem")).is_err());
    }

    #[test]
    fn logistic_loss_is_stable() {
        assert!((logistic_loss(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
        assert!(logistic_loss(800.0, 1.0).abs() < 1e-12);
        assert!((logistic_loss(-800.0, 1.0) - 800.0).abs() < 1e-9);
    }
}
