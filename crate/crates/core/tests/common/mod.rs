//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use ilens_core::zoo::TinyNet;
use ilens_core::{LatticeVector, SubsetMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> LatticeVector {
    LatticeVector::from_fn(n, |_| rng.random_range(-3.0..3.0)).unwrap()
}

fn is_subset(s: usize, t: usize) -> bool {
    s & !t == 0
}

/// `I_S = Σ_{T⊆S} (−1)^{|S|−|T|} u_T`, by enumerating all pairs.
pub fn naive_and(u: &[f64]) -> Vec<f64> {
    let len = u.len();
    (0..len)
        .map(|s| {
            (0..len)
                .filter(|&t| is_subset(t, s))
                .map(|t| {
                    let sign = if ((s.count_ones() - t.count_ones()) & 1) == 1 { -1.0 } else { 1.0 };
                    sign * u[t]
                })
                .sum()
        })
        .collect()
}

/// `I_S = −Σ_{T⊆S} (−1)^{|S|−|T|} u_{N∖T}` with `I_∅ = 0`.
pub fn naive_or(u: &[f64]) -> Vec<f64> {
    let len = u.len();
    let full = len - 1;
    (0..len)
        .map(|s| {
            if s == 0 {
                return 0.0;
            }
            -(0..len)
                .filter(|&t| is_subset(t, s))
                .map(|t| {
                    let sign = if ((s.count_ones() - t.count_ones()) & 1) == 1 { -1.0 } else { 1.0 };
                    sign * u[full & !t]
                })
                .sum::<f64>()
        })
        .collect()
}

/// `b + Σ_{∅≠S⊆T} I^AND_S + Σ_{S∩T≠∅} I^OR_S`, by enumerating subsets.
pub fn naive_reconstruct(b: f64, i_and: &[f64], i_or: &[f64], t: usize) -> f64 {
    let mut h = b;
    for s in 1..i_and.len() {
        if is_subset(s, t) {
            h += i_and[s];
        }
        if s & t != 0 {
            h += i_or[s];
        }
    }
    h
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

pub fn mask(ix: &[usize]) -> SubsetMask {
    SubsetMask::from_indices(ix)
}

/// Largest relative mismatch between backprop and central differences, for
/// parameters and for inputs.
pub fn gradient_mismatch(net: &TinyNet, x: &[f64]) -> (f64, f64) {
    let rel = |g: f64, fd: f64| (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
    let (_, grads, input_grad) = net.backward(x, 1.0).unwrap();
    let analytic: Vec<f64> = grads.weights.iter().flatten().chain(grads.biases.iter().flatten()).copied().collect();
    let params = net.params();
    let mut probe = net.clone();
    let mut worst_param: f64 = 0.0;
    for (i, &g) in analytic.iter().enumerate() {
        let h = 1e-5 * params[i].abs().max(1.0);
        let mut p = params.clone();
        p[i] = params[i] + h;
        probe.set_params(&p).unwrap();
        let up = probe.forward(x);
        p[i] = params[i] - h;
        probe.set_params(&p).unwrap();
        let down = probe.forward(x);
        worst_param = worst_param.max(rel(g, (up - down) / (2.0 * h)));
    }
    let mut worst_input: f64 = 0.0;
    for (i, &g) in input_grad.iter().enumerate() {
        let h = 1e-5 * x[i].abs().max(1.0);
        let mut xp = x.to_vec();
        xp[i] = x[i] + h;
        let up = net.forward(&xp);
        xp[i] = x[i] - h;
        let down = net.forward(&xp);
        worst_input = worst_input.max(rel(g, (up - down) / (2.0 * h)));
    }
    (worst_param, worst_input)
}
