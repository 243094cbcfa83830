#![allow(dead_code)]

use fedmia::dataset::{synthesize_gaussian, GaussianSpec, LabeledDataset};
use fedmia::numerics::{Layer, ModelParams, Tensor};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Naive loop-based forward pass: logits of one row.
pub fn naive_logits(params: &ModelParams, x: &[f64]) -> Vec<f64> {
    let last = params.layers.len() - 1;
    let mut cur = x.to_vec();
    for (i, layer) in params.layers.iter().enumerate() {
        let (fan_in, fan_out) = layer.weight.shape();
        let mut next = vec![0.0; fan_out];
        for (j, out) in next.iter_mut().enumerate() {
            let mut z = layer.bias.get(0, j);
            for (k, &c) in cur.iter().enumerate().take(fan_in) {
                z += c * layer.weight.get(k, j);
            }
            *out = if i < last { z.max(0.0) } else { z };
        }
        cur = next;
    }
    cur
}

/// Mean cross-entropy computed by the naive oracle, log-sum-exp form.
pub fn naive_loss(params: &ModelParams, xs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(labels) {
        let z = naive_logits(params, x);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - z[y];
    }
    total / xs.len() as f64
}

/// Hidden pre-activations of one row under the naive oracle.
pub fn naive_preactivations(params: &ModelParams, x: &[f64]) -> Vec<f64> {
    let last = params.layers.len() - 1;
    let mut cur = x.to_vec();
    let mut pre = Vec::new();
    for (i, layer) in params.layers.iter().enumerate().take(last + 1) {
        let fan_out = layer.weight.cols();
        let mut next = vec![0.0; fan_out];
        for (j, out) in next.iter_mut().enumerate() {
            let mut z = layer.bias.get(0, j);
            for (k, &c) in cur.iter().enumerate() {
                z += c * layer.weight.get(k, j);
            }
            if i < last {
                pre.push(z);
            }
            *out = if i < last { z.max(0.0) } else { z };
        }
        cur = next;
    }
    pre
}

/// Dense model with every weight and bias uniform in `[-scale, scale]`.
pub fn random_params(dims: &[usize], scale: f64, seed: u64) -> ModelParams {
    let mut r = rng(seed);
    let layers = dims
        .windows(2)
        .map(|w| Layer {
            weight: Tensor::from_vec(
                w[0],
                w[1],
                (0..w[0] * w[1]).map(|_| r.gen_range(-scale..scale)).collect(),
            )
            .unwrap(),
            bias: Tensor::from_vec(1, w[1], (0..w[1]).map(|_| r.gen_range(-scale..scale)).collect()).unwrap(),
        })
        .collect();
    ModelParams { layers }
}

pub fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Features uniform in `[0, 1]` and labels independent of them.
pub fn noise_dataset(n: usize, d: usize, classes: usize, seed: u64) -> LabeledDataset {
    let mut r = rng(seed);
    let data = (0..n * d).map(|_| r.gen::<f64>()).collect();
    let labels = (0..n).map(|i| i % classes).collect();
    LabeledDataset::new(Tensor::from_vec(n, d, data).unwrap(), labels, classes).unwrap()
}

pub fn blobs(n: usize, classes: usize, dim: usize, spread: f64, seed: u64) -> LabeledDataset {
    let spec = GaussianSpec {
        class_count: classes,
        dim,
        means_seed: 7,
        spread,
    };
    synthesize_gaussian(&spec, n, seed).unwrap()
}

pub fn bitwise_eq(a: &ModelParams, b: &ModelParams) -> bool {
    let (fa, fb) = (a.flat(), b.flat());
    fa.len() == fb.len() && fa.iter().zip(&fb).all(|(x, y)| x.to_bits() == y.to_bits())
}
