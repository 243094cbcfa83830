use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;

use super::tensor::{argmax, softmax_rows, Tensor};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, derived_rng, rng_from, Stream};

/// Probabilities are clamped to this floor inside the log of the loss.
pub const LOSS_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
}

/// Layer layout of a feed-forward classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl ModelSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Result<Self> {
        let spec = ModelSpec {
            input_dim,
            hidden_dims,
            output_dim,
            activation: Activation::Relu,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_dim < 2 {
            return Err(Error::input(format!(
                "output_dim must be at least 2, got {}",
                self.output_dim
            )));
        }
        if self.input_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::input("all layer dimensions must be at least 1"));
        }
        Ok(())
    }

    /// `[input, hidden..., output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.dims().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `(fan_in, fan_out)`.
    pub weight: Tensor,
    /// `(1, fan_out)`.
    pub bias: Tensor,
}

/// Weights of a [`ModelSpec`]. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
}

impl ModelParams {
    /// Glorot-uniform weights and zero biases, drawn from `seed`.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_from(seed);
        let layers = spec
            .dims()
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                let data = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
                Layer {
                    weight: Tensor::from_vec(fan_in, fan_out, data).expect("sized above"),
                    bias: Tensor::zeros(1, fan_out),
                }
            })
            .collect();
        Ok(ModelParams { layers })
    }

    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .dims()
            .windows(2)
            .map(|w| Layer {
                weight: Tensor::zeros(w[0], w[1]),
                bias: Tensor::zeros(1, w[1]),
            })
            .collect();
        Ok(ModelParams { layers })
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Tensor::zeros(l.weight.rows(), l.weight.cols()),
                    bias: Tensor::zeros(1, l.bias.cols()),
                })
                .collect(),
        }
    }

    /// Layer widths, `[input, hidden..., output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.layers.iter().map(|l| l.weight.rows()).collect();
        if let Some(last) = self.layers.last() {
            dims.push(last.weight.cols());
        }
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.rows())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols())
    }

    /// Recovers the architecture from the weight shapes.
    pub fn spec(&self) -> ModelSpec {
        let dims = self.dims();
        ModelSpec {
            input_dim: dims[0],
            hidden_dims: dims[1..dims.len() - 1].to_vec(),
            output_dim: dims[dims.len() - 1],
            activation: Activation::Relu,
        }
    }

    pub fn conforms_to(&self, spec: &ModelSpec) -> bool {
        self.dims() == spec.dims()
            && self
                .layers
                .iter()
                .all(|l| l.bias.rows() == 1 && l.bias.cols() == l.weight.cols())
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.shape() == b.weight.shape() && a.bias.shape() == b.bias.shape())
    }

    /// Every parameter in layer order: weights row-major, then biases.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(l.bias.data());
        }
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub(crate) fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(Tensor::is_finite)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ModelParams) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::shape("parameter sets have different layouts"));
        }
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            a.axpy(alpha, b)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::input("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::input("batch_size must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::input(format!(
                "learning_rate must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

fn check_input(params: &ModelParams, batch: &Tensor) -> Result<()> {
    if params.layers.is_empty() {
        return Err(Error::shape("model has no layers"));
    }
    if batch.cols() != params.input_dim() {
        return Err(Error::shape(format!(
            "batch has {} features, model expects {}",
            batch.cols(),
            params.input_dim()
        )));
    }
    Ok(())
}

/// Hidden activations of each layer plus the output logits.
fn forward_trace(params: &ModelParams, batch: &Tensor) -> Result<Vec<Tensor>> {
    check_input(params, batch)?;
    let last = params.layers.len() - 1;
    let mut acts = Vec::with_capacity(params.layers.len());
    let mut current = batch.clone();
    for (i, layer) in params.layers.iter().enumerate() {
        let mut z = current.matmul(&layer.weight)?;
        z.add_row_broadcast(&layer.bias)?;
        if i < last {
            z.map_inplace(|x| x.max(0.0));
        }
        acts.push(z.clone());
        current = z;
    }
    Ok(acts)
}

/// Class probabilities for each row of `batch`.
pub fn forward(params: &ModelParams, batch: &Tensor) -> Result<Tensor> {
    let logits = forward_trace(params, batch)?.pop().expect("at least one layer");
    let probs = softmax_rows(&logits);
    if !probs.is_finite() {
        return Err(Error::Numeric("non-finite class probabilities".into()));
    }
    Ok(probs)
}

/// Per-sample loss `-ln(max(p_label, 1e-12))` and its mean.
pub fn cross_entropy(probs: &Tensor, labels: &[usize]) -> Result<(Vec<f64>, f64)> {
    if labels.len() != probs.rows() {
        return Err(Error::shape(format!(
            "{} labels for {} probability rows",
            labels.len(),
            probs.rows()
        )));
    }
    let mut losses = Vec::with_capacity(labels.len());
    for (row, &label) in probs.iter_rows().zip(labels) {
        losses.push(sample_loss(row, label)?);
    }
    let mean = if losses.is_empty() {
        0.0
    } else {
        losses.iter().sum::<f64>() / losses.len() as f64
    };
    Ok((losses, mean))
}

pub(crate) fn sample_loss(row: &[f64], label: usize) -> Result<f64> {
    let p = row
        .get(label)
        .ok_or_else(|| Error::input(format!("label {label} out of range for {} classes", row.len())))?;
    Ok(-(p.max(LOSS_CLAMP)).ln())
}

/// Gradient of the mean cross-entropy over `batch` with respect to every parameter.
pub fn backward(params: &ModelParams, batch: &Tensor, labels: &[usize]) -> Result<ModelParams> {
    if labels.len() != batch.rows() {
        return Err(Error::shape(format!(
            "{} labels for a batch of {} rows",
            labels.len(),
            batch.rows()
        )));
    }
    let classes = params.output_dim();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::input(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let mut acts = forward_trace(params, batch)?;
    let n = batch.rows().max(1) as f64;

    // dL/dlogits = (softmax - onehot) / n
    let mut delta = softmax_rows(acts.last().expect("at least one layer"));
    for (r, &label) in labels.iter().enumerate() {
        let row = delta.row_mut(r);
        row[label] -= 1.0;
        for x in row.iter_mut() {
            *x /= n;
        }
    }

    let mut grads = params.zeros_like();
    for i in (0..params.layers.len()).rev() {
        acts.truncate(i);
        let input = if i == 0 { batch } else { &acts[i - 1] };
        grads.layers[i].weight = input.t_matmul(&delta)?;
        grads.layers[i].bias = delta.sum_rows();
        if i > 0 {
            let mut upstream = delta.matmul_t(&params.layers[i].weight)?;
            for (g, &a) in upstream.data_mut().iter_mut().zip(input.data()) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            delta = upstream;
        }
    }
    Ok(grads)
}

/// Mini-batch SGD for `cfg.epochs` epochs.
pub fn train(params: &ModelParams, dataset: &LabeledDataset, cfg: &TrainConfig) -> Result<ModelParams> {
    train_from_epoch(params, dataset, cfg, 0)
}

/// Mini-batch SGD whose epochs are numbered from `first_epoch`.
///
/// Epoch `t` shuffles with a stream derived from `(cfg.seed, t)`, so splitting
/// a run of `a + b` epochs into a call with `a` epochs followed by a call with
/// `b` epochs starting at `a` reproduces the single call bit for bit.
pub fn train_from_epoch(
    params: &ModelParams,
    dataset: &LabeledDataset,
    cfg: &TrainConfig,
    first_epoch: usize,
) -> Result<ModelParams> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    check_input(params, dataset.features())?;
    let mut params = params.clone();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in first_epoch..first_epoch + cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut derived_rng(cfg.seed, Stream::Epoch, epoch as u64));
        for chunk in order.chunks(cfg.batch_size) {
            let batch = dataset.features().select_rows(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| dataset.labels()[i]).collect();
            let grads = backward(&params, &batch, &labels)?;
            params.axpy(-cfg.learning_rate, &grads)?;
        }
        if !params.is_finite() {
            return Err(Error::Numeric(format!(
                "parameters became non-finite in epoch {epoch}"
            )));
        }
    }
    Ok(params)
}

/// Fraction of argmax-correct rows and mean loss.
pub fn evaluate(params: &ModelParams, dataset: &LabeledDataset) -> Result<(f64, f64)> {
    if dataset.is_empty() {
        return Err(Error::input("cannot evaluate on an empty dataset"));
    }
    let probs = forward(params, dataset.features())?;
    score(&probs, dataset.labels())
}

/// Accuracy and mean loss of already computed probabilities.
pub fn score(probs: &Tensor, labels: &[usize]) -> Result<(f64, f64)> {
    let (_, mean_loss) = cross_entropy(probs, labels)?;
    let correct = probs
        .iter_rows()
        .zip(labels)
        .filter(|(row, &label)| argmax(row) == label)
        .count();
    Ok((correct as f64 / labels.len().max(1) as f64, mean_loss))
}

/// Seed for the initial weights of a run.
pub fn init_seed(seed: u64) -> u64 {
    derive_seed(seed, Stream::Init, 0)
}
