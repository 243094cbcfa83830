use rand::seq::SliceRandom;

use super::records::{AttackDataset, MembershipLabel};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{forward, init_seed, train, ModelParams, ModelSpec, Tensor, TrainConfig};
use crate::rng::{derived_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub enum AttackClassifier {
    /// `sigmoid(w·x + b)`.
    Logistic { weights: Vec<f64>, bias: f64 },
    /// One hidden ReLU layer and a two-way softmax; the In probability is
    /// `sigmoid(z_in − z_out)`.
    Mlp(ModelParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackModelConfig {
    pub train: TrainConfig,
    /// Width of the hidden layer; `None` trains logistic regression.
    pub hidden: Option<usize>,
}

/// Binary membership classifier over standardized attack features.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackModel {
    pub classifier: AttackClassifier,
    /// Per-feature offsets and scales: the classifier sees `(x − mean) / scale`.
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl AttackModel {
    /// Logistic model with all-zero weights: every score is exactly 0.5.
    pub fn zeros(feature_dim: usize) -> Self {
        AttackModel {
            classifier: AttackClassifier::Logistic {
                weights: vec![0.0; feature_dim],
                bias: 0.0,
            },
            feature_mean: vec![0.0; feature_dim],
            feature_scale: vec![1.0; feature_dim],
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_mean.len()
    }

    fn standardize(&self, feature: &[f64]) -> Vec<f64> {
        feature
            .iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    /// Probability that `feature` comes from a member, in `(0, 1)`.
    pub fn score(&self, feature: &[f64]) -> Result<f64> {
        if feature.len() != self.feature_dim() {
            return Err(Error::shape(format!(
                "attack feature has {} entries, model expects {}",
                feature.len(),
                self.feature_dim()
            )));
        }
        let x = self.standardize(feature);
        let p = match &self.classifier {
            AttackClassifier::Logistic { weights, bias } => {
                sigmoid(weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + bias)
            }
            AttackClassifier::Mlp(params) => {
                let row = Tensor::from_vec(1, x.len(), x)?;
                forward(params, &row)?.get(0, 1)
            }
        };
        if !p.is_finite() {
            return Err(Error::Numeric("attack score is non-finite".into()));
        }
        Ok(p)
    }

    /// In when the score is strictly above 0.5.
    pub fn predict(&self, feature: &[f64]) -> Result<MembershipLabel> {
        Ok(if self.score(feature)? > 0.5 {
            MembershipLabel::In
        } else {
            MembershipLabel::Out
        })
    }
}

fn feature_stats(data: &AttackDataset) -> (Vec<f64>, Vec<f64>) {
    let dim = data.feature_dim();
    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in &data.records {
        for (m, x) in mean.iter_mut().zip(&r.feature) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in &data.records {
        for ((v, x), m) in var.iter_mut().zip(&r.feature).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let scale = var
        .iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

/// Fits the attack classifier on `data` with mini-batch SGD on binary
/// cross-entropy (logistic) or softmax cross-entropy (hidden-layer variant).
pub fn train_attack_model(data: &AttackDataset, cfg: &AttackModelConfig) -> Result<AttackModel> {
    cfg.train.validate()?;
    if data.count(MembershipLabel::In) == 0 || data.count(MembershipLabel::Out) == 0 {
        return Err(Error::input(
            "attack dataset must contain both In and Out records",
        ));
    }
    let dim = data.feature_dim();
    if data.records.iter().any(|r| r.feature.len() != dim) {
        return Err(Error::shape("attack records have differing feature lengths"));
    }
    let (feature_mean, feature_scale) = feature_stats(data);
    let mut model = AttackModel {
        classifier: AttackClassifier::Logistic {
            weights: vec![0.0; dim],
            bias: 0.0,
        },
        feature_mean,
        feature_scale,
    };
    let xs: Vec<Vec<f64>> = data
        .records
        .iter()
        .map(|r| model.standardize(&r.feature))
        .collect();
    let ys: Vec<f64> = data.records.iter().map(|r| r.label.as_target()).collect();

    model.classifier = match cfg.hidden {
        None => fit_logistic(&xs, &ys, &cfg.train)?,
        Some(width) => fit_mlp(&xs, &ys, width, &cfg.train)?,
    };
    Ok(model)
}

fn fit_logistic(xs: &[Vec<f64>], ys: &[f64], cfg: &TrainConfig) -> Result<AttackClassifier> {
    let dim = xs[0].len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut grad_w = vec![0.0; dim];
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut derived_rng(cfg.seed, Stream::Epoch, epoch as u64));
        for chunk in order.chunks(cfg.batch_size) {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for &i in chunk {
                let z = w.iter().zip(&xs[i]).map(|(a, x)| a * x).sum::<f64>() + b;
                let err = sigmoid(z) - ys[i];
                for (g, x) in grad_w.iter_mut().zip(&xs[i]) {
                    *g += err * x;
                }
                grad_b += err;
            }
            let step = cfg.learning_rate / chunk.len() as f64;
            for (a, g) in w.iter_mut().zip(&grad_w) {
                *a -= step * g;
            }
            b -= step * grad_b;
        }
        if !(b.is_finite() && w.iter().all(|x| x.is_finite())) {
            return Err(Error::Numeric(format!("attack model diverged in epoch {epoch}")));
        }
    }
    Ok(AttackClassifier::Logistic { weights: w, bias: b })
}

fn fit_mlp(xs: &[Vec<f64>], ys: &[f64], width: usize, cfg: &TrainConfig) -> Result<AttackClassifier> {
    let spec = ModelSpec::new(xs[0].len(), vec![width], 2)?;
    let features = Tensor::from_rows(xs)?;
    let labels = ys.iter().map(|&y| usize::from(y > 0.5)).collect();
    let dataset = LabeledDataset::new(features, labels, 2)?;
    let init = ModelParams::init(&spec, init_seed(cfg.seed))?;
    Ok(AttackClassifier::Mlp(train(&init, &dataset, cfg)?))
}
