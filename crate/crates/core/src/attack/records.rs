use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{forward, sample_loss, ModelParams, Tensor};
use crate::shadow::ShadowEnsemble;

/// Membership of a sample in a model's training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MembershipLabel {
    Out,
    In,
}

impl MembershipLabel {
    pub fn as_target(self) -> f64 {
        match self {
            MembershipLabel::In => 1.0,
            MembershipLabel::Out => 0.0,
        }
    }
}

/// How shadow (or target) outputs are turned into attack records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackMode {
    /// One record per queried sample.
    SampleWise,
    /// One record per batch of up to `B` samples from a single split, with
    /// the elementwise mean of the per-sample features.
    BatchWise(usize),
}

impl AttackMode {
    pub fn batch_size(self) -> Option<usize> {
        match self {
            AttackMode::SampleWise => None,
            AttackMode::BatchWise(b) => Some(b),
        }
    }

    /// Number of records a split of `n` samples produces.
    pub fn record_count(self, n: usize) -> usize {
        match self {
            AttackMode::SampleWise => n,
            AttackMode::BatchWise(b) => n.div_ceil(b),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            AttackMode::BatchWise(0) => Err(Error::input("attack batch size must be at least 1")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackMode::SampleWise => f.write_str("samplewise"),
            AttackMode::BatchWise(b) => write!(f, "batchwise({b})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

/// Which shadow samples a record was built from: rows `start..start + len`
/// of one split of one shadow dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordOrigin {
    pub shadow: usize,
    pub split: Split,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackRecord {
    /// Descending class probabilities followed by the cross-entropy loss.
    pub feature: Vec<f64>,
    pub label: MembershipLabel,
    pub origin: RecordOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackDataset {
    pub records: Vec<AttackRecord>,
    pub mode: AttackMode,
}

impl AttackDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.feature.len())
    }

    pub fn count(&self, label: MembershipLabel) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    /// CSV with columns `f0..fC,label`, label 1 for In and 0 for Out.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.feature_dim()).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row: Vec<String> = r.feature.iter().map(|x| x.to_string()).collect();
            row.push(if r.label == MembershipLabel::In { "1" } else { "0" }.into());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads `(feature, label)` pairs back from [`AttackDataset::write_csv`] output.
pub fn read_attack_csv<R: Read>(reader: R) -> Result<Vec<(Vec<f64>, MembershipLabel)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().next_back() != Some("label") {
        return Err(Error::format("header", "last column must be `label`"));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let n = rec.len();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::format(format!("row {}", line + 1), format!("bad number `{s}`")))
        };
        let feature = rec.iter().take(n - 1).map(parse).collect::<Result<Vec<_>>>()?;
        let label = match &rec[n - 1] {
            "1" => MembershipLabel::In,
            "0" => MembershipLabel::Out,
            other => {
                return Err(Error::format(
                    format!("row {}", line + 1),
                    format!("label must be 0 or 1, got `{other}`"),
                ))
            }
        };
        out.push((feature, label));
    }
    Ok(out)
}

/// Sorted probabilities (descending) followed by the sample's cross-entropy loss.
pub fn attack_feature(probs_row: &[f64], true_label: usize) -> Result<Vec<f64>> {
    let total: f64 = probs_row.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::input(format!("probability row sums to {total}, not 1")));
    }
    // adding +0.0 turns -ln(1) = -0.0 into +0.0
    let loss = sample_loss(probs_row, true_label)? + 0.0;
    let mut feature = probs_row.to_vec();
    feature.sort_unstable_by(|a, b| b.total_cmp(a));
    feature.push(loss);
    Ok(feature)
}

/// Per-row attack features of `probs` against `labels`.
pub fn feature_rows(probs: &Tensor, labels: &[usize]) -> Result<Vec<Vec<f64>>> {
    probs
        .iter_rows()
        .zip(labels)
        .map(|(row, &l)| attack_feature(row, l))
        .collect()
}

/// Elementwise mean of consecutive chunks of up to `batch` features.
pub fn batch_means(features: &[Vec<f64>], batch: usize) -> Vec<Vec<f64>> {
    features
        .chunks(batch.max(1))
        .map(|chunk| {
            let mut mean = vec![0.0; chunk[0].len()];
            for f in chunk {
                for (m, x) in mean.iter_mut().zip(f) {
                    *m += x;
                }
            }
            for m in &mut mean {
                *m /= chunk.len() as f64;
            }
            mean
        })
        .collect()
}

fn split_records(
    model: &ModelParams,
    data: &LabeledDataset,
    shadow: usize,
    split: Split,
    mode: AttackMode,
) -> Result<Vec<AttackRecord>> {
    if data.is_empty() {
        return Ok(Vec::new());
    }
    let label = match split {
        Split::Train => MembershipLabel::In,
        Split::Test => MembershipLabel::Out,
    };
    let probs = forward(model, data.features())?;
    let features = feature_rows(&probs, data.labels())?;
    let b = mode.batch_size().unwrap_or(1);
    Ok(batch_means(&features, b)
        .into_iter()
        .enumerate()
        .map(|(i, feature)| {
            let start = i * b;
            AttackRecord {
                feature,
                label,
                origin: RecordOrigin {
                    shadow,
                    split,
                    start,
                    len: b.min(data.len() - start),
                },
            }
        })
        .collect())
}

fn build(ensemble: &ShadowEnsemble, mode: AttackMode) -> Result<AttackDataset> {
    mode.validate()?;
    ensemble.validate()?;
    let per_shadow = ensemble
        .models
        .par_iter()
        .zip(ensemble.datasets.par_iter())
        .enumerate()
        .map(|(i, (model, data))| {
            let mut records = split_records(model, &data.train, i, Split::Train, mode)?;
            records.extend(split_records(model, &data.test, i, Split::Test, mode)?);
            Ok(records)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AttackDataset {
        records: per_shadow.into_iter().flatten().collect(),
        mode,
    })
}

/// One record per shadow sample: train rows are In, test rows are Out, each
/// scored by the shadow that owns it.
pub fn build_attack_dataset_samplewise(ensemble: &ShadowEnsemble) -> Result<AttackDataset> {
    build(ensemble, AttackMode::SampleWise)
}

/// One record per batch of `batch_size` consecutive rows of a single split;
/// the final partial batch of each split is kept.
pub fn build_attack_dataset_batchwise(ensemble: &ShadowEnsemble, batch_size: usize) -> Result<AttackDataset> {
    build(ensemble, AttackMode::BatchWise(batch_size))
}

pub fn build_attack_dataset(ensemble: &ShadowEnsemble, mode: AttackMode) -> Result<AttackDataset> {
    build(ensemble, mode)
}
