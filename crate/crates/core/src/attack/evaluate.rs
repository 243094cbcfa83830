use super::classifier::AttackModel;
use super::oracle::PredictionOracle;
use super::records::{batch_means, feature_rows, AttackMode, MembershipLabel};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Outcome of an attack against one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackEvaluation {
    pub accuracy: f64,
    /// Evaluation records per label after balancing.
    pub per_label: usize,
    pub true_in: usize,
    pub true_out: usize,
}

/// Attack features of `pool` as seen through the target's query interface,
/// grouped per `mode`.
pub fn query_features(
    target: &dyn PredictionOracle,
    pool: &LabeledDataset,
    mode: AttackMode,
) -> Result<Vec<Vec<f64>>> {
    if pool.dim() != target.input_dim() {
        return Err(Error::shape(format!(
            "pool has {} features, target expects {}",
            pool.dim(),
            target.input_dim()
        )));
    }
    let probs = target.predict(pool.features())?;
    if probs.rows() != pool.len() || probs.cols() != target.class_count() {
        return Err(Error::shape("target returned a malformed probability matrix"));
    }
    let features = feature_rows(&probs, pool.labels())?;
    Ok(match mode {
        AttackMode::SampleWise => features,
        AttackMode::BatchWise(0) => return Err(Error::input("attack batch size must be at least 1")),
        AttackMode::BatchWise(b) => batch_means(&features, b),
    })
}

/// Membership-inference accuracy of `model` against `target`.
///
/// Both pools are turned into evaluation records (one per sample, or one per
/// pool-pure batch in batch-wise mode); the larger side is truncated so each
/// label contributes the same number of records.
pub fn evaluate_attack(
    model: &AttackModel,
    target: &dyn PredictionOracle,
    member_pool: &LabeledDataset,
    nonmember_pool: &LabeledDataset,
    mode: AttackMode,
) -> Result<f64> {
    evaluate_attack_detailed(model, target, member_pool, nonmember_pool, mode).map(|e| e.accuracy)
}

pub fn evaluate_attack_detailed(
    model: &AttackModel,
    target: &dyn PredictionOracle,
    member_pool: &LabeledDataset,
    nonmember_pool: &LabeledDataset,
    mode: AttackMode,
) -> Result<AttackEvaluation> {
    if member_pool.is_empty() || nonmember_pool.is_empty() {
        return Err(Error::input("member and nonmember pools must both be nonempty"));
    }
    let members = query_features(target, member_pool, mode)?;
    let nonmembers = query_features(target, nonmember_pool, mode)?;
    let per_label = members.len().min(nonmembers.len());

    let mut true_in = 0;
    for f in &members[..per_label] {
        if model.predict(f)? == MembershipLabel::In {
            true_in += 1;
        }
    }
    let mut true_out = 0;
    for f in &nonmembers[..per_label] {
        if model.predict(f)? == MembershipLabel::Out {
            true_out += 1;
        }
    }
    Ok(AttackEvaluation {
        accuracy: (true_in + true_out) as f64 / (2 * per_label) as f64,
        per_label,
        true_in,
        true_out,
    })
}

/// Batch-wise accuracy minus sample-wise accuracy.
pub fn attacker_advantage(batchwise_acc: f64, samplewise_acc: f64) -> Result<f64> {
    for (name, v) in [("batch-wise", batchwise_acc), ("sample-wise", samplewise_acc)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::input(format!("{name} accuracy {v} is outside [0, 1]")));
        }
    }
    Ok(batchwise_acc - samplewise_acc)
}
