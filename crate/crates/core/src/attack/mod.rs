//! Shadow-model membership inference.
//!
//! Attack datasets are built from shadow models either one record per sample
//! or one record per batch of same-split samples (features averaged over the
//! batch). A binary classifier learns In/Out from those records and is then
//! scored against a target that it can only query for probabilities.

mod classifier;
mod evaluate;
mod oracle;
mod records;

pub use classifier::{train_attack_model, AttackClassifier, AttackModel, AttackModelConfig};
pub use evaluate::{
    attacker_advantage, evaluate_attack, evaluate_attack_detailed, query_features, AttackEvaluation,
};
pub use oracle::{PredictionOracle, TargetModel};
pub use records::{
    attack_feature, batch_means, build_attack_dataset, build_attack_dataset_batchwise,
    build_attack_dataset_samplewise, feature_rows, read_attack_csv, AttackDataset, AttackMode, AttackRecord,
    MembershipLabel, RecordOrigin, Split,
};
