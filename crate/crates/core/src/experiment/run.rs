use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::config::{ExperimentConfig, TrainingMode};
use super::report::ResultRow;
use crate::attack::{
    build_attack_dataset, evaluate_attack, train_attack_model, AttackMode, AttackModel, AttackModelConfig,
    PredictionOracle, TargetModel,
};
use crate::dataset::{sample_shadow_datasets, synthesize_gaussian, DistributionSpec, LabeledDataset};
use crate::error::{Error, Result};
use crate::federated::{train_centralized, train_federated, FLConfig};
use crate::numerics::{score, ModelParams, ModelSpec, TrainConfig};
use crate::rng::{derive_seed, rng_from, Stream};
use crate::shadow::{train_shadows, ShadowEnsemble};

/// The three disjoint slices of one seed's data.
#[derive(Debug, Clone)]
pub struct DataCarve {
    /// Target training records; also the member pool.
    pub target_train: LabeledDataset,
    /// Records seen by nobody; the nonmember pool.
    pub nonmember: LabeledDataset,
    /// Attacker's data, source of every shadow dataset.
    pub shadow_master: LabeledDataset,
}

/// Carves `[target_train | nonmember | shadow_master]`, in that order, from a
/// seed-shuffled copy of the source. `source` is the loaded file dataset, or
/// `None` for a synthetic distribution.
pub fn carve_data(cfg: &ExperimentConfig, source: Option<&LabeledDataset>, seed: u64) -> Result<DataCarve> {
    let (t, n, m) = (cfg.target_train_size, cfg.nonmember_size, cfg.shadow_master_size);
    let total = t + n + m;
    let drawn;
    let source = match (&cfg.dataset, source) {
        (_, Some(s)) => s,
        (DistributionSpec::SyntheticGaussian(g), None) => {
            drawn = synthesize_gaussian(g, total, derive_seed(seed, Stream::Synthetic, 0))?;
            &drawn
        }
        (_, None) => return Err(Error::input("file-backed dataset was not loaded")),
    };
    if source.len() < total {
        return Err(Error::config(format!(
            "dataset has {} records but the config carves {total}",
            source.len()
        )));
    }
    let mut order: Vec<usize> = (0..source.len()).collect();
    order.shuffle(&mut rng_from(derive_seed(seed, Stream::Carve, 0)));
    Ok(DataCarve {
        target_train: source.subset(&order[..t]),
        nonmember: source.subset(&order[t..t + n]),
        shadow_master: source.subset(&order[t + n..total]),
    })
}

pub fn model_spec(cfg: &ExperimentConfig, data: &LabeledDataset) -> Result<ModelSpec> {
    ModelSpec::new(data.dim(), cfg.hidden.clone(), data.class_count())
}

pub fn fl_config(cfg: &ExperimentConfig, mode: TrainingMode, spec: &ModelSpec, seed: u64) -> FLConfig {
    FLConfig {
        n_clients: mode.n_clients(),
        rounds: cfg.rounds,
        local: TrainConfig {
            epochs: cfg.local_epochs,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            seed: 0,
        },
        model: spec.clone(),
        seed: derive_seed(seed, Stream::Target, 0),
    }
}

/// Target model for `mode`: federated averaging, or `e * r` central epochs.
pub fn train_target(
    cfg: &ExperimentConfig,
    mode: TrainingMode,
    data: &DataCarve,
    seed: u64,
) -> Result<ModelParams> {
    let spec = model_spec(cfg, &data.target_train)?;
    let fl = fl_config(cfg, mode, &spec, seed);
    match mode {
        TrainingMode::Centralized => train_centralized(&data.target_train, &fl),
        TrainingMode::Federated(_) => train_federated(&data.target_train, &fl),
    }
}

/// Shadow ensemble trained on the attacker's slice.
pub fn train_shadow_ensemble(cfg: &ExperimentConfig, data: &DataCarve, seed: u64) -> Result<ShadowEnsemble> {
    let spec = model_spec(cfg, &data.shadow_master)?;
    let sets = sample_shadow_datasets(
        &data.shadow_master,
        cfg.shadow.count,
        cfg.shadow.size,
        cfg.shadow.train_fraction,
        derive_seed(seed, Stream::ShadowSample, 0),
    )?;
    let train_cfg = TrainConfig {
        epochs: cfg.shadow.epochs,
        batch_size: cfg.shadow.batch_size,
        learning_rate: cfg.shadow.learning_rate,
        seed: derive_seed(seed, Stream::ShadowTrain, 0),
    };
    train_shadows(sets, &spec, &train_cfg)
}

pub fn attack_model_config(cfg: &ExperimentConfig, seed: u64) -> AttackModelConfig {
    AttackModelConfig {
        train: TrainConfig {
            epochs: cfg.attack.epochs,
            batch_size: cfg.attack.batch_size,
            learning_rate: cfg.attack.learning_rate,
            seed: derive_seed(seed, Stream::Attack, 0),
        },
        hidden: cfg.attack.hidden,
    }
}

pub fn train_attack_for_mode(
    cfg: &ExperimentConfig,
    ensemble: &ShadowEnsemble,
    mode: AttackMode,
    seed: u64,
) -> Result<AttackModel> {
    let data = build_attack_dataset(ensemble, mode)?;
    train_attack_model(&data, &attack_model_config(cfg, seed))
}

/// Accuracy of a queried target on a labeled pool.
pub fn query_accuracy(target: &dyn PredictionOracle, pool: &LabeledDataset) -> Result<f64> {
    let probs = target.predict(pool.features())?;
    Ok(score(&probs, pool.labels())?.0)
}

/// Fills `advantage` of every batch-wise row from the sample-wise row that
/// shares its dataset, seed and training mode.
pub fn attach_advantages(rows: &mut [ResultRow]) {
    let baselines: Vec<(String, u64, TrainingMode, f64)> = rows
        .iter()
        .filter(|r| r.attack_mode == AttackMode::SampleWise)
        .map(|r| (r.dataset.clone(), r.seed, r.training_mode, r.attack_accuracy))
        .collect();
    for row in rows.iter_mut() {
        row.advantage = match row.attack_mode {
            AttackMode::SampleWise => None,
            AttackMode::BatchWise(_) => baselines
                .iter()
                .find(|(d, s, m, _)| *d == row.dataset && *s == row.seed && *m == row.training_mode)
                .map(|&(.., base)| row.attack_accuracy - base),
        };
    }
}

fn run_seed(cfg: &ExperimentConfig, source: Option<&LabeledDataset>, seed: u64) -> Result<Vec<ResultRow>> {
    let data = carve_data(cfg, source, seed)?;
    let ensemble = train_shadow_ensemble(cfg, &data, seed)?;
    let attacks = cfg
        .attack_modes
        .par_iter()
        .map(|&mode| Ok((mode, train_attack_for_mode(cfg, &ensemble, mode, seed)?)))
        .collect::<Result<Vec<_>>>()?;

    let per_mode = cfg
        .training_modes
        .par_iter()
        .map(|&mode| {
            let target = TargetModel::new(train_target(cfg, mode, &data, seed)?)?;
            let train_acc = query_accuracy(&target, &data.target_train)?;
            let test_acc = query_accuracy(&target, &data.nonmember)?;
            attacks
                .iter()
                .map(|(attack_mode, model)| {
                    let acc =
                        evaluate_attack(model, &target, &data.target_train, &data.nonmember, *attack_mode)?;
                    Ok(ResultRow {
                        dataset: cfg.dataset_name.clone(),
                        training_mode: mode,
                        attack_mode: *attack_mode,
                        seed,
                        target_train_acc: train_acc,
                        target_test_acc: test_acc,
                        attack_accuracy: acc,
                        advantage: None,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_mode.into_iter().flatten().collect())
}

/// Runs every `(seed, training mode, attack mode)` cell of `cfg`.
///
/// Per seed: carve the data, train the shadows, train one attack model per
/// attack mode, then train each target and attack it. Rows come back sorted
/// by seed, training mode and attack mode.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let source = cfg.dataset.load()?;
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, source.as_ref(), seed))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ResultRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.seed, r.training_mode, r.attack_mode));
    attach_advantages(&mut rows);
    Ok(rows)
}
