//! Attacker-side shadow models.
//!
//! Shadows only ever see [`ShadowDataset`]s and a [`ModelSpec`]; nothing here
//! can reach the target's weights or training records.

use rayon::prelude::*;

use crate::dataset::ShadowDataset;
use crate::error::{Error, Result};
use crate::numerics::{init_seed, train, ModelParams, ModelSpec, TrainConfig};
use crate::rng::{derive_seed, Stream};

#[derive(Debug, Clone)]
pub struct ShadowEnsemble {
    pub models: Vec<ModelParams>,
    pub datasets: Vec<ShadowDataset>,
    pub spec: ModelSpec,
}

impl ShadowEnsemble {
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.models.len() != self.datasets.len() {
            return Err(Error::input(format!(
                "ensemble has {} models for {} datasets",
                self.models.len(),
                self.datasets.len()
            )));
        }
        if let Some(i) = self.models.iter().position(|m| !m.conforms_to(&self.spec)) {
            return Err(Error::shape(format!("shadow model {i} does not match the spec")));
        }
        Ok(())
    }
}

/// Training seed of shadow `index`.
pub fn shadow_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, Stream::ShadowTrain, index as u64)
}

/// Trains shadow `i` centrally on `datasets[i].train` only.
///
/// Shadow `i` starts from `init_seed(s)` and shuffles with `s`, where
/// `s = shadow_seed(cfg.seed, i)`.
pub fn train_shadows(
    datasets: Vec<ShadowDataset>,
    spec: &ModelSpec,
    cfg: &TrainConfig,
) -> Result<ShadowEnsemble> {
    if datasets.is_empty() {
        return Err(Error::input("no shadow datasets"));
    }
    if let Some(i) = datasets.iter().position(|d| d.train.is_empty()) {
        return Err(Error::input(format!(
            "shadow dataset {i} has an empty train split"
        )));
    }
    spec.validate()?;
    cfg.validate()?;
    let models = datasets
        .par_iter()
        .enumerate()
        .map(|(i, d)| train_one(d, spec, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShadowEnsemble {
        models,
        datasets,
        spec: spec.clone(),
    })
}

fn train_one(data: &ShadowDataset, spec: &ModelSpec, cfg: &TrainConfig, index: usize) -> Result<ModelParams> {
    let seed = shadow_seed(cfg.seed, index);
    let init = ModelParams::init(spec, init_seed(seed))?;
    train(&init, &data.train, &TrainConfig { seed, ..*cfg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize_gaussian, GaussianSpec, LabeledDataset};

    fn shadow(n: usize, seed: u64) -> ShadowDataset {
        let spec = GaussianSpec {
            class_count: 3,
            dim: 4,
            means_seed: 1,
            spread: 0.2,
        };
        let d = synthesize_gaussian(&spec, n, seed).unwrap();
        ShadowDataset::from_splits(d.slice(0, n / 2), d.slice(n / 2, n))
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 8,
            learning_rate: 0.1,
            seed: 5,
        }
    }

    #[test]
    fn single_shadow_delegates_to_train() {
        let spec = ModelSpec::new(4, vec![6], 3).unwrap();
        let d = shadow(40, 1);
        let ens = train_shadows(vec![d.clone()], &spec, &cfg()).unwrap();
        let s = shadow_seed(5, 0);
        let direct = train(
            &ModelParams::init(&spec, init_seed(s)).unwrap(),
            &d.train,
            &TrainConfig { seed: s, ..cfg() },
        )
        .unwrap();
        assert_eq!(ens.models[0], direct);
        ens.validate().unwrap();
    }

    #[test]
    fn distinct_seeds_give_distinct_models() {
        let spec = ModelSpec::new(4, vec![6], 3).unwrap();
        let d = shadow(40, 2);
        let ens = train_shadows(vec![d.clone(), d.clone(), d.clone(), d], &spec, &cfg()).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(ens.models[i], ens.models[j]);
            }
        }
    }

    #[test]
    fn empty_train_split_rejected() {
        let spec = ModelSpec::new(4, vec![], 3).unwrap();
        let d = shadow(10, 3);
        let empty = LabeledDataset::new(crate::numerics::Tensor::zeros(0, 4), vec![], 3).unwrap();
        let bad = ShadowDataset::from_splits(empty, d.test.clone());
        assert!(train_shadows(vec![d, bad], &spec, &cfg()).is_err());
        assert!(train_shadows(vec![], &spec, &cfg()).is_err());
    }
}
