//! In-process federated averaging.
//!
//! Each round the server hands the global model to every client, each client
//! runs `local.epochs` epochs of SGD on its own shard, and the server replaces
//! the global model with the sample-weighted mean of the returned parameters.
//! Clients train in parallel; aggregation always runs in ascending client id,
//! so the result does not depend on scheduling.
//!
//! Seeding: the initial weights come from `init_seed(seed)`, client `i` shuffles
//! with the stream `party_seed(seed, i)` and numbers its epochs globally, so
//! round `r` covers epochs `r*e .. (r+1)*e`. Centralized training is the
//! single-party case and uses party 0's stream for `e*r` epochs.

use rayon::prelude::*;

use crate::dataset::{partition_indices, LabeledDataset};
use crate::error::{Error, Result};
use crate::numerics::{init_seed, train_from_epoch, ModelParams, ModelSpec, TrainConfig};
use crate::rng::{derive_seed, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct FLConfig {
    pub n_clients: usize,
    pub rounds: usize,
    /// Per-round local training. Its `seed` field is ignored; client streams
    /// derive from [`FLConfig::seed`].
    pub local: TrainConfig,
    pub model: ModelSpec,
    pub seed: u64,
}

impl FLConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clients == 0 {
            return Err(Error::input("n_clients must be at least 1"));
        }
        if self.rounds == 0 {
            return Err(Error::input("rounds must be at least 1"));
        }
        self.local.validate()?;
        self.model.validate()
    }

    /// Total local epochs per client, `e * r`.
    pub fn total_epochs(&self) -> usize {
        self.local.epochs * self.rounds
    }
}

/// Parameters returned by one client at the end of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundUpdate {
    pub client_id: usize,
    pub params: ModelParams,
    pub sample_count: usize,
}

/// Shuffle stream of party `client`.
pub fn party_seed(seed: u64, client: usize) -> u64 {
    derive_seed(seed, Stream::Party, client as u64)
}

fn sorted_updates(updates: &[RoundUpdate]) -> Result<Vec<&RoundUpdate>> {
    if updates.is_empty() {
        return Err(Error::input("no client updates to aggregate"));
    }
    let mut sorted: Vec<&RoundUpdate> = updates.iter().collect();
    sorted.sort_by_key(|u| u.client_id);
    if sorted.windows(2).any(|w| w[0].client_id == w[1].client_id) {
        return Err(Error::input("duplicate client id among updates"));
    }
    Ok(sorted)
}

/// `(client_id, sample_count / total)` in ascending client id.
pub fn aggregation_weights(updates: &[RoundUpdate]) -> Result<Vec<(usize, f64)>> {
    let sorted = sorted_updates(updates)?;
    let total: usize = sorted.iter().map(|u| u.sample_count).sum();
    if total == 0 {
        return Err(Error::input("client updates report zero samples"));
    }
    Ok(sorted
        .iter()
        .map(|u| (u.client_id, u.sample_count as f64 / total as f64))
        .collect())
}

/// Sample-count-weighted elementwise mean of the client parameters.
///
/// Computed as `anchor + Σ w_i (p_i − anchor)` with the lowest client id as
/// anchor, which makes a single update and a set of identical updates come
/// back bit for bit.
pub fn federated_average(updates: &[RoundUpdate]) -> Result<ModelParams> {
    let weights = aggregation_weights(updates)?;
    let sorted = sorted_updates(updates)?;
    let anchor = &sorted[0].params;
    if let Some(bad) = sorted.iter().find(|u| !u.params.same_shape(anchor)) {
        return Err(Error::shape(format!(
            "client {} sent parameters of a different shape",
            bad.client_id
        )));
    }
    let mut deviation = anchor.zeros_like();
    for (u, &(_, w)) in sorted.iter().zip(&weights).skip(1) {
        for ((dev, p), a) in deviation
            .tensors_mut()
            .zip(u.params.tensors())
            .zip(anchor.tensors())
        {
            for ((d, &x), &y) in dev.data_mut().iter_mut().zip(p.data()).zip(a.data()) {
                *d += w * (x - y);
            }
        }
    }
    let mut out = anchor.clone();
    for (o, dev) in out.tensors_mut().zip(deviation.tensors()) {
        for (x, &d) in o.data_mut().iter_mut().zip(dev.data()) {
            if d != 0.0 {
                *x += d;
            }
        }
    }
    if !out.is_finite() {
        return Err(Error::Numeric("aggregated parameters are non-finite".into()));
    }
    Ok(out)
}

/// One round with explicit per-client shuffle streams.
///
/// Every client starts from `global`, trains `local.epochs` epochs numbered
/// from `first_epoch` with `seeds[i]`, and the results are averaged.
pub fn run_round_with_seeds(
    global: &ModelParams,
    shards: &[LabeledDataset],
    local: &TrainConfig,
    seeds: &[u64],
    first_epoch: usize,
) -> Result<ModelParams> {
    if shards.len() != seeds.len() {
        return Err(Error::input(format!(
            "{} shards but {} client seeds",
            shards.len(),
            seeds.len()
        )));
    }
    let updates = shards
        .par_iter()
        .zip(seeds.par_iter())
        .enumerate()
        .map(|(client_id, (shard, &seed))| {
            let cfg = TrainConfig { seed, ..*local };
            let params = train_from_epoch(global, shard, &cfg, first_epoch)?;
            Ok(RoundUpdate {
                client_id,
                params,
                sample_count: shard.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    federated_average(&updates)
}

/// Round `round` (zero-based) of the protocol on `shards`.
pub fn run_round(
    global: &ModelParams,
    shards: &[LabeledDataset],
    cfg: &FLConfig,
    round: usize,
) -> Result<ModelParams> {
    cfg.validate()?;
    if shards.len() != cfg.n_clients {
        return Err(Error::input(format!(
            "{} shards for {} clients",
            shards.len(),
            cfg.n_clients
        )));
    }
    let seeds: Vec<u64> = (0..cfg.n_clients).map(|i| party_seed(cfg.seed, i)).collect();
    run_round_with_seeds(global, shards, &cfg.local, &seeds, round * cfg.local.epochs)
}

/// Client shards used by [`train_federated`].
pub fn client_shards(dataset: &LabeledDataset, cfg: &FLConfig) -> Result<Vec<LabeledDataset>> {
    let shards = partition_indices(
        dataset.len(),
        cfg.n_clients,
        derive_seed(cfg.seed, Stream::Partition, 0),
    )?;
    Ok(shards.iter().map(|s| dataset.subset(s)).collect())
}

pub fn train_federated(dataset: &LabeledDataset, cfg: &FLConfig) -> Result<ModelParams> {
    train_federated_with(dataset, cfg, |_, _| Ok(()))
}

/// [`train_federated`], calling `on_round(round, global)` after every round.
pub fn train_federated_with<F>(
    dataset: &LabeledDataset,
    cfg: &FLConfig,
    mut on_round: F,
) -> Result<ModelParams>
where
    F: FnMut(usize, &ModelParams) -> Result<()>,
{
    cfg.validate()?;
    if dataset.len() < cfg.n_clients {
        return Err(Error::input(format!(
            "{} samples cannot feed {} clients",
            dataset.len(),
            cfg.n_clients
        )));
    }
    let shards = client_shards(dataset, cfg)?;
    let mut global = ModelParams::init(&cfg.model, init_seed(cfg.seed))?;
    for round in 0..cfg.rounds {
        global = run_round(&global, &shards, cfg, round)?;
        on_round(round, &global)?;
    }
    Ok(global)
}

/// Baseline: one model trained `e * r` epochs on the whole dataset.
pub fn train_centralized(dataset: &LabeledDataset, cfg: &FLConfig) -> Result<ModelParams> {
    cfg.validate()?;
    let init = ModelParams::init(&cfg.model, init_seed(cfg.seed))?;
    let train_cfg = TrainConfig {
        epochs: cfg.total_epochs(),
        seed: party_seed(cfg.seed, 0),
        ..cfg.local
    };
    crate::numerics::train(&init, dataset, &train_cfg)
}
