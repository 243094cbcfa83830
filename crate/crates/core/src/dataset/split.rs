use rand::seq::{index, SliceRandom};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, Stream};

/// Index sets of an IID disjoint split of `0..n` into `n_clients` shards.
///
/// Shard sizes differ by at most one, with the first `n % n_clients` shards
/// one larger. Membership is random; indices inside a shard are ascending, so
/// a single shard is the identity ordering.
pub fn partition_indices(n: usize, n_clients: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_clients == 0 || n_clients > n {
        return Err(Error::input(format!(
            "cannot split {n} samples across {n_clients} clients"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed));
    let base = n / n_clients;
    let extra = n % n_clients;
    let mut shards = Vec::with_capacity(n_clients);
    let mut start = 0;
    for i in 0..n_clients {
        let size = base + usize::from(i < extra);
        let mut shard = order[start..start + size].to_vec();
        shard.sort_unstable();
        shards.push(shard);
        start += size;
    }
    Ok(shards)
}

pub fn partition_disjoint(
    dataset: &LabeledDataset,
    n_clients: usize,
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    Ok(partition_indices(dataset.len(), n_clients, seed)?
        .iter()
        .map(|shard| dataset.subset(shard))
        .collect())
}

/// One shadow dataset: a seen (train) and an unseen (test) split.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowDataset {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Positions of the train rows in the master dataset.
    pub train_indices: Vec<usize>,
    /// Positions of the test rows in the master dataset.
    pub test_indices: Vec<usize>,
}

impl ShadowDataset {
    /// Builds a shadow dataset from explicit splits.
    pub fn from_splits(train: LabeledDataset, test: LabeledDataset) -> Self {
        let n_train = train.len();
        ShadowDataset {
            train_indices: (0..n_train).collect(),
            test_indices: (n_train..n_train + test.len()).collect(),
            train,
            test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Attempts per shadow at drawing an index set not used by an earlier shadow.
const DISTINCT_ATTEMPTS: u64 = 64;

/// Draws `k` shadow datasets from `master`.
///
/// Each shadow samples `shadow_size` rows without replacement, so shadows may
/// overlap with each other but never contain a row twice. The first
/// `round(train_fraction * shadow_size)` sampled rows form the train split.
pub fn sample_shadow_datasets(
    master: &LabeledDataset,
    k: usize,
    shadow_size: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<Vec<ShadowDataset>> {
    if k == 0 {
        return Err(Error::input("need at least one shadow dataset"));
    }
    if shadow_size == 0 || shadow_size > master.len() {
        return Err(Error::input(format!(
            "shadow size {shadow_size} must be in 1..={}",
            master.len()
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::input(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let n_train = (train_fraction * shadow_size as f64).round() as usize;
    let mut seen_sets: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let shadow_seed = derive_seed(seed, Stream::ShadowSample, i as u64);
        let mut picked = Vec::new();
        for attempt in 0..DISTINCT_ATTEMPTS {
            let mut rng = rng_from(derive_seed(shadow_seed, Stream::ShadowSample, attempt));
            picked = index::sample(&mut rng, master.len(), shadow_size).into_vec();
            let mut sorted = picked.clone();
            sorted.sort_unstable();
            // only an exhausted tiny master can force a repeat
            if !seen_sets.contains(&sorted) || attempt + 1 == DISTINCT_ATTEMPTS {
                seen_sets.push(sorted);
                break;
            }
        }
        let (train_idx, test_idx) = picked.split_at(n_train);
        out.push(ShadowDataset {
            train: master.subset(train_idx),
            test: master.subset(test_idx),
            train_indices: train_idx.to_vec(),
            test_indices: test_idx.to_vec(),
        });
    }
    Ok(out)
}
