use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{checkpoint, forward, ModelParams, Tensor};

/// Query access to a classifier: class probabilities for a batch of inputs.
///
/// This is the only view of a target model the attack code accepts.
pub trait PredictionOracle: Sync {
    fn input_dim(&self) -> usize;

    fn class_count(&self) -> usize;

    /// Probability rows for each row of `batch`.
    fn predict(&self, batch: &Tensor) -> Result<Tensor>;
}

/// A trained model sealed behind [`PredictionOracle`].
///
/// The weights go in at construction and cannot be read back out.
pub struct TargetModel {
    params: ModelParams,
}

impl TargetModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        if params.layers.is_empty() {
            return Err(Error::shape("target model has no layers"));
        }
        Ok(TargetModel { params })
    }

    pub fn from_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        TargetModel::new(checkpoint::load(path)?)
    }
}

impl PredictionOracle for TargetModel {
    fn input_dim(&self) -> usize {
        self.params.input_dim()
    }

    fn class_count(&self) -> usize {
        self.params.output_dim()
    }

    fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        forward(&self.params, batch)
    }
}

impl std::fmt::Debug for TargetModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetModel")
            .field("input_dim", &self.input_dim())
            .field("class_count", &self.class_count())
            .finish_non_exhaustive()
    }
}
