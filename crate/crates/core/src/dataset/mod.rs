//! Labeled datasets: loaders for IDX and CIFAR binaries, a synthetic Gaussian
//! source, disjoint client partitioning and shadow-dataset sampling.

mod cifar;
mod idx;
mod split;
mod synthetic;

use std::path::PathBuf;

pub use cifar::{load_cifar_binary, CifarVariant};
pub use idx::{load_idx, write_idx};
pub use split::{partition_disjoint, partition_indices, sample_shadow_datasets, ShadowDataset};
pub use synthetic::{synthesize_gaussian, GaussianSpec};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Tensor,
    labels: Vec<usize>,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(features: Tensor, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::shape(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::input(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(LabeledDataset {
            features,
            labels,
            class_count,
        })
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    /// Contiguous row range `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> LabeledDataset {
        let idx: Vec<usize> = (start..end).collect();
        self.subset(&idx)
    }
}

/// Where the data of an experiment comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Cifar {
        variant: CifarVariant,
        paths: Vec<PathBuf>,
    },
    SyntheticGaussian(GaussianSpec),
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::SyntheticGaussian(g) => g.validate(),
            DistributionSpec::Cifar { paths, .. } if paths.is_empty() => {
                Err(Error::config("CIFAR source needs at least one file"))
            }
            _ => Ok(()),
        }
    }

    /// Loads a file-backed source. Synthetic sources return `None`; they are
    /// drawn per seed with [`synthesize_gaussian`].
    pub fn load(&self) -> Result<Option<LabeledDataset>> {
        match self {
            DistributionSpec::Idx { images, labels } => load_idx(images, labels).map(Some),
            DistributionSpec::Cifar { variant, paths } => load_cifar_binary(paths, *variant).map(Some),
            DistributionSpec::SyntheticGaussian(_) => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_checks_labels() {
        let f = Tensor::zeros(2, 3);
        assert!(LabeledDataset::new(f.clone(), vec![0], 2).is_err());
        assert!(LabeledDataset::new(f.clone(), vec![0, 2], 2).is_err());
        let d = LabeledDataset::new(f, vec![0, 1], 2).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.subset(&[1]).labels(), &[1]);
    }
}
