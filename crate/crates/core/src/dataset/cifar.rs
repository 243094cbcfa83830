use std::fs;
use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const PIXELS: usize = 3072;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarVariant {
    /// 1 label byte + 3072 pixel bytes, 10 classes.
    Cifar10,
    /// coarse label byte + fine label byte + 3072 pixel bytes; the fine label (100 classes) is used.
    Cifar100,
}

impl CifarVariant {
    fn label_bytes(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 1,
            CifarVariant::Cifar100 => 2,
        }
    }

    pub fn class_count(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 10,
            CifarVariant::Cifar100 => 100,
        }
    }

    pub fn record_size(self) -> usize {
        self.label_bytes() + PIXELS
    }
}

/// Concatenates the records of every file in `paths`.
pub fn load_cifar_binary<P: AsRef<Path>>(paths: &[P], variant: CifarVariant) -> Result<LabeledDataset> {
    let record = variant.record_size();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        if bytes.len() % record != 0 {
            return Err(Error::format(
                format!("record ({})", path.display()),
                format!(
                    "file length {} is not a multiple of the {record}-byte record",
                    bytes.len()
                ),
            ));
        }
        for rec in bytes.chunks_exact(record) {
            let label = usize::from(rec[variant.label_bytes() - 1]);
            if label >= variant.class_count() {
                return Err(Error::format(
                    format!("label ({})", path.display()),
                    format!("label {label} out of range for {} classes", variant.class_count()),
                ));
            }
            labels.push(label);
            data.extend(rec[variant.label_bytes()..].iter().map(|&b| f64::from(b) / 255.0));
        }
    }
    let features = Tensor::from_vec(labels.len(), PIXELS, data)?;
    LabeledDataset::new(features, labels, variant.class_count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cifar10_record() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("batch.bin");
        let mut rec = vec![7u8];
        rec.extend(std::iter::repeat_n(255u8, PIXELS));
        fs::write(&p, &rec).unwrap();
        let d = load_cifar_binary(&[&p], CifarVariant::Cifar10).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.dim(), 3072);
        assert_eq!(d.labels(), &[7]);
        assert!(d.features().data().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn cifar100_uses_fine_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.bin");
        let mut rec = vec![3u8, 57u8];
        rec.extend(std::iter::repeat_n(0u8, PIXELS));
        rec.extend_from_slice(&[19u8, 99u8]);
        rec.extend(std::iter::repeat_n(51u8, PIXELS));
        fs::write(&p, &rec).unwrap();
        let d = load_cifar_binary(&[&p], CifarVariant::Cifar100).unwrap();
        assert_eq!(d.labels(), &[57, 99]);
        assert_eq!(d.class_count(), 100);
        assert!((d.features().get(1, 0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("short.bin");
        fs::write(&p, vec![1u8; 3000]).unwrap();
        let err = load_cifar_binary(&[&p], CifarVariant::Cifar10).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn out_of_range_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        let mut rec = vec![10u8];
        rec.extend(std::iter::repeat_n(0u8, PIXELS));
        fs::write(&p, &rec).unwrap();
        assert!(load_cifar_binary(&[&p], CifarVariant::Cifar10).is_err());
    }
}
