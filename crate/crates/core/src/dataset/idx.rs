use std::fs;
use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, field: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format(field, "file is truncated inside the header"))
}

fn payload<'a>(bytes: &'a [u8], header: usize, len: usize, field: &str) -> Result<&'a [u8]> {
    let have = bytes.len() - header;
    if have < len {
        return Err(Error::format(
            field,
            format!("file is truncated: expected {len} data bytes, found {have}"),
        ));
    }
    if have > len {
        return Err(Error::format(
            field,
            format!("{} unexpected bytes after the data", have - len),
        ));
    }
    Ok(&bytes[header..])
}

/// Reads an IDX image file (`0x00000803`) and its label file (`0x00000801`).
/// Pixels are scaled by 1/255; the class count is the largest label plus one.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let images = fs::read(images_path)?;
    let labels = fs::read(labels_path)?;

    let magic = be_u32(&images, 0, "images.magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(
            "images.magic",
            format!("expected 0x{IMAGES_MAGIC:08x}, found 0x{magic:08x}"),
        ));
    }
    let n_images = be_u32(&images, 4, "images.count")? as usize;
    let rows = be_u32(&images, 8, "images.rows")? as usize;
    let cols = be_u32(&images, 12, "images.cols")? as usize;
    let dim = rows * cols;

    let magic = be_u32(&labels, 0, "labels.magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(
            "labels.magic",
            format!("expected 0x{LABELS_MAGIC:08x}, found 0x{magic:08x}"),
        ));
    }
    let n_labels = be_u32(&labels, 4, "labels.count")? as usize;
    if n_images != n_labels {
        return Err(Error::format(
            "count",
            format!("{n_images} images but {n_labels} labels"),
        ));
    }

    let pixels = payload(&images, 16, n_images * dim, "images.data")?;
    let label_bytes = payload(&labels, 8, n_labels, "labels.data")?;

    let data = pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let features = Tensor::from_vec(n_images, dim, data)?;
    let labels: Vec<usize> = label_bytes.iter().map(|&b| usize::from(b)).collect();
    let class_count = labels.iter().max().map_or(1, |m| m + 1);
    LabeledDataset::new(features, labels, class_count)
}

/// Writes `dataset` as an IDX pair with image shape `1 x dim`. Features are
/// quantized to bytes by `round(255 x)` after clipping to `[0, 1]`.
pub fn write_idx(
    dataset: &LabeledDataset,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    if dataset.class_count() > 256 {
        return Err(Error::input("IDX labels hold at most 256 classes"));
    }
    let n = dataset.len() as u32;
    let mut images = Vec::with_capacity(16 + dataset.len() * dataset.dim());
    images.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&n.to_be_bytes());
    images.extend_from_slice(&1u32.to_be_bytes());
    images.extend_from_slice(&(dataset.dim() as u32).to_be_bytes());
    images.extend(
        dataset
            .features()
            .data()
            .iter()
            .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8),
    );

    let mut labels = Vec::with_capacity(8 + dataset.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    labels.extend(dataset.labels().iter().map(|&l| l as u8));

    fs::write(images_path, images)?;
    fs::write(labels_path, labels)?;
    Ok(())
}
