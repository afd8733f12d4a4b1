//! MNIST IDX files (big-endian), optionally gzip-compressed.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{DataSource, LabeledDataset, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::nn::Sample;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &'static str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Truncated {
            what,
            needed: at + 4,
            found: bytes.len(),
        })
}

/// Returns `(rows·cols, pixels scaled to [0, 1])` per image.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, Vec<Vec<f32>>)> {
    let what = "IDX image file";
    let magic = be_u32(bytes, 0, what)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::BadMagic {
            what,
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, what)? as usize;
    let rows = be_u32(bytes, 8, what)? as usize;
    let cols = be_u32(bytes, 12, what)? as usize;
    let dim = rows * cols;
    let needed = 16 + count * dim;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            what,
            needed,
            found: bytes.len(),
        });
    }
    let images = bytes[16..needed]
        .chunks_exact(dim.max(1))
        .take(count)
        .map(|px| px.iter().map(|&b| b as f32 / 255.0).collect())
        .collect();
    Ok((dim, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let what = "IDX label file";
    let magic = be_u32(bytes, 0, what)?;
    if magic != LABEL_MAGIC {
        return Err(Error::BadMagic {
            what,
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4, what)? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            what,
            needed,
            found: bytes.len(),
        });
    }
    Ok(bytes[8..needed].iter().map(|&b| b as usize).collect())
}

pub fn parse_mnist(image_bytes: &[u8], label_bytes: &[u8]) -> Result<LabeledDataset> {
    let (_, images) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if images.len() != labels.len() {
        return Err(Error::CountMismatch(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    let samples = images
        .into_iter()
        .zip(labels)
        .map(|(x, y)| Sample::new(x, y))
        .collect();
    LabeledDataset::new(samples, DataSource::Mnist, CLASS_COUNT)
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    for p in [images_path, labels_path] {
        if !p.exists() {
            return Err(Error::MissingData(p.to_path_buf()));
        }
    }
    parse_mnist(&read_file(images_path)?, &read_file(labels_path)?)
}
