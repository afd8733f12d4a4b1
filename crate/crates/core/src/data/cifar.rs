//! CIFAR-10 binary batches, converted to greyscale.
//!
//! Each record is 3073 bytes: one label byte, then the 32×32 red, green and
//! blue planes. Pixels become `0.299 R + 0.587 G + 0.114 B`, scaled to [0, 1].

use std::path::{Path, PathBuf};

use super::{DataSource, LabeledDataset, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::nn::Sample;

const PLANE: usize = 32 * 32;
const RECORD: usize = 1 + 3 * PLANE;

pub fn parse_cifar10(bytes: &[u8]) -> Result<Vec<Sample>> {
    if !bytes.len().is_multiple_of(RECORD) {
        return Err(Error::Truncated {
            what: "CIFAR-10 batch",
            needed: (bytes.len() / RECORD + 1) * RECORD,
            found: bytes.len(),
        });
    }
    bytes
        .chunks_exact(RECORD)
        .map(|rec| {
            let label = rec[0] as usize;
            if label >= CLASS_COUNT {
                return Err(Error::CountMismatch(format!(
                    "CIFAR-10 label byte {label} out of range"
                )));
            }
            let (r, rest) = rec[1..].split_at(PLANE);
            let (g, b) = rest.split_at(PLANE);
            let features = (0..PLANE)
                .map(|i| {
                    let y = 0.299 * r[i] as f64 + 0.587 * g[i] as f64 + 0.114 * b[i] as f64;
                    ((y / 255.0) as f32).clamp(0.0, 1.0)
                })
                .collect();
            Ok(Sample::new(features, label))
        })
        .collect()
}

/// Concatenates the given batch files in order.
pub fn load_cifar10(batch_paths: &[PathBuf]) -> Result<LabeledDataset> {
    let mut samples = Vec::new();
    for path in batch_paths {
        samples.extend(parse_cifar10(&read(path)?)?);
    }
    LabeledDataset::new(samples, DataSource::Cifar10, CLASS_COUNT)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingData(path.to_path_buf()));
    }
    std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(label: u8, r: u8, g: u8, b: u8) -> Vec<u8> {
        let mut rec = vec![label];
        rec.extend(std::iter::repeat_n(r, PLANE));
        rec.extend(std::iter::repeat_n(g, PLANE));
        rec.extend(std::iter::repeat_n(b, PLANE));
        rec
    }

    #[test]
    fn grey_input_is_preserved() {
        let s = parse_cifar10(&record(8, 128, 128, 128)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].label, 8);
        assert_eq!(s[0].features.len(), 1024);
        assert!(s[0].features.iter().all(|&v| v == 128.0f32 / 255.0));
        let white = parse_cifar10(&record(0, 255, 255, 255)).unwrap();
        assert!(white[0].features.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn luminance_weights() {
        let s = parse_cifar10(&record(1, 255, 0, 0)).unwrap();
        assert!((s[0].features[0] - 0.299).abs() < 1e-6);
        let s = parse_cifar10(&record(1, 0, 0, 255)).unwrap();
        assert!((s[0].features[5] - 0.114).abs() < 1e-6);
    }

    #[test]
    fn record_size_mismatch() {
        let mut bytes = record(2, 1, 2, 3);
        bytes.pop();
        assert!(matches!(
            parse_cifar10(&bytes),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn batches_concatenate() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("data_batch_1.bin");
        let b = dir.path().join("data_batch_2.bin");
        std::fs::write(&a, [record(3, 0, 0, 0), record(4, 9, 9, 9)].concat()).unwrap();
        std::fs::write(&b, record(5, 1, 1, 1)).unwrap();
        let ds = load_cifar10(&[a, b]).unwrap();
        let labels: Vec<usize> = ds.samples.iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![3, 4, 5]);
        assert_eq!(ds.source, DataSource::Cifar10);
    }
}
