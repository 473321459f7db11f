//! Bit-exact dataset directory ingestion and emission.
//!
//! Directory layout:
//!   manifest.json                  channel/length/class/count metadata
//!   train.bin, test.bin            f32 little-endian, sample-major [N][C][L]
//!   train_labels.bin, test_labels.bin  u32 little-endian, length N
//!   train_feat.bin, test_feat.bin  optional precomputed [N][feature_dim]

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{Split, TimeSeriesDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub channels: usize,
    pub length: usize,
    pub num_classes: u32,
    pub train_n: usize,
    pub test_n: usize,
    pub dtype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_dim: Option<usize>,
}

impl Manifest {
    pub fn load(root: &Path) -> Result<Manifest> {
        let path = root.join("manifest.json");
        let bytes = read_file(&path)?;
        let manifest: Manifest =
            serde_json::from_slice(&bytes).map_err(|e| Error::Manifest {
                path: path.clone(),
                detail: e.to_string(),
            })?;
        if manifest.dtype != "f32le" {
            return Err(Error::Manifest {
                path,
                detail: format!("unsupported dtype {:?}, expected \"f32le\"", manifest.dtype),
            });
        }
        if manifest.channels == 0 || manifest.length == 0 || manifest.num_classes == 0 {
            return Err(Error::Manifest {
                path,
                detail: "channels, length, and num_classes must be positive".into(),
            });
        }
        Ok(manifest)
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let path = root.join("manifest.json");
        let mut body = serde_json::to_string_pretty(self).expect("manifest serializes");
        body.push('\n');
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }

    fn split_n(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train_n,
            Split::Test => self.test_n,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    match fs::read(path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Read a file that must contain exactly `count` little-endian f32 values.
fn read_f32_exact(path: &Path, count: usize) -> Result<Vec<f32>> {
    let bytes = read_file(path)?;
    let expected = count as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(Error::ByteCountMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

fn read_u32_exact(path: &Path, count: usize) -> Result<Vec<u32>> {
    let bytes = read_file(path)?;
    let expected = count as u64 * 4;
    if bytes.len() as u64 != expected {
        return Err(Error::ByteCountMismatch {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

fn write_f32_le(path: &Path, values: impl Iterator<Item = f32>) -> Result<()> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_u32_le(path: &Path, values: &[u32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn tensor_path(root: &Path, split: Split) -> PathBuf {
    root.join(format!("{}.bin", split.stem()))
}

fn labels_path(root: &Path, split: Split) -> PathBuf {
    root.join(format!("{}_labels.bin", split.stem()))
}

fn features_path(root: &Path, split: Split) -> PathBuf {
    root.join(format!("{}_feat.bin", split.stem()))
}

/// Load one split of a dataset directory, verifying every byte count
/// against the manifest.
pub fn load_dataset(root: &Path, split: Split) -> Result<TimeSeriesDataset> {
    let manifest = Manifest::load(root)?;
    let n = manifest.split_n(split);
    let values = read_f32_exact(
        &tensor_path(root, split),
        n * manifest.channels * manifest.length,
    )?;
    let samples = Array3::from_shape_vec((n, manifest.channels, manifest.length), values)
        .expect("length verified against shape");
    let labels = read_u32_exact(&labels_path(root, split), n)?;
    TimeSeriesDataset::new(samples, labels, manifest.num_classes, split)
}

/// Write both splits of a dataset as a fresh directory. Round-trips
/// byte-for-byte with `load_dataset`.
pub fn write_dataset(root: &Path, train: &TimeSeriesDataset, test: &TimeSeriesDataset) -> Result<()> {
    if train.channels() != test.channels() || train.length() != test.length() {
        return Err(Error::InvalidSpec(
            "train and test splits disagree on sample shape".into(),
        ));
    }
    if train.num_classes() != test.num_classes() {
        return Err(Error::InvalidSpec(
            "train and test splits disagree on num_classes".into(),
        ));
    }
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let manifest = Manifest {
        channels: train.channels(),
        length: train.length(),
        num_classes: train.num_classes(),
        train_n: train.num_samples(),
        test_n: test.num_samples(),
        dtype: "f32le".into(),
        feature_dim: None,
    };
    manifest.save(root)?;
    for ds in [train, test] {
        let split = ds.split();
        write_f32_le(&tensor_path(root, split), ds.samples().iter().copied())?;
        write_u32_le(&labels_path(root, split), ds.labels())?;
    }
    Ok(())
}

/// Add precomputed feature files to an existing dataset directory and
/// record `feature_dim` in its manifest.
pub fn write_features(
    root: &Path,
    train: ArrayView2<'_, f32>,
    test: ArrayView2<'_, f32>,
) -> Result<()> {
    let mut manifest = Manifest::load(root)?;
    if train.nrows() != manifest.train_n || test.nrows() != manifest.test_n {
        return Err(Error::LengthMismatch {
            context: "feature rows vs manifest sample counts".into(),
            left: train.nrows(),
            right: manifest.train_n,
        });
    }
    if train.ncols() != test.ncols() {
        return Err(Error::DimensionMismatch {
            context: "train vs test feature width".into(),
            expected: train.ncols(),
            actual: test.ncols(),
        });
    }
    manifest.feature_dim = Some(train.ncols());
    manifest.save(root)?;
    write_f32_le(&features_path(root, Split::Train), train.iter().copied())?;
    write_f32_le(&features_path(root, Split::Test), test.iter().copied())?;
    Ok(())
}

/// Read one split's labels alone, for feature-only directories where the
/// raw tensors are absent.
pub fn load_labels(root: &Path, split: Split) -> Result<Vec<u32>> {
    let manifest = Manifest::load(root)?;
    let labels = read_u32_exact(&labels_path(root, split), manifest.split_n(split))?;
    for (index, &label) in labels.iter().enumerate() {
        if label >= manifest.num_classes {
            return Err(Error::LabelOutOfRange {
                index,
                label,
                num_classes: manifest.num_classes,
            });
        }
    }
    Ok(labels)
}

/// Read one split's precomputed feature matrix bit-exactly.
pub fn load_feature_matrix(root: &Path, split: Split) -> Result<Array2<f32>> {
    let manifest = Manifest::load(root)?;
    let dim = manifest.feature_dim.ok_or_else(|| Error::Manifest {
        path: root.join("manifest.json"),
        detail: "missing feature_dim field".into(),
    })?;
    let n = manifest.split_n(split);
    let values = read_f32_exact(&features_path(root, split), n * dim)?;
    Ok(Array2::from_shape_vec((n, dim), values).expect("length verified against shape"))
}
