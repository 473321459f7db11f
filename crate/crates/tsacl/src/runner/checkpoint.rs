//! Checkpoint persistence. Layout:
//!
//!   bytes 0..8    magic "TSACLCK1"
//!   bytes 8..12   format version, u32 little-endian
//!   bytes 12..16  metadata length M, u32 little-endian
//!   bytes 16..16+M  metadata JSON (UTF-8)
//!   ...           matrices as f64 little-endian, row-major, in the
//!                 order declared by the metadata
//!   last 4 bytes  CRC-32 of everything before it, u32 little-endian
//!
//! A checkpoint carries only model state: per member the d_E×d_E inverse
//! correlation and the d_E×D_t weights, plus the seeds and specs needed
//! to rebuild the frozen encoder and expansions. No samples, labels, or
//! embeddings are ever written.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderSpec, Normalization};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TSACLCK1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderDescriptor {
    Random {
        spec: EncoderSpec,
        in_channels: usize,
    },
    Precomputed {
        feature_dim: usize,
    },
}

/// Everything needed to regenerate the member projections: Φ^E is drawn
/// from (seed, d_stack, d_e, sigma), never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionDescriptor {
    pub d_stack: usize,
    pub d_e: usize,
    pub sigma: f64,
    pub member_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub run_seed: u64,
    pub gamma: f64,
    pub registry: Vec<u32>,
    pub tasks_seen: usize,
    pub normalization: Normalization,
    pub standardize_pre_expansion: bool,
    pub encoder: EncoderDescriptor,
    pub expansion: ExpansionDescriptor,
    /// Declared payload order; filled in at save time.
    pub matrices: Vec<MatrixInfo>,
}

/// One member's persisted matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberMatrices {
    pub inverse_correlation: Array2<f64>,
    pub weights: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointContents {
    pub meta: CheckpointMeta,
    pub members: Vec<MemberMatrices>,
}

pub(crate) fn member_matrix_infos(members: &[MemberMatrices]) -> Vec<MatrixInfo> {
    members
        .iter()
        .enumerate()
        .flat_map(|(i, m)| {
            [
                MatrixInfo {
                    name: format!("member{i}.inverse_correlation"),
                    rows: m.inverse_correlation.nrows(),
                    cols: m.inverse_correlation.ncols(),
                },
                MatrixInfo {
                    name: format!("member{i}.weights"),
                    rows: m.weights.nrows(),
                    cols: m.weights.ncols(),
                },
            ]
        })
        .collect()
}

pub fn save_checkpoint(contents: &CheckpointContents, path: &Path) -> Result<()> {
    if contents.members.is_empty() {
        return Err(Error::EmptyInput("checkpoint members".into()));
    }
    if contents.members.len() != contents.meta.expansion.member_seeds.len() {
        return Err(Error::LengthMismatch {
            context: "checkpoint members vs member seeds".into(),
            left: contents.members.len(),
            right: contents.meta.expansion.member_seeds.len(),
        });
    }
    let mut meta = contents.meta.clone();
    meta.matrices = member_matrix_infos(&contents.members);
    let meta_json = serde_json::to_vec(&meta).expect("metadata serializes");

    let mut bytes = Vec::new();
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&meta_json);
    for member in &contents.members {
        for matrix in [&member.inverse_correlation, &member.weights] {
            for &v in matrix.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());

    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<CheckpointContents> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    // Validation order: magic, version, structure, checksum. A version
    // bump therefore reports as such even though it also breaks the CRC.
    if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    if bytes.len() < 16 {
        return Err(Error::Truncated(path.to_path_buf()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let meta_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let payload_start = 16 + meta_len;
    if bytes.len() < payload_start {
        return Err(Error::Truncated(path.to_path_buf()));
    }
    let meta: CheckpointMeta =
        serde_json::from_slice(&bytes[16..payload_start]).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;

    let payload_values: usize = meta.matrices.iter().map(|m| m.rows * m.cols).sum();
    let expected_len = payload_start + payload_values * 8 + 4;
    if bytes.len() < expected_len {
        return Err(Error::Truncated(path.to_path_buf()));
    }
    if bytes.len() > expected_len {
        // Trailing bytes the format does not account for.
        return Err(Error::ChecksumMismatch(path.to_path_buf()));
    }
    let stored_crc = u32::from_le_bytes(bytes[expected_len - 4..].try_into().unwrap());
    let actual_crc = crc32fast::hash(&bytes[..expected_len - 4]);
    if stored_crc != actual_crc {
        return Err(Error::ChecksumMismatch(path.to_path_buf()));
    }

    if meta.matrices.len() != 2 * meta.expansion.member_seeds.len() {
        return Err(Error::LengthMismatch {
            context: "checkpoint matrices vs member count".into(),
            left: meta.matrices.len(),
            right: 2 * meta.expansion.member_seeds.len(),
        });
    }

    let mut offset = payload_start;
    let mut read_matrix = |info: &MatrixInfo| -> Array2<f64> {
        let count = info.rows * info.cols;
        let values: Vec<f64> = bytes[offset..offset + count * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        offset += count * 8;
        Array2::from_shape_vec((info.rows, info.cols), values).expect("length matches shape")
    };
    let members: Vec<MemberMatrices> = meta
        .matrices
        .chunks(2)
        .map(|pair| MemberMatrices {
            inverse_correlation: read_matrix(&pair[0]),
            weights: read_matrix(&pair[1]),
        })
        .collect();
    Ok(CheckpointContents { meta, members })
}
