//! Frozen feature extraction: a seeded random multi-scale 1D-convolution
//! encoder and a loader for externally computed features. Each included
//! block contributes its time-averaged activation map; the fused vector
//! concatenates those averages in ascending block order.

use std::path::Path;

use ndarray::{Array2, ArrayView2, ArrayView3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{self, Split};
use crate::error::{Error, Result};
use crate::exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlockSpec {
    pub out_channels: usize,
    /// Odd, so "same" padding keeps the time axis length.
    pub kernel_size: usize,
    /// Non-overlapping max-pool window; a block halves time at pool 2.
    pub pool: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    pub blocks: Vec<ConvBlockSpec>,
    pub seed: u64,
    /// Block indices fused into the output; `None` means all blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_layers: Option<Vec<usize>>,
}

impl EncoderSpec {
    /// Four blocks, channels (32, 64, 128, 256), kernels (7, 5, 3, 3),
    /// pool 2 each, all blocks fused: d_stack = 480.
    pub fn desk_default(seed: u64) -> EncoderSpec {
        let blocks = [(32, 7), (64, 5), (128, 3), (256, 3)]
            .into_iter()
            .map(|(out_channels, kernel_size)| ConvBlockSpec {
                out_channels,
                kernel_size,
                pool: 2,
            })
            .collect();
        EncoderSpec {
            blocks,
            seed,
            include_layers: None,
        }
    }

    /// Included block indices, ascending and deduplicated.
    pub fn included(&self) -> Vec<usize> {
        match &self.include_layers {
            None => (0..self.blocks.len()).collect(),
            Some(v) => {
                let mut v = v.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }

    pub fn d_stack(&self) -> usize {
        self.included()
            .iter()
            .map(|&k| self.blocks[k].out_channels)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidSpec("encoder needs at least one block".into()));
        }
        for (k, block) in self.blocks.iter().enumerate() {
            if block.out_channels == 0 {
                return Err(Error::InvalidSpec(format!(
                    "block {k}: out_channels must be positive"
                )));
            }
            if block.kernel_size == 0 || block.kernel_size % 2 == 0 {
                return Err(Error::InvalidSpec(format!(
                    "block {k}: kernel_size must be odd, got {}",
                    block.kernel_size
                )));
            }
            if block.pool == 0 {
                return Err(Error::InvalidSpec(format!(
                    "block {k}: pool must be at least 1"
                )));
            }
        }
        let included = self.included();
        if included.is_empty() {
            return Err(Error::InvalidSpec("include_layers must be non-empty".into()));
        }
        if let Some(&bad) = included.iter().find(|&&k| k >= self.blocks.len()) {
            return Err(Error::InvalidSpec(format!(
                "include_layers index {bad} out of range for {} blocks",
                self.blocks.len()
            )));
        }
        Ok(())
    }
}

/// Input normalization applied per sample before the first block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Zero mean, unit variance across all C·L values of the sample.
    PerSample,
    /// Zero mean, unit variance within each channel row.
    PerChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    RandomEncoder { seed: u64 },
    Precomputed,
}

/// Row-per-sample fused feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub features: Array2<f32>,
    pub provenance: Provenance,
}

impl FeatureStack {
    pub fn d_stack(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_samples(&self) -> usize {
        self.features.nrows()
    }
}

/// One block's frozen state: weights flattened to [out_channels × in·k]
/// so the convolution runs as a patch-matrix product.
#[derive(Debug, Clone)]
struct BlockWeights {
    weights: Array2<f32>,
    in_channels: usize,
    kernel_size: usize,
    pool: usize,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    spec: EncoderSpec,
    in_channels: usize,
    blocks: Vec<BlockWeights>,
}

/// Sample convolution weights from a seeded normal scaled by 1/√fan_in,
/// no biases. The draw order is fixed (block, then out, in, tap), so a
/// spec+seed pair always rebuilds identical weights.
pub fn build_random_encoder(spec: &EncoderSpec, in_channels: usize) -> Result<Encoder> {
    spec.validate()?;
    if in_channels == 0 {
        return Err(Error::InvalidSpec("in_channels must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut blocks = Vec::with_capacity(spec.blocks.len());
    let mut current_in = in_channels;
    for block in &spec.blocks {
        let fan_in = current_in * block.kernel_size;
        let scale = 1.0 / (fan_in as f64).sqrt();
        let mut values = Vec::with_capacity(block.out_channels * fan_in);
        for _ in 0..block.out_channels * fan_in {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push((z * scale) as f32);
        }
        blocks.push(BlockWeights {
            weights: Array2::from_shape_vec((block.out_channels, fan_in), values)
                .expect("length matches shape"),
            in_channels: current_in,
            kernel_size: block.kernel_size,
            pool: block.pool,
        });
        current_in = block.out_channels;
    }
    Ok(Encoder {
        spec: spec.clone(),
        in_channels,
        blocks,
    })
}

fn normalize_sample(sample: &mut Array2<f32>, normalization: Normalization) {
    match normalization {
        Normalization::None => {}
        Normalization::PerSample => standardize(sample.as_slice_mut().unwrap()),
        Normalization::PerChannel => {
            for mut row in sample.rows_mut() {
                standardize(row.as_slice_mut().unwrap());
            }
        }
    }
}

/// Z-score every row of a feature matrix independently. Stateless, so it
/// is safe under class-incremental arrival (no statistics carry across
/// tasks).
pub fn standardize_rows(features: &mut Array2<f32>) {
    for mut row in features.rows_mut() {
        standardize(row.as_slice_mut().unwrap());
    }
}

/// In-place z-score; a constant slice becomes all zeros.
fn standardize(values: &mut [f32]) {
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let denom = if var > 0.0 { var.sqrt() } else { 1.0 };
    for v in values.iter_mut() {
        *v = ((*v as f64 - mean) / denom) as f32;
    }
}

/// Same-padded convolution as weights · patch-matrix, then ReLU, then
/// non-overlapping max-pool (a tail shorter than the window is dropped;
/// inputs shorter than the window form a single window).
fn block_forward(block: &BlockWeights, input: &Array2<f32>) -> Array2<f32> {
    let length = input.ncols();
    let k = block.kernel_size;
    let pad = (k - 1) / 2;
    let mut patches = Array2::<f32>::zeros((block.in_channels * k, length));
    for ci in 0..block.in_channels {
        for j in 0..k {
            let row = ci * k + j;
            for t in 0..length {
                let src = t as isize + j as isize - pad as isize;
                if src >= 0 && (src as usize) < length {
                    patches[(row, t)] = input[(ci, src as usize)];
                }
            }
        }
    }
    let mut out = block.weights.dot(&patches);
    out.mapv_inplace(|v| v.max(0.0));

    let windows = (length / block.pool).max(1);
    let mut pooled = Array2::<f32>::zeros((out.nrows(), windows));
    for ch in 0..out.nrows() {
        for w in 0..windows {
            let start = w * block.pool;
            let end = ((w + 1) * block.pool).min(length);
            let mut best = f32::NEG_INFINITY;
            for t in start..end {
                best = best.max(out[(ch, t)]);
            }
            pooled[(ch, w)] = best;
        }
    }
    pooled
}

impl Encoder {
    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn d_stack(&self) -> usize {
        self.spec.d_stack()
    }

    fn encode_sample(&self, sample: ArrayView2<'_, f32>, normalization: Normalization) -> Vec<f32> {
        let included = self.spec.included();
        let mut x = sample.to_owned();
        normalize_sample(&mut x, normalization);
        let mut fused = Vec::with_capacity(self.d_stack());
        for (k, block) in self.blocks.iter().enumerate() {
            x = block_forward(block, &x);
            if included.contains(&k) {
                // Global average over the remaining time axis.
                fused.extend(x.mean_axis(Axis(1)).unwrap().iter().copied());
            }
        }
        fused
    }

    /// Encode a batch [N × C × L]; row order matches sample order. The
    /// parallel and serial builds produce bit-identical output because
    /// samples are independent.
    pub fn encode(
        &self,
        samples: ArrayView3<'_, f32>,
        normalization: Normalization,
    ) -> Result<FeatureStack> {
        self.encode_impl(samples, normalization, true)
    }

    /// Single-threaded variant used by the benchmark comparison.
    pub fn encode_serial(
        &self,
        samples: ArrayView3<'_, f32>,
        normalization: Normalization,
    ) -> Result<FeatureStack> {
        self.encode_impl(samples, normalization, false)
    }

    fn encode_impl(
        &self,
        samples: ArrayView3<'_, f32>,
        normalization: Normalization,
        parallel: bool,
    ) -> Result<FeatureStack> {
        let (n, channels, _) = samples.dim();
        if channels != self.in_channels {
            return Err(Error::ChannelMismatch {
                expected: self.in_channels,
                actual: channels,
            });
        }
        let encode_one = |i: usize| -> Result<Vec<f32>> {
            let sample = samples.index_axis(Axis(0), i);
            if let Some(bad) = sample.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("encoder input sample {i} ({bad})")));
            }
            Ok(self.encode_sample(sample, normalization))
        };
        let rows = if parallel {
            exec::map_indexed(n, encode_one)
        } else {
            exec::map_indexed_serial(n, encode_one)
        };
        let d = self.d_stack();
        let mut features = Array2::<f32>::zeros((n, d));
        for (i, row) in rows.into_iter().enumerate() {
            let row = row?;
            features.row_mut(i).assign(&ndarray::ArrayView1::from(&row[..]));
        }
        Ok(FeatureStack {
            features,
            provenance: Provenance::RandomEncoder {
                seed: self.spec.seed,
            },
        })
    }
}

/// Read a feature matrix computed by an external encoder; rejects
/// non-finite entries.
pub fn load_precomputed_features(root: &Path, split: Split) -> Result<FeatureStack> {
    let features = data::io::load_feature_matrix(root, split)?;
    if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "precomputed {} features ({bad})",
            split.stem()
        )));
    }
    Ok(FeatureStack {
        features,
        provenance: Provenance::Precomputed,
    })
}
