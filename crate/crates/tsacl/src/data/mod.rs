//! Dataset representation, binary file ingestion, synthetic data
//! generation with per-subject sub-clusters, and class-incremental task
//! stream construction.

pub mod io;
pub mod stream;
pub mod synthetic;

pub use io::{load_dataset, load_feature_matrix, load_labels, write_dataset, write_features, Manifest};
pub use stream::{build_task_stream, build_task_stream_from_labels, TaskSpec, TaskStream};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    /// Basename stem of the split's files inside a dataset directory.
    pub fn stem(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// A labeled multivariate time-series collection with fixed channel count
/// and length. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    samples: Array3<f32>,
    labels: Vec<u32>,
    num_classes: u32,
    split: Split,
}

impl TimeSeriesDataset {
    /// Every label must be in `0..num_classes`; a train split must also
    /// contain every class at least once.
    pub fn new(
        samples: Array3<f32>,
        labels: Vec<u32>,
        num_classes: u32,
        split: Split,
    ) -> Result<Self> {
        let n = samples.shape()[0];
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                context: "dataset samples vs labels".into(),
                left: n,
                right: labels.len(),
            });
        }
        if num_classes == 0 {
            return Err(Error::InvalidSpec("num_classes must be positive".into()));
        }
        for (index, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    index,
                    label,
                    num_classes,
                });
            }
        }
        if split == Split::Train {
            let mut seen = vec![false; num_classes as usize];
            for &label in &labels {
                seen[label as usize] = true;
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(Error::InvalidSpec(format!(
                    "train split contains no sample of class {missing}"
                )));
            }
        }
        Ok(TimeSeriesDataset {
            samples,
            labels,
            num_classes,
            split,
        })
    }

    pub fn samples(&self) -> &Array3<f32> {
        &self.samples
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn num_samples(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.samples.shape()[1]
    }

    pub fn length(&self) -> usize {
        self.samples.shape()[2]
    }
}
