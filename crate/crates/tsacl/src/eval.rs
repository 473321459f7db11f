//! Continual-learning metrics: the per-task accuracy record, average
//! accuracy, forgetting, and the variance ratio of a feature representation.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower-triangular record of test accuracies.
///
/// Row `t` (0-based) holds the accuracy on each task `i <= t`, measured
/// after learning task `t`. Rows are appended as the stream progresses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new() -> Self {
        AccuracyMatrix { rows: Vec::new() }
    }

    /// Append the accuracies measured after learning the next task.
    /// Row `t` must contain exactly `t + 1` entries, all in [0, 1].
    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.rows.len() + 1 {
            return Err(Error::AccuracyMatrix(format!(
                "row {} must have {} entries, got {}",
                self.rows.len(),
                self.rows.len() + 1,
                row.len()
            )));
        }
        if let Some(bad) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::AccuracyMatrix(format!(
                "accuracy {bad} outside [0, 1]"
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = AccuracyMatrix::new();
        for row in rows {
            m.push_row(row)?;
        }
        Ok(m)
    }

    /// Number of tasks recorded so far.
    pub fn num_tasks(&self) -> usize {
        self.rows.len()
    }

    /// Accuracy on task `i` after learning task `t` (both 0-based, i <= t).
    pub fn entry(&self, t: usize, i: usize) -> Option<f64> {
        self.rows.get(t).and_then(|r| r.get(i)).copied()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Mean accuracy over tasks 0..=t after learning task `t` (0-based).
    pub fn average_accuracy(&self, t: usize) -> Result<f64> {
        let row = self
            .rows
            .get(t)
            .ok_or_else(|| Error::AccuracyMatrix(format!("row {t} not recorded")))?;
        Ok(row.iter().sum::<f64>() / row.len() as f64)
    }

    /// Forgetting after learning task `t` (0-based, requires t >= 1):
    /// the mean over past tasks of the best earlier accuracy minus the
    /// current accuracy. Negative values indicate backward transfer.
    ///
    /// The inner maximum runs over rows that actually contain task `i`,
    /// i.e. rows i..t-1; earlier rows have no entry for that task.
    pub fn forgetting(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::AccuracyMatrix(
                "forgetting requires at least two tasks".into(),
            ));
        }
        if t >= self.rows.len() {
            return Err(Error::AccuracyMatrix(format!("row {t} not recorded")));
        }
        let current = &self.rows[t];
        let mut total = 0.0;
        for (i, &current_i) in current.iter().take(t).enumerate() {
            let mut best = f64::NEG_INFINITY;
            for j in i..t {
                best = best.max(self.rows[j][i]);
            }
            total += best - current_i;
        }
        Ok(total / t as f64)
    }
}

impl Default for AccuracyMatrix {
    fn default() -> Self {
        Self::new()
    }
}

/// Fraction of exact matches between predictions and ground truth.
pub fn task_accuracy(predictions: &[u32], truth: &[u32]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("task_accuracy".into()));
    }
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            context: "task_accuracy".into(),
            left: predictions.len(),
            right: truth.len(),
        });
    }
    let hits = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Ratio of between-class scatter to within-class scatter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceRatio {
    Finite(f64),
    /// Within-class scatter is exactly zero while classes are separated.
    Unbounded,
}

impl VarianceRatio {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            VarianceRatio::Finite(v) => Some(*v),
            VarianceRatio::Unbounded => None,
        }
    }
}

impl std::fmt::Display for VarianceRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarianceRatio::Finite(v) => write!(f, "{v}"),
            VarianceRatio::Unbounded => write!(f, "unbounded"),
        }
    }
}

impl Serialize for VarianceRatio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            VarianceRatio::Finite(v) => s.serialize_f64(*v),
            VarianceRatio::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for VarianceRatio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(VarianceRatio::Finite)
                .ok_or_else(|| D::Error::custom("invalid variance ratio")),
            serde_json::Value::String(s) if s == "unbounded" => Ok(VarianceRatio::Unbounded),
            other => Err(D::Error::custom(format!("invalid variance ratio: {other}"))),
        }
    }
}

/// trace(S_B) / trace(S_W) with class-size weighting:
/// S_B = Σ_c (n_c/N)(μ_c−μ)(μ_c−μ)ᵀ and S_W = Σ_c (n_c/N)·Cov_c, where
/// Cov_c is the population covariance of class c. Only the traces are
/// needed, so the scatter matrices are never materialized.
pub fn variance_ratio(features: ArrayView2<'_, f64>, labels: &[u32]) -> Result<VarianceRatio> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("variance_ratio".into()));
    }
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            context: "variance_ratio".into(),
            left: n,
            right: labels.len(),
        });
    }
    let d = features.ncols();
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidSpec(
            "variance_ratio requires at least two classes".into(),
        ));
    }

    let grand_mean = features.mean_axis(ndarray::Axis(0)).unwrap();
    let mut between = 0.0;
    let mut within = 0.0;
    for &class in &classes {
        let idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        let n_c = idx.len();
        let weight = n_c as f64 / n as f64;
        let mut mean = vec![0.0f64; d];
        for &i in &idx {
            for (m, v) in mean.iter_mut().zip(features.row(i)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n_c as f64;
        }
        let sep: f64 = mean
            .iter()
            .zip(grand_mean.iter())
            .map(|(m, g)| (m - g) * (m - g))
            .sum();
        between += weight * sep;
        let mut spread = 0.0;
        for &i in &idx {
            spread += features
                .row(i)
                .iter()
                .zip(mean.iter())
                .map(|(v, m)| (v - m) * (v - m))
                .sum::<f64>();
        }
        within += weight * spread / n_c as f64;
    }

    if within == 0.0 {
        if between > 0.0 {
            return Ok(VarianceRatio::Unbounded);
        }
        return Ok(VarianceRatio::Finite(0.0));
    }
    Ok(VarianceRatio::Finite(between / within))
}
