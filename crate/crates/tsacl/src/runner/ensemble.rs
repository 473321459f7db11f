//! Ensemble prediction: members share one encoder and task history but
//! expand with different seeds; predictions average the members'
//! per-class probabilities.

use ndarray::{Array2, ArrayView2};

use crate::classifier::AnalyticClassifier;
use crate::error::{Error, Result};
use crate::expansion::RandomProjection;

/// One ensemble member: a frozen expansion and the classifier trained on
/// its embeddings.
#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub projection: RandomProjection,
    pub classifier: AnalyticClassifier,
}

/// Max-subtracted exponentials normalized to sum 1, row by row.
pub fn softmax(scores: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if let Some(bad) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("softmax input ({bad})")));
    }
    let mut out = scores.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    Ok(out)
}

/// Average per-member probability rows and take the argmax class, ties
/// to the lowest registry position. The probability matrices must align
/// row-for-row and column-for-column.
pub fn predict_from_probabilities(
    probabilities: &[Array2<f64>],
    registry: &[u32],
) -> Result<Vec<u32>> {
    let first = probabilities
        .first()
        .ok_or_else(|| Error::EmptyInput("ensemble probabilities".into()))?;
    if first.ncols() != registry.len() {
        return Err(Error::LengthMismatch {
            context: "probability columns vs registry".into(),
            left: first.ncols(),
            right: registry.len(),
        });
    }
    if probabilities.iter().any(|p| p.dim() != first.dim()) {
        return Err(Error::RegistryMismatch);
    }
    let mut mean = first.clone();
    for p in &probabilities[1..] {
        mean += p;
    }
    mean /= probabilities.len() as f64;
    Ok(mean
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            registry[best]
        })
        .collect())
}

/// Expand the shared fused features once per member, score, soften, and
/// vote. All members must carry the identical class registry.
pub fn ensemble_predict(
    members: &[EnsembleMember],
    features: ArrayView2<'_, f32>,
) -> Result<Vec<u32>> {
    let first = members
        .first()
        .ok_or_else(|| Error::EmptyInput("ensemble members".into()))?;
    let registry = first.classifier.registry();
    if members
        .iter()
        .any(|m| m.classifier.registry() != registry)
    {
        return Err(Error::RegistryMismatch);
    }
    let mut probabilities = Vec::with_capacity(members.len());
    for member in members {
        let embeddings = member.projection.expand(features)?;
        let scores = member.classifier.predict_scores(embeddings.view())?;
        probabilities.push(softmax(scores.view())?);
    }
    predict_from_probabilities(&probabilities, registry)
}
