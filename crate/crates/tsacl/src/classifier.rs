//! Ridge-regression classifier maintained in closed form across a class-
//! incremental stream. After every task the weights equal the one-shot
//! ridge solution over all data seen so far, without revisiting any of
//! it: the update consumes only the new task's embeddings, the running
//! inverse correlation matrix Ψ, and the current weights.
//!
//! Ψ_t = (Σ_{i≤t} U_iᵀU_i + γI)⁻¹ is carried forward by rank-m downdates
//! (one per chunk of new rows), and the weight update appends the new
//! task's columns while shrinking the old ones through Ψ_t.

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg;

/// One-hot label matrix for a single task, with the global class id of
/// each column. Every row marks exactly one class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelBlock {
    matrix: Array2<f64>,
    classes: Vec<u32>,
}

impl LabelBlock {
    pub fn from_labels(labels: &[u32], classes: &[u32]) -> Result<LabelBlock> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("label block".into()));
        }
        if classes.is_empty() {
            return Err(Error::EmptyInput("label block class list".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &class in classes {
            if !seen.insert(class) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate class {class} in label block"
                )));
            }
        }
        let mut matrix = Array2::<f64>::zeros((labels.len(), classes.len()));
        for (row, &label) in labels.iter().enumerate() {
            let col = classes.iter().position(|&c| c == label).ok_or_else(|| {
                Error::InvalidSpec(format!(
                    "label {label} at row {row} is not one of the task classes {classes:?}"
                ))
            })?;
            matrix[(row, col)] = 1.0;
        }
        Ok(LabelBlock { matrix, classes: classes.to_vec() })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn num_samples(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn width(&self) -> usize {
        self.classes.len()
    }
}

/// Stack task label blocks into the block-diagonal layout of the joint
/// problem: rows follow task order, and each task's columns are zero
/// outside its own row range. Returns the stacked matrix and the
/// concatenated column class ids.
pub fn block_diagonal_labels(blocks: &[LabelBlock]) -> Result<(Array2<f64>, Vec<u32>)> {
    if blocks.is_empty() {
        return Err(Error::EmptyInput("block-diagonal label stack".into()));
    }
    let mut classes = Vec::new();
    for block in blocks {
        for &class in block.classes() {
            if classes.contains(&class) {
                return Err(Error::ClassCollision(class));
            }
            classes.push(class);
        }
    }
    let total_rows: usize = blocks.iter().map(|b| b.num_samples()).sum();
    let total_cols: usize = blocks.iter().map(|b| b.width()).sum();
    let mut stacked = Array2::<f64>::zeros((total_rows, total_cols));
    let (mut row0, mut col0) = (0, 0);
    for block in blocks {
        let (rows, cols) = (block.num_samples(), block.width());
        stacked
            .slice_mut(ndarray::s![row0..row0 + rows, col0..col0 + cols])
            .assign(block.matrix());
        row0 += rows;
        col0 += cols;
    }
    Ok((stacked, classes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticClassifier {
    /// Φ̂ [d_E × D_t]; column j scores the class `registry[j]`.
    weights: Array2<f64>,
    /// Ψ [d_E × d_E], the inverse of the regularized embedding Gram
    /// matrix over all tasks seen.
    inverse_correlation: Array2<f64>,
    gamma: f64,
    registry: Vec<u32>,
    tasks_seen: usize,
}

fn validate_embeddings(
    embeddings: ArrayView2<'_, f64>,
    labels: &LabelBlock,
    context: &str,
) -> Result<()> {
    if embeddings.nrows() == 0 {
        return Err(Error::EmptyInput(format!("{context} embeddings")));
    }
    if embeddings.nrows() != labels.num_samples() {
        return Err(Error::LengthMismatch {
            context: format!("{context} embeddings vs labels"),
            left: embeddings.nrows(),
            right: labels.num_samples(),
        });
    }
    if let Some(bad) = embeddings.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{context} embeddings ({bad})")));
    }
    Ok(())
}

impl AnalyticClassifier {
    /// Closed-form ridge fit on the first task:
    /// Ψ₁ = (UᵀU + γI)⁻¹, Φ̂₁ = Ψ₁UᵀV.
    pub fn fit_initial(
        embeddings: ArrayView2<'_, f64>,
        labels: &LabelBlock,
        gamma: f64,
    ) -> Result<AnalyticClassifier> {
        validate_embeddings(embeddings, labels, "fit_initial")?;
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gamma must be finite and non-negative, got {gamma}"
            )));
        }
        let d_e = embeddings.ncols();
        let mut gram = embeddings.t().dot(&embeddings);
        for i in 0..d_e {
            gram[(i, i)] += gamma;
        }
        let mut psi = linalg::spd_inverse(gram.view())?;
        linalg::symmetrize(&mut psi);
        let cross = embeddings.t().dot(labels.matrix());
        let weights = psi.dot(&cross);
        Ok(AnalyticClassifier {
            weights,
            inverse_correlation: psi,
            gamma,
            registry: labels.classes().to_vec(),
            tasks_seen: 1,
        })
    }

    /// Fold one new task in. Ψ absorbs the new rows chunk by chunk,
    ///   Ψ ← Ψ − ΨU_cᵀ(I + U_cΨU_cᵀ)⁻¹U_cΨ,
    /// each inner solve no larger than chunk_size. The weight update uses
    /// the end-of-task Ψ_t with the whole task's Gram accumulators
    ///   Φ̂_t = [ Φ̂_{t−1} − Ψ_t U_tᵀU_t Φ̂_{t−1} | Ψ_t U_tᵀV_t ],
    /// so the chunking choice never changes the result. The outcome is
    /// the joint ridge solution over every task seen so far.
    pub fn update(
        &mut self,
        embeddings: ArrayView2<'_, f64>,
        labels: &LabelBlock,
        chunk_size: usize,
    ) -> Result<()> {
        validate_embeddings(embeddings, labels, "update")?;
        if embeddings.ncols() != self.d_e() {
            return Err(Error::DimensionMismatch {
                context: "update embedding width".into(),
                expected: self.d_e(),
                actual: embeddings.ncols(),
            });
        }
        if chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk_size must be positive".into()));
        }
        for &class in labels.classes() {
            if self.registry.contains(&class) {
                return Err(Error::ClassCollision(class));
            }
        }

        // Full-task accumulators, independent of the chunking below.
        let gram = embeddings.t().dot(&embeddings);
        let cross = embeddings.t().dot(labels.matrix());

        let n = embeddings.nrows();
        let mut start = 0;
        while start < n {
            let end = (start + chunk_size).min(n);
            let u_c = embeddings.slice(ndarray::s![start..end, ..]);
            // S = U_cΨ, M = I + U_cΨU_cᵀ (symmetric positive definite).
            let s = u_c.dot(&self.inverse_correlation);
            let mut inner = s.dot(&u_c.t());
            for i in 0..inner.nrows() {
                inner[(i, i)] += 1.0;
            }
            linalg::symmetrize(&mut inner);
            let x = linalg::spd_solve(inner.view(), s.view())?;
            self.inverse_correlation = &self.inverse_correlation - &s.t().dot(&x);
            linalg::symmetrize(&mut self.inverse_correlation);
            start = end;
        }

        let shrink = self.inverse_correlation.dot(&gram.dot(&self.weights));
        let left = &self.weights - &shrink;
        let right = self.inverse_correlation.dot(&cross);
        self.weights = concatenate(Axis(1), &[left.view(), right.view()])
            .expect("row counts match");
        self.registry.extend_from_slice(labels.classes());
        self.tasks_seen += 1;
        Ok(())
    }

    /// U · Φ̂; one score column per registered class.
    pub fn predict_scores(&self, embeddings: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if embeddings.ncols() != self.d_e() {
            return Err(Error::DimensionMismatch {
                context: "prediction embedding width".into(),
                expected: self.d_e(),
                actual: embeddings.ncols(),
            });
        }
        Ok(embeddings.dot(&self.weights))
    }

    /// Row-wise argmax mapped through the registry; ties go to the
    /// lowest registry position.
    pub fn predict_labels(&self, embeddings: ArrayView2<'_, f64>) -> Result<Vec<u32>> {
        let scores = self.predict_scores(embeddings)?;
        Ok(scores
            .rows()
            .into_iter()
            .map(|row| self.registry[argmax_first(row.as_slice().unwrap())])
            .collect())
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn inverse_correlation(&self) -> &Array2<f64> {
        &self.inverse_correlation
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn registry(&self) -> &[u32] {
        &self.registry
    }

    pub fn tasks_seen(&self) -> usize {
        self.tasks_seen
    }

    pub fn d_e(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_outputs(&self) -> usize {
        self.weights.ncols()
    }

    /// Rebuild from persisted state, revalidating the shape invariants.
    pub fn from_parts(
        weights: Array2<f64>,
        inverse_correlation: Array2<f64>,
        gamma: f64,
        registry: Vec<u32>,
        tasks_seen: usize,
    ) -> Result<AnalyticClassifier> {
        if inverse_correlation.nrows() != inverse_correlation.ncols() {
            return Err(Error::DimensionMismatch {
                context: "inverse correlation matrix".into(),
                expected: inverse_correlation.nrows(),
                actual: inverse_correlation.ncols(),
            });
        }
        if weights.nrows() != inverse_correlation.nrows() {
            return Err(Error::DimensionMismatch {
                context: "weights rows vs inverse correlation".into(),
                expected: inverse_correlation.nrows(),
                actual: weights.nrows(),
            });
        }
        if registry.len() != weights.ncols() {
            return Err(Error::LengthMismatch {
                context: "registry vs weight columns".into(),
                left: registry.len(),
                right: weights.ncols(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for &class in &registry {
            if !seen.insert(class) {
                return Err(Error::ClassCollision(class));
            }
        }
        if tasks_seen == 0 {
            return Err(Error::InvalidSpec("tasks_seen must be positive".into()));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidConfig(format!("invalid gamma {gamma}")));
        }
        Ok(AnalyticClassifier {
            weights,
            inverse_correlation,
            gamma,
            registry,
            tasks_seen,
        })
    }
}

fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// One-shot ridge solve over the stacked data of all tasks:
/// Φ = (UᵀU + γI)⁻¹UᵀV. Reference implementation the recursion is
/// checked against; not performance-critical.
pub fn joint_fit(
    embeddings: ArrayView2<'_, f64>,
    labels: ArrayView2<'_, f64>,
    gamma: f64,
) -> Result<Array2<f64>> {
    if embeddings.nrows() != labels.nrows() {
        return Err(Error::LengthMismatch {
            context: "joint fit embeddings vs labels".into(),
            left: embeddings.nrows(),
            right: labels.nrows(),
        });
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "gamma must be finite and non-negative, got {gamma}"
        )));
    }
    let d_e = embeddings.ncols();
    let mut gram = embeddings.t().dot(&embeddings);
    for i in 0..d_e {
        gram[(i, i)] += gamma;
    }
    let cross = embeddings.t().dot(&labels);
    linalg::spd_solve(gram.view(), cross.view())
}
