//! Random nonlinear feature expansion: a frozen seeded Gaussian
//! projection to d_E dimensions followed by a rectifier. The projection
//! is regenerable from its (seed, d_stack, d_E, σ) tuple, so checkpoints
//! carry the tuple instead of the matrix.

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec;

#[derive(Debug, Clone, PartialEq)]
pub struct RandomProjection {
    matrix: Array2<f64>,
    seed: u64,
    sigma: f64,
}

impl RandomProjection {
    /// Entries are i.i.d. N(0, σ²) drawn row-major from a generator
    /// seeded with `seed`; the same (d_stack, d_E, seed, σ) tuple always
    /// rebuilds the identical matrix.
    pub fn new(d_stack: usize, d_e: usize, seed: u64, sigma: f64) -> Result<RandomProjection> {
        if d_stack == 0 || d_e == 0 {
            return Err(Error::InvalidSpec(
                "projection dimensions must be positive".into(),
            ));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "projection sigma must be finite and positive, got {sigma}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(d_stack * d_e);
        for _ in 0..d_stack * d_e {
            let z: f64 = StandardNormal.sample(&mut rng);
            values.push(z * sigma);
        }
        Ok(RandomProjection {
            matrix: Array2::from_shape_vec((d_stack, d_e), values).expect("length matches shape"),
            seed,
            sigma,
        })
    }

    /// Scale choice that keeps pre-activation variance near 1 for
    /// standardized inputs regardless of d_stack.
    pub fn default_sigma(d_stack: usize) -> f64 {
        1.0 / (d_stack as f64).sqrt()
    }

    pub fn d_stack(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn d_e(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// max(0, features · Φ) row by row, promoting f32 features to f64.
    /// Rows are independent, so the parallel and serial paths agree
    /// bitwise.
    pub fn expand(&self, features: ArrayView2<'_, f32>) -> Result<Array2<f64>> {
        self.expand_impl(features, true)
    }

    /// Single-threaded variant used by the benchmark comparison.
    pub fn expand_serial(&self, features: ArrayView2<'_, f32>) -> Result<Array2<f64>> {
        self.expand_impl(features, false)
    }

    fn expand_impl(&self, features: ArrayView2<'_, f32>, parallel: bool) -> Result<Array2<f64>> {
        if features.ncols() != self.d_stack() {
            return Err(Error::DimensionMismatch {
                context: "expansion input width".into(),
                expected: self.d_stack(),
                actual: features.ncols(),
            });
        }
        let n = features.nrows();
        let expand_row = |i: usize| -> Vec<f64> {
            let row: Array1<f64> = features.row(i).iter().map(|&v| v as f64).collect();
            let mut out = row.dot(&self.matrix);
            out.mapv_inplace(|v| v.max(0.0));
            out.to_vec()
        };
        let rows = if parallel {
            exec::map_indexed(n, expand_row)
        } else {
            exec::map_indexed_serial(n, expand_row)
        };
        let mut out = Array2::<f64>::zeros((n, self.d_e()));
        for (i, row) in rows.into_iter().enumerate() {
            out.row_mut(i).assign(&ndarray::ArrayView1::from(&row[..]));
        }
        Ok(out)
    }
}
