//! Dense linear-algebra kernels used by the analytic classifier.
//!
//! Everything here is 64-bit: the recursive inverse-correlation updates
//! accumulate rounding error, and the equivalence tolerances demand f64.
//! Symmetric positive definite systems go through an unpivoted Cholesky
//! factorization; general (small) systems through LU with partial pivoting.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor L with A = L Lᵀ.
///
/// Fails with `SingularSystem` when a pivot is not strictly positive,
/// which covers both indefinite and rank-deficient inputs.
pub fn cholesky(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "cholesky: square matrix".into(),
            expected: n,
            actual: a.ncols(),
        });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::SingularSystem(format!(
                        "matrix not positive definite at pivot {i}"
                    )));
                }
                l[(i, j)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve A X = B for symmetric positive definite A via Cholesky.
pub fn spd_solve(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let l = cholesky(a)?;
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "spd_solve: rhs rows".into(),
            expected: a.nrows(),
            actual: b.nrows(),
        });
    }
    let n = l.nrows();
    let m = b.ncols();
    let mut x = b.to_owned();
    // forward: L Z = B
    for col in 0..m {
        for i in 0..n {
            let mut sum = x[(i, col)];
            for k in 0..i {
                sum -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = sum / l[(i, i)];
        }
        // backward: Lᵀ X = Z
        for i in (0..n).rev() {
            let mut sum = x[(i, col)];
            for k in i + 1..n {
                sum -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = sum / l[(i, i)];
        }
    }
    Ok(x)
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let eye = Array2::<f64>::eye(a.nrows());
    spd_solve(a, eye.view())
}

/// Inverse of a general square matrix via LU with partial pivoting.
///
/// Intended for the small systems in the identity checks; not tuned for
/// large inputs.
pub fn lu_inverse(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "lu_inverse: square matrix".into(),
            expected: n,
            actual: a.ncols(),
        });
    }
    let mut lu = a.to_owned();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot = col;
        let mut best = lu[(col, col)].abs();
        for row in col + 1..n {
            let v = lu[(row, col)].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::SingularSystem(format!(
                "matrix singular at column {col}"
            )));
        }
        if pivot != col {
            for k in 0..n {
                lu.swap((col, k), (pivot, k));
            }
            perm.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = lu[(row, col)] / lu[(col, col)];
            lu[(row, col)] = factor;
            for k in col + 1..n {
                let sub = factor * lu[(col, k)];
                lu[(row, k)] -= sub;
            }
        }
    }
    let mut inv = Array2::<f64>::zeros((n, n));
    for rhs in 0..n {
        let mut x = vec![0.0f64; n];
        for i in 0..n {
            let mut sum = if perm[i] == rhs { 1.0 } else { 0.0 };
            for k in 0..i {
                sum -= lu[(i, k)] * x[k];
            }
            x[i] = sum;
        }
        for i in (0..n).rev() {
            let mut sum = x[i];
            for k in i + 1..n {
                sum -= lu[(i, k)] * x[k];
            }
            x[i] = sum / lu[(i, i)];
        }
        for i in 0..n {
            inv[(i, rhs)] = x[i];
        }
    }
    Ok(inv)
}

/// Frobenius norm.
pub fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// ‖a − b‖_F / ‖b‖_F, with an absolute norm when b is zero.
pub fn relative_frobenius_diff(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let diff = frobenius((&a.to_owned() - &b.to_owned()).view());
    let denom = frobenius(b);
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}

/// Replace A with (A + Aᵀ)/2 in place.
pub fn symmetrize(a: &mut Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
}

/// Relative residual between the direct inverse of A + U C V and its
/// low-rank expansion through the previous inverse.
///
/// Returns ‖(A+UCV)⁻¹ − (A⁻¹ − A⁻¹U(C⁻¹ + VA⁻¹U)⁻¹VA⁻¹)‖_F / ‖(A+UCV)⁻¹‖_F.
pub fn woodbury_residual(
    a: ArrayView2<'_, f64>,
    u: ArrayView2<'_, f64>,
    c: ArrayView2<'_, f64>,
    v: ArrayView2<'_, f64>,
) -> Result<f64> {
    let n = a.nrows();
    let m = c.nrows();
    if a.ncols() != n || c.ncols() != m || u.nrows() != n || u.ncols() != m {
        return Err(Error::DimensionMismatch {
            context: "woodbury_residual: shapes".into(),
            expected: n,
            actual: u.nrows(),
        });
    }
    if v.nrows() != m || v.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "woodbury_residual: v shape".into(),
            expected: m,
            actual: v.nrows(),
        });
    }
    let a_inv = lu_inverse(a)?;
    let c_inv = lu_inverse(c)?;

    let updated = &a.to_owned() + &u.dot(&c.dot(&v.to_owned()));
    let direct = lu_inverse(updated.view())?;

    let va_inv = v.dot(&a_inv);
    let inner = &c_inv + &va_inv.dot(&u.to_owned());
    let inner_inv = lu_inverse(inner.view())?;
    let correction = a_inv.dot(&u.to_owned()).dot(&inner_inv).dot(&va_inv);
    let expanded = &a_inv - &correction;

    let denom = frobenius(direct.view());
    let resid = frobenius((&direct - &expanded).view());
    Ok(if denom == 0.0 { resid } else { resid / denom })
}
