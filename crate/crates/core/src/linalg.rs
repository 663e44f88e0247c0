//! Dense symmetric eigensolvers and small order-statistic helpers shared by
//! the estimators and the detectors.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{PmimError, Result};

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;

/// Returns `(a + aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

fn check_square_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(PmimError::shape(
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(PmimError::Numerical(
            "matrix contains non-finite entries".into(),
        ));
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix, sorted in descending order.
///
/// The input is symmetrized before solving.
pub fn sym_eigenvalues_desc(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_square_finite(a)?;
    let values = symmetrize(a).symmetric_eigenvalues();
    let mut values: Vec<f64> = values.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PmimError::Numerical("eigensolver produced non-finite values".into()));
    }
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Full symmetric eigendecomposition with eigenpairs sorted by descending
/// eigenvalue (ties keep solver order) and each eigenvector's largest-magnitude
/// entry made positive.
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_square_finite(a)?;
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(symmetrize(a), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| PmimError::Numerical("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their column order
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for r in 1..n {
            if col[r].abs() > col[pivot].abs() {
                pivot = r;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[(r, dst)] = sign * col[r];
        }
    }
    Ok((values, vectors))
}

/// Empirical quantile with linear interpolation between order statistics
/// (position `(n - 1) * p` on the sorted sample).
///
/// `sorted` must be ascending and non-empty; `p` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Median and interquartile range of a sample.
pub fn median_iqr(values: &[f64]) -> (f64, f64) {
    let s = sorted_copy(values);
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    (quantile_sorted(&s, 0.5), q3 - q1)
}
