//! Centering, standardization, PCA whitening and VAR residuals for
//! observation blocks (rows are observations, columns are variables).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Rejects non-finite entries.
pub fn check_finite(x: &Matrix) -> Result<()> {
    match x.first_non_finite() {
        Some((row, col)) => Err(Error::NonFinite { row, col }),
        None => Ok(()),
    }
}

/// Subtracts the column means. Returns the centered block and the means.
pub fn center(x: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    if x.rows() == 0 {
        return Err(Error::Empty);
    }
    check_finite(x)?;
    let mean = x.column_means();
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, m) in out.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    Ok((out, mean))
}

/// Sample standard deviation (divisor `n - 1`) of each column.
pub fn column_sds(x: &Matrix) -> Vec<f64> {
    let mean = x.column_means();
    let denom = (x.rows() as f64 - 1.0).max(1.0);
    (0..x.cols())
        .map(|j| {
            let ss: f64 = (0..x.rows()).map(|i| (x[(i, j)] - mean[j]) * (x[(i, j)] - mean[j])).sum();
            libm::sqrt(ss / denom)
        })
        .collect()
}

/// Divides each column by its sample standard deviation.
pub fn standardize_columns(x: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    if x.rows() < 2 {
        return Err(Error::TooFewRows { needed: 2, got: x.rows() });
    }
    check_finite(x)?;
    let sds = column_sds(x);
    let scale = x.max_abs().max(f64::MIN_POSITIVE);
    if let Some(column) = sds.iter().position(|&s| !(s > 1e-14 * scale)) {
        return Err(Error::DegenerateScale { column });
    }
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, s) in out.row_mut(i).iter_mut().zip(&sds) {
            *v /= s;
        }
    }
    Ok((out, sds))
}

/// PCA whitening transform `O = Λ^{-1/2} Υ'` fitted to a sample.
#[derive(Debug, Clone)]
pub struct Whitening {
    pub mean: Vec<f64>,
    /// `O`, so that whitened rows are `(y - mean) O'`.
    pub uncorrelating: Matrix,
    /// Covariance eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Covariance eigenvectors as columns.
    pub eigenvectors: Matrix,
}

impl Whitening {
    /// Whitens new observations with the fitted mean and `O`.
    pub fn apply(&self, y: &Matrix) -> Matrix {
        let mut c = y.clone();
        for i in 0..c.rows() {
            for (v, m) in c.row_mut(i).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        c.matmul_t(&self.uncorrelating)
    }

    /// `O^{-1} = Υ Λ^{1/2}`.
    pub fn inverse_uncorrelating(&self) -> Matrix {
        let d = self.eigenvalues.len();
        Matrix::from_fn(d, d, |i, j| {
            self.eigenvectors[(i, j)] * libm::sqrt(self.eigenvalues[j])
        })
    }
}

/// Centers `x` and rotates/scales it onto its principal axes so the sample
/// covariance becomes the identity.
pub fn whiten(x: &Matrix) -> Result<(Matrix, Whitening)> {
    if x.rows() < 2 {
        return Err(Error::TooFewRows { needed: 2, got: x.rows() });
    }
    let (centered, mean) = center(x)?;
    let cov = centered.covariance();
    let eig = linalg::symmetric_eigen(&cov)?;
    let top = eig.values[0];
    for (index, &value) in eig.values.iter().enumerate() {
        if !(value > 1e-12 * top) || top <= 0.0 {
            return Err(Error::SingularCovariance { index, value });
        }
    }
    let d = x.cols();
    let uncorrelating = Matrix::from_fn(d, d, |i, j| {
        eig.vectors[(j, i)] / libm::sqrt(eig.values[i])
    });
    let z = centered.matmul_t(&uncorrelating);
    Ok((
        z,
        Whitening {
            mean,
            uncorrelating,
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
        },
    ))
}

/// Fitted vector autoregression.
#[derive(Debug, Clone)]
pub struct VarFit {
    pub order: usize,
    /// `(1 + d p) x d`: intercept row, then lag-1 block, lag-2 block, ...
    pub coefficients: Matrix,
    /// `(n - p) x d` OLS residuals.
    pub residuals: Matrix,
}

/// Least-squares VAR(p) with intercept; each column is regressed on `p` lags
/// of every column.
pub fn var_ols(y: &Matrix, order: usize) -> Result<VarFit> {
    if order == 0 {
        return Err(Error::InvalidArgument("lag order must be positive"));
    }
    check_finite(y)?;
    let n = y.rows();
    let d = y.cols();
    if n <= d * order + 1 {
        return Err(Error::TooFewRows {
            needed: d * order + 2,
            got: n,
        });
    }
    let m = n - order;
    let k = 1 + d * order;
    if m < k {
        return Err(Error::TooFewRows {
            needed: k + order,
            got: n,
        });
    }
    let x = Matrix::from_fn(m, k, |t, c| {
        if c == 0 {
            1.0
        } else {
            let lag = (c - 1) / d + 1;
            let col = (c - 1) % d;
            y[(t + order - lag, col)]
        }
    });
    let target = y.row_block(order, n);
    let coefficients = linalg::least_squares(&x, &target)?;
    let residuals = target.sub(&x.matmul(&coefficients));
    Ok(VarFit {
        order,
        coefficients,
        residuals,
    })
}

/// Residuals of a least-squares VAR(p) with intercept.
pub fn var_ols_residuals(y: &Matrix, order: usize) -> Result<Matrix> {
    Ok(var_ols(y, order)?.residuals)
}

/// First differences along the rows.
pub fn difference(y: &Matrix) -> Result<Matrix> {
    if y.rows() < 2 {
        return Err(Error::TooFewRows { needed: 2, got: y.rows() });
    }
    Ok(Matrix::from_fn(y.rows() - 1, y.cols(), |i, j| {
        y[(i + 1, j)] - y[(i, j)]
    }))
}
