//! Small dense row-major matrices and the handful of factorizations the
//! estimators need: symmetric eigendecomposition (cyclic Jacobi), LU with
//! partial pivoting, and Householder least squares.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense `rows x cols` matrix of `f64`, stored row-major.
///
/// Observation blocks use one row per observation and one column per
/// variable.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds an `n x 1` matrix from a column vector.
    pub fn from_column(col: &[f64]) -> Self {
        Matrix {
            rows: col.len(),
            cols: 1,
            data: col.to_vec(),
        }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(cols: &[C]) -> Result<Self> {
        let rows = cols.first().map_or(0, |c| c.as_ref().len());
        let mut m = Matrix::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    got: c.len(),
                });
            }
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate().take(self.rows) {
            self.data[i * self.cols + j] = v;
        }
    }

    /// Copies columns `start..end` into a new matrix.
    pub fn column_block(&self, start: usize, end: usize) -> Matrix {
        let width = end - start;
        let mut out = Matrix::zeros(self.rows, width);
        for i in 0..self.rows {
            out.row_mut(i)
                .copy_from_slice(&self.row(i)[start..end]);
        }
        out
    }

    /// Copies the given columns, in order, into a new matrix.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    /// Copies rows `start..end` into a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// Places `other`'s columns to the right of `self`'s.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::RowMismatch {
                left: self.rows,
                right: other.rows,
            });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &aik) in a.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                for (oj, &bkj) in o.iter_mut().zip(other.row(k)) {
                    *oj += aik * bkj;
                }
            }
        }
        out
    }

    /// `self * other'`, the row-observation form `X W'`.
    pub fn matmul_t(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_t shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                let b = other.row(j);
                out.data[i * other.rows + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Largest absolute entrywise difference. Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / self.cols, p % self.cols))
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (mj, v) in m.iter_mut().zip(self.row(i)) {
                *mj += v;
            }
        }
        let n = self.rows as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Sample covariance with divisor `n - 1`.
    pub fn covariance(&self) -> Matrix {
        let means = self.column_means();
        let d = self.cols;
        let mut c = Matrix::zeros(d, d);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..d {
                let da = r[a] - means[a];
                for b in a..d {
                    c.data[a * d + b] += da * (r[b] - means[b]);
                }
            }
        }
        let denom = (self.rows as f64 - 1.0).max(1.0);
        for a in 0..d {
            for b in a..d {
                let v = c.data[a * d + b] / denom;
                c.data[a * d + b] = v;
                c.data[b * d + a] = v;
            }
        }
        c
    }

    /// Largest deviation of `self * self'` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        self.matmul_t(self).max_abs_diff(&Matrix::identity(self.rows))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenpairs of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order; column `k` of `vectors` is the
/// eigenvector for `values[k]`, signed so that its largest-magnitude entry is
/// positive.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: a.cols(),
        });
    }
    if let Some((row, col)) = a.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off == 0.0 || libm::sqrt(off) <= 1e-16 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(y, y)].total_cmp(&m[(x, x)]));
    let values: Vec<f64> = order.iter().map(|&k| m[(k, k)]).collect();
    let mut vectors = v.select_columns(&order);
    for k in 0..n {
        let mut best = 0;
        for i in 1..n {
            if vectors[(i, k)].abs() > vectors[(best, k)].abs() {
                best = i;
            }
        }
        if vectors[(best, k)] < 0.0 {
            for i in 0..n {
                vectors[(i, k)] = -vectors[(i, k)];
            }
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                got: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let tiny = 1e-14 * a.max_abs();
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if lu[(i, k)].abs() > lu[(p, k)].abs() {
                    p = i;
                }
            }
            if lu[(p, k)].abs() <= tiny || lu[(p, k)] == 0.0 {
                return Err(Error::SingularMatrix);
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn determinant(&self) -> f64 {
        (0..self.lu.rows()).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n);
        let mut x = b.select_rows(&self.perm);
        for j in 0..b.cols() {
            for i in 0..n {
                let mut s = x[(i, j)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, j)];
                for k in i + 1..n {
                    s -= self.lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s / self.lu[(i, i)];
            }
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.lu.rows()))
    }
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    Ok(Lu::new(a)?.inverse())
}

pub fn determinant(a: &Matrix) -> Result<f64> {
    match Lu::new(a) {
        Ok(lu) => Ok(lu.determinant()),
        Err(Error::SingularMatrix) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Ratio of the largest to the smallest singular value.
pub fn condition_number(a: &Matrix) -> Result<f64> {
    let ata = a.transpose().matmul(a);
    let eig = symmetric_eigen(&ata)?;
    let hi = eig.values[0].max(0.0);
    let lo = eig.values[eig.values.len() - 1].max(0.0);
    if lo == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(libm::sqrt(hi / lo))
}

/// Inverse square root of a symmetric positive definite matrix.
pub fn inverse_sqrt_spd(a: &Matrix) -> Result<Matrix> {
    let eig = symmetric_eigen(a)?;
    let n = a.rows();
    let lo = eig.values[n - 1];
    if lo <= 1e-14 * eig.values[0].abs() || lo <= 0.0 {
        return Err(Error::SingularMatrix);
    }
    let scaled = Matrix::from_fn(n, n, |i, j| eig.vectors[(i, j)] / libm::sqrt(eig.values[j]));
    Ok(scaled.matmul_t(&eig.vectors))
}

/// Least-squares coefficients `B` minimizing `|X B - Y|_F` by Householder QR.
///
/// Fails with [`Error::Collinear`] naming the first column whose diagonal in
/// `R` is negligible.
pub fn least_squares(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    let m = x.rows();
    let k = x.cols();
    if y.rows() != m {
        return Err(Error::RowMismatch { left: m, right: y.rows() });
    }
    if m < k {
        return Err(Error::TooFewRows { needed: k, got: m });
    }
    let mut a = x.clone();
    let mut b = y.clone();
    let col_scale = (0..k)
        .map(|j| libm::sqrt((0..m).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>()))
        .fold(0.0, f64::max);
    let mut v = vec![0.0; m];
    for j in 0..k {
        let norm = libm::sqrt((j..m).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>());
        if norm <= 1e-10 * col_scale {
            return Err(Error::Collinear { column: j });
        }
        let alpha = if a[(j, j)] > 0.0 { -norm } else { norm };
        for i in j..m {
            v[i] = a[(i, j)];
        }
        v[j] -= alpha;
        let vnorm2: f64 = (j..m).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in j..k {
            let dot: f64 = (j..m).map(|i| v[i] * a[(i, c)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..m {
                a[(i, c)] -= f * v[i];
            }
        }
        for c in 0..b.cols() {
            let dot: f64 = (j..m).map(|i| v[i] * b[(i, c)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..m {
                b[(i, c)] -= f * v[i];
            }
        }
    }
    let mut coef = Matrix::zeros(k, b.cols());
    for c in 0..b.cols() {
        for i in (0..k).rev() {
            let mut s = b[(i, c)];
            for l in i + 1..k {
                s -= a[(i, l)] * coef[(l, c)];
            }
            coef[(i, c)] = s / a[(i, i)];
        }
    }
    Ok(coef)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Matrix {
        Matrix::from_rows(&[[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]]).unwrap()
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = sample();
        let e = symmetric_eigen(&a).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let lam = Matrix::from_diagonal(&e.values);
        let back = e.vectors.matmul(&lam).matmul_t(&e.vectors);
        assert!(back.max_abs_diff(&a) < 1e-12);
        assert!(e.vectors.orthogonality_defect() < 1e-12);
    }

    #[test]
    fn lu_inverse_and_determinant() {
        let a = Matrix::from_rows(&[[0.0, 2.0], [3.0, 1.0]]).unwrap();
        let lu = Lu::new(&a).unwrap();
        assert!((lu.determinant() + 6.0).abs() < 1e-12);
        let inv = lu.inverse();
        assert!(a.matmul(&inv).max_abs_diff(&Matrix::identity(2)) < 1e-14);
        let s = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(Lu::new(&s).unwrap_err(), Error::SingularMatrix);
    }

    #[test]
    fn least_squares_recovers_exact_fit() {
        let x = Matrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = Matrix::from_fn(6, 1, |i, _| 2.0 + 0.5 * i as f64);
        let b = least_squares(&x, &y).unwrap();
        assert!((b[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((b[(1, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn least_squares_flags_collinearity() {
        let x = Matrix::from_fn(5, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64,
        });
        let y = Matrix::from_fn(5, 1, |i, _| i as f64);
        assert_eq!(least_squares(&x, &y).unwrap_err(), Error::Collinear { column: 2 });
    }

    #[test]
    fn inverse_sqrt_whitens() {
        let a = sample();
        let r = inverse_sqrt_spd(&a).unwrap();
        let id = r.matmul(&a).matmul(&r);
        assert!(id.max_abs_diff(&Matrix::identity(3)) < 1e-12);
    }
}
