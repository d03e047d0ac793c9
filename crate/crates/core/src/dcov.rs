//! Distance covariance U-statistic between two multivariate samples.
//!
//! With distance matrices `A`, `B`, row sums `a_i`, `b_i` and totals `a`, `b`:
//!
//! ```text
//! T1 = Σ_{i≠j} A_ij B_ij / (n(n-1))
//! T2 = a b / (n(n-1))^2
//! T3 = 2 Σ_i (a_i b_i - Σ_j A_ij B_ij) / (n(n-1)(n-2))
//! I_n = T1 + T2 - T3
//! ```
//!
//! which equals the pair/triple averages evaluated literally by
//! [`dcov_brute`]. The fast paths never materialize the distance matrices:
//! one pass over pairs `i < j` accumulates the row sums and cross products.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// The three U-statistic terms and their combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcovStat {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    /// `t1 + t2 - t3`; may be negative in finite samples.
    pub i_n: f64,
}

impl DcovStat {
    fn from_terms(t1: f64, t2: f64, t3: f64) -> Self {
        DcovStat {
            t1,
            t2,
            t3,
            i_n: t1 + t2 - t3,
        }
    }

    /// Assembles the statistic from `Σ_{i<j} A_ij B_ij` and the row sums.
    fn from_sums(n: usize, cross_half: f64, row_a: &[f64], row_b: &[f64]) -> Self {
        let nf = n as f64;
        let pairs = nf * (nf - 1.0);
        let triples = pairs * (nf - 2.0);
        let cross = 2.0 * cross_half;
        let total_a: f64 = row_a.iter().sum();
        let total_b: f64 = row_b.iter().sum();
        let row_prod: f64 = row_a.iter().zip(row_b).map(|(a, b)| a * b).sum();
        let t1 = cross / pairs;
        let t2 = (total_a / pairs) * (total_b / pairs);
        let t3 = 2.0 * (row_prod - cross) / triples;
        DcovStat::from_terms(t1, t2, t3)
    }
}

#[inline]
fn row_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Euclidean distances between all pairs of rows.
pub fn pairwise_distances(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = row_distance(x.row(i), x.row(j));
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    out
}

fn check_pair(x: &Matrix, y: &Matrix) -> Result<usize> {
    if x.rows() != y.rows() {
        return Err(Error::RowMismatch {
            left: x.rows(),
            right: y.rows(),
        });
    }
    if x.rows() < 3 {
        return Err(Error::TooFewRows {
            needed: 3,
            got: x.rows(),
        });
    }
    if x.cols() == 0 || y.cols() == 0 {
        return Err(Error::TooFewColumns { needed: 1, got: 0 });
    }
    Ok(x.rows())
}

/// Distance covariance U-statistic in O(n^2) time and O(n) memory.
pub fn dcov_ustat(x: &Matrix, y: &Matrix) -> Result<DcovStat> {
    let n = check_pair(x, y)?;
    let mut row_a = vec![0.0; n];
    let mut row_b = vec![0.0; n];
    let mut cross = 0.0;
    for i in 0..n {
        let (xi, yi) = (x.row(i), y.row(i));
        let mut ra = 0.0;
        let mut rb = 0.0;
        for j in i + 1..n {
            let a = row_distance(xi, x.row(j));
            let b = row_distance(yi, y.row(j));
            ra += a;
            rb += b;
            row_a[j] += a;
            row_b[j] += b;
            cross += a * b;
        }
        row_a[i] += ra;
        row_b[i] += rb;
    }
    Ok(DcovStat::from_sums(n, cross, &row_a, &row_b))
}

/// Literal transcription of the pair and triple averages, used as an oracle.
/// Cost is O(n^3); intended for n up to about 100.
pub fn dcov_brute(x: &Matrix, y: &Matrix) -> Result<DcovStat> {
    let n = check_pair(x, y)?;
    let a = |i: usize, j: usize| row_distance(x.row(i), x.row(j));
    let b = |i: usize, j: usize| row_distance(y.row(i), y.row(j));
    let nf = n as f64;
    let n_pairs = nf * (nf - 1.0) / 2.0;
    let n_triples = nf * (nf - 1.0) * (nf - 2.0) / 6.0;

    let mut s1 = 0.0;
    let mut sa = 0.0;
    let mut sb = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s1 += a(i, j) * b(i, j);
            sa += a(i, j);
            sb += b(i, j);
        }
    }
    let mut s3 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                s3 += (a(i, j) * b(i, k)
                    + a(i, k) * b(i, j)
                    + a(i, j) * b(j, k)
                    + a(j, k) * b(i, j)
                    + a(i, k) * b(j, k)
                    + a(j, k) * b(i, k))
                    / 3.0;
            }
        }
    }
    Ok(DcovStat::from_terms(
        s1 / n_pairs,
        (sa / n_pairs) * (sb / n_pairs),
        s3 / n_triples,
    ))
}

/// Statistics `I_n(S_k, S_{k+})` for `k = 0..d-1`, where `S_{k+}` is the
/// block of columns after `k`. All `d - 1` terms come from a single pass over
/// pairs of rows, using suffix sums of squared coordinate differences.
pub fn chained_dcov(s: &Matrix) -> Result<Vec<DcovStat>> {
    let n = s.rows();
    let d = s.cols();
    if d < 2 {
        return Err(Error::TooFewColumns { needed: 2, got: d });
    }
    if n < 3 {
        return Err(Error::TooFewRows { needed: 3, got: n });
    }
    let terms = d - 1;
    // Column-major copy so the inner loops over j run on contiguous slices.
    let cols: Vec<Vec<f64>> = (0..d).map(|k| s.column(k)).collect();
    let mut row_a = vec![vec![0.0; n]; terms];
    let mut row_b = vec![vec![0.0; n]; terms];
    let mut cross = vec![0.0; terms];
    let mut tail = vec![0.0; n];
    let mut b_buf = vec![0.0; n];

    for i in 0..n {
        let m = n - i - 1;
        if m == 0 {
            break;
        }
        let tail = &mut tail[..m];
        let b_buf = &mut b_buf[..m];
        let last = &cols[d - 1];
        let xi = last[i];
        for (t, &x) in tail.iter_mut().zip(&last[i + 1..]) {
            let diff = xi - x;
            *t = diff * diff;
        }
        for k in (0..terms).rev() {
            if k == terms - 1 {
                for (b, &x) in b_buf.iter_mut().zip(&last[i + 1..]) {
                    *b = (xi - x).abs();
                }
            } else {
                for (b, &t) in b_buf.iter_mut().zip(tail.iter()) {
                    *b = libm::sqrt(t);
                }
            }
            let col = &cols[k];
            let xk = col[i];
            let mut sum_a = [0.0; 4];
            let mut sum_b = [0.0; 4];
            let mut sum_ab = [0.0; 4];
            let ra = &mut row_a[k][i + 1..];
            let rb = &mut row_b[k][i + 1..];
            let xs = &col[i + 1..];
            for j in 0..m {
                let diff = xk - xs[j];
                let a = diff.abs();
                let b = b_buf[j];
                let lane = j & 3;
                sum_a[lane] += a;
                sum_b[lane] += b;
                sum_ab[lane] += a * b;
                ra[j] += a;
                rb[j] += b;
                tail[j] += diff * diff;
            }
            row_a[k][i] += (sum_a[0] + sum_a[1]) + (sum_a[2] + sum_a[3]);
            row_b[k][i] += (sum_b[0] + sum_b[1]) + (sum_b[2] + sum_b[3]);
            cross[k] += (sum_ab[0] + sum_ab[1]) + (sum_ab[2] + sum_ab[3]);
        }
    }

    Ok((0..terms)
        .map(|k| DcovStat::from_sums(n, cross[k], &row_a[k], &row_b[k]))
        .collect())
}

/// `Σ_k I_n(S_k, S_{k+})`.
pub fn chained_dcov_sum(s: &Matrix) -> Result<f64> {
    Ok(chained_dcov(s)?.iter().map(|t| t.i_n).sum())
}
