//! Probability integral transforms: normalized ranks and a Gaussian-kernel
//! smoothed CDF with Silverman's bandwidth.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Past this many bandwidths the Gaussian upper tail is below half an ulp of
/// one and contributes nothing to a sum of order one.
const TAIL_CUTOFF: f64 = 8.5;

/// Standard Gaussian CDF.
#[inline]
pub fn gaussian_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `1 - Φ(u)` without cancellation.
#[inline]
fn gaussian_upper_tail(u: f64) -> f64 {
    0.5 * libm::erfc(u / SQRT_2)
}

/// Knots per unit of the tail table.
const TABLE_DENSITY: f64 = 128.0;

/// Piecewise-cubic Hermite interpolant of `1 - Φ` on `[0, TAIL_CUTOFF]`,
/// matching values and slopes at every knot. Absolute error is below
/// `1e-11`, and the interpolant is continuously differentiable.
struct TailTable {
    coeffs: Vec<[f64; 4]>,
}

impl TailTable {
    fn new() -> TailTable {
        let intervals = (TAIL_CUTOFF * TABLE_DENSITY) as usize;
        let h = 1.0 / TABLE_DENSITY;
        let density = |u: f64| libm::exp(-0.5 * u * u) / libm::sqrt(2.0 * core::f64::consts::PI);
        let knots: Vec<(f64, f64)> = (0..=intervals)
            .map(|k| {
                let u = k as f64 * h;
                (gaussian_upper_tail(u), -density(u) * h)
            })
            .collect();
        let coeffs = knots
            .windows(2)
            .map(|w| {
                let (p0, m0) = w[0];
                let (p1, m1) = w[1];
                [
                    p0,
                    m0,
                    -3.0 * p0 - 2.0 * m0 + 3.0 * p1 - m1,
                    2.0 * p0 + m0 - 2.0 * p1 + m1,
                ]
            })
            .collect();
        TailTable { coeffs }
    }

    /// `1 - Φ(u)` for `0 ≤ u ≤ TAIL_CUTOFF`.
    #[inline]
    fn eval(&self, u: f64) -> f64 {
        let t = u * TABLE_DENSITY;
        let i = (t as usize).min(self.coeffs.len() - 1);
        let f = t - i as f64;
        let [a, b, c, d] = self.coeffs[i];
        a + f * (b + f * (c + f * d))
    }
}

/// Average ranks (1-based) of `col`, ties sharing the mean of their ranks.
pub fn average_ranks(col: &[f64]) -> Vec<f64> {
    let n = col.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && col[idx[end]] == col[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Replaces each entry by its within-column rank divided by `n`.
pub fn rank_transform(s: &Matrix) -> Result<Matrix> {
    let n = s.rows();
    if n == 0 {
        return Err(Error::Empty);
    }
    let mut out = Matrix::zeros(n, s.cols());
    for j in 0..s.cols() {
        let ranks = average_ranks(&s.column(j));
        for (i, r) in ranks.into_iter().enumerate() {
            out[(i, j)] = r / n as f64;
        }
    }
    Ok(out)
}

/// Quantile with linear interpolation between order statistics (the
/// "type 7" definition). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n as f64 - 1.0) * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sample_sd(col: &[f64]) -> f64 {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    libm::sqrt(col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
}

fn silverman_sorted(col: &[f64], sorted: &[f64]) -> Result<f64> {
    let n = col.len();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let sd = sample_sd(col);
    let scale = sorted[n - 1].abs().max(sorted[0].abs()).max(f64::MIN_POSITIVE);
    if !(sd > 1e-14 * scale) {
        return Err(Error::DegenerateScale { column: 0 });
    }
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let mut spread = sd.min(iqr / 1.34);
    if !(spread > 0.0) {
        // Heavy ties can collapse the IQR; fall back to the standard deviation.
        spread = sd;
    }
    Ok(0.9 * spread * libm::pow(n as f64, -0.2))
}

/// `0.9 min(sd, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(col: &[f64]) -> Result<f64> {
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    silverman_sorted(col, &sorted)
}

/// Gaussian-kernel estimate of a column's CDF, `F(x) = (1/n) Σ Φ((x - k_i)/h)`.
#[derive(Debug, Clone)]
pub struct SmoothedCdf {
    knots: Vec<f64>,
    bandwidth: f64,
}

impl SmoothedCdf {
    /// Fits the estimator with `bandwidth_scale` times Silverman's bandwidth.
    pub fn fit(col: &[f64], bandwidth_scale: f64) -> Result<SmoothedCdf> {
        if !(bandwidth_scale > 0.0) {
            return Err(Error::InvalidArgument("bandwidth scale must be positive"));
        }
        let mut knots = col.to_vec();
        knots.sort_by(f64::total_cmp);
        let bandwidth = bandwidth_scale * silverman_sorted(col, &knots)?;
        Ok(SmoothedCdf { knots, bandwidth })
    }

    pub fn with_bandwidth(col: &[f64], bandwidth: f64) -> Result<SmoothedCdf> {
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidArgument("bandwidth must be positive"));
        }
        let mut knots = col.to_vec();
        knots.sort_by(f64::total_cmp);
        Ok(SmoothedCdf { knots, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn eval(&self, x: f64) -> f64 {
        let sum: f64 = self
            .knots
            .iter()
            .map(|k| gaussian_cdf((x - k) / self.bandwidth))
            .sum();
        sum / self.knots.len() as f64
    }

    /// The estimate evaluated at its own knots, in the original order of
    /// `col`. Exploits `Φ(-u) = 1 - Φ(u)` so each pair needs one tail
    /// evaluation, reads the tail from the interpolation table, and skips
    /// pairs beyond the tail cutoff.
    fn eval_at_knots(&self, table: &TailTable, order: &[usize], out: &mut [f64]) {
        let v = &self.knots;
        let n = v.len();
        let h = self.bandwidth;
        let reach = TAIL_CUTOFF * h;
        let mut acc = vec![0.5; n];
        // jump[j] counts knots i with v_j - v_i beyond the cutoff (each adds 1).
        let mut jump = vec![0.0; n + 1];
        for i in 0..n {
            let mut j = i + 1;
            while j < n && v[j] - v[i] <= reach {
                let q = table.eval((v[j] - v[i]) / h);
                acc[j] += 1.0 - q;
                acc[i] += q;
                j += 1;
            }
            jump[j] += 1.0;
        }
        let mut run = 0.0;
        for j in 0..n {
            run += jump[j];
            acc[j] += run;
        }
        let nf = n as f64;
        for (sorted_pos, &orig) in order.iter().enumerate() {
            out[orig] = acc[sorted_pos] / nf;
        }
    }
}

/// Smoothed PIT of one column at its own observations.
pub fn smoothed_pit_column(col: &[f64], bandwidth_scale: f64) -> Result<Vec<f64>> {
    pit_column_with(&TailTable::new(), col, bandwidth_scale)
}

fn pit_column_with(table: &TailTable, col: &[f64], bandwidth_scale: f64) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..col.len()).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let cdf = SmoothedCdf::fit(col, bandwidth_scale)?;
    let mut out = vec![0.0; col.len()];
    cdf.eval_at_knots(table, &order, &mut out);
    Ok(out)
}

/// Applies the smoothed PIT column by column, each column with its own
/// Silverman bandwidth times `bandwidth_scale`.
pub fn smoothed_pit(s: &Matrix, bandwidth_scale: f64) -> Result<Matrix> {
    let table = TailTable::new();
    let mut out = Matrix::zeros(s.rows(), s.cols());
    for j in 0..s.cols() {
        let col = s.column(j);
        let t = pit_column_with(&table, &col, bandwidth_scale).map_err(|e| match e {
            Error::DegenerateScale { .. } => Error::DegenerateScale { column: j },
            other => other,
        })?;
        out.set_column(j, &t);
    }
    Ok(out)
}
