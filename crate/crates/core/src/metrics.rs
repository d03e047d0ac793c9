//! Mixing-matrix error that ignores the order, sign and scale ambiguities
//! of independent component analysis.
//!
//! With `G = M̂⁻¹ M₀`, the error is
//! `D = min_C ‖C G − I‖_F / √(d−1)` over signed permutations times positive
//! diagonal scalings `C`. For a fixed assignment of rows the optimal scale of
//! each row has a closed form, so only the assignment needs searching.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Matrices with a condition number at or above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Largest dimension searched exhaustively; larger problems use the
/// Hungarian algorithm.
pub const EXHAUSTIVE_MAX_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBreakdown {
    pub distance: f64,
    /// `best_permutation[i]` is the row of `G` placed at output row `i`.
    pub best_permutation: Vec<usize>,
    /// Signed scale applied to that row.
    pub best_scales: Vec<f64>,
}

fn check_pair(m0: &Matrix, m_hat: &Matrix) -> Result<()> {
    if !m0.is_square() || !m_hat.is_square() {
        return Err(Error::InvalidArgument("mixing matrices must be square"));
    }
    if m0.rows() != m_hat.rows() {
        return Err(Error::DimensionMismatch { expected: m0.rows(), got: m_hat.rows() });
    }
    if m0.rows() < 2 {
        return Err(Error::TooFewColumns { needed: 2, got: m0.rows() });
    }
    for m in [m0, m_hat] {
        if let Some((row, col)) = m.first_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
        if !(linalg::condition_number(m).map_err(|_| Error::SingularMatrix)? < MAX_CONDITION) {
            return Err(Error::SingularMatrix);
        }
    }
    Ok(())
}

fn relative_product(m0: &Matrix, m_hat: &Matrix) -> Result<Matrix> {
    check_pair(m0, m_hat)?;
    Ok(linalg::inverse(m_hat)?.matmul(m0))
}

/// `cost[i][r]`: residual of output row `i` when built from row `r` of `g`.
fn cost_matrix(g: &Matrix) -> Vec<Vec<f64>> {
    let d = g.rows();
    let norms: Vec<f64> = (0..d).map(|r| g.row(r).iter().map(|v| v * v).sum()).collect();
    (0..d)
        .map(|i| (0..d).map(|r| 1.0 - g[(r, i)] * g[(r, i)] / norms[r]).collect())
        .collect()
}

fn exhaustive_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    fn search(
        cost: &[Vec<f64>],
        row: usize,
        used: &mut [bool],
        current: &mut Vec<usize>,
        partial: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        let d = cost.len();
        if row == d {
            if partial < best.0 {
                *best = (partial, current.clone());
            }
            return;
        }
        for r in 0..d {
            if used[r] {
                continue;
            }
            let next = partial + cost[row][r];
            if next >= best.0 {
                continue;
            }
            used[r] = true;
            current.push(r);
            search(cost, row + 1, used, current, next, best);
            current.pop();
            used[r] = false;
        }
    }
    let d = cost.len();
    let mut best = (f64::INFINITY, (0..d).collect());
    search(cost, 0, &mut vec![false; d], &mut Vec::with_capacity(d), 0.0, &mut best);
    best.1
}

/// Minimum-cost assignment by the Hungarian algorithm with potentials.
/// Returns `assign[i]`, the column matched to row `i`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row (1-based) matched to column j; column 0 is a sentinel.
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

/// Ambiguity-invariant distance between a true and an estimated mixing
/// matrix.
pub fn mixing_error(m0: &Matrix, m_hat: &Matrix) -> Result<ErrorBreakdown> {
    let g = relative_product(m0, m_hat)?;
    let d = g.rows();
    let cost = cost_matrix(&g);
    let perm = if d <= EXHAUSTIVE_MAX_DIM {
        exhaustive_assignment(&cost)
    } else {
        hungarian(&cost)
    };
    let total: f64 = perm.iter().enumerate().map(|(i, &r)| cost[i][r]).sum();
    let scales = perm
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let norm: f64 = g.row(r).iter().map(|v| v * v).sum();
            g[(r, i)] / norm
        })
        .collect();
    Ok(ErrorBreakdown {
        distance: libm::sqrt(total.max(0.0)) / libm::sqrt((d - 1) as f64),
        best_permutation: perm,
        best_scales: scales,
    })
}

/// Distance only.
pub fn mixing_distance(m0: &Matrix, m_hat: &Matrix) -> Result<f64> {
    mixing_error(m0, m_hat).map(|e| e.distance)
}

/// Log-spaced grid of positive scales for [`mixing_error_brute`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl ScaleGrid {
    pub fn values(&self) -> Vec<f64> {
        let (a, b) = (libm::log(self.lo), libm::log(self.hi));
        (0..self.points)
            .map(|k| libm::exp(a + (b - a) * k as f64 / (self.points - 1) as f64))
            .collect()
    }

    /// Ratio between neighbouring grid values, minus one.
    pub fn relative_step(&self) -> f64 {
        libm::pow(self.hi / self.lo, 1.0 / (self.points - 1) as f64) - 1.0
    }
}

/// Dense-search reference for [`mixing_error`]: every signed permutation
/// and every grid scale per row. Limited to `d ≤ 3`.
pub fn mixing_error_brute(m0: &Matrix, m_hat: &Matrix, grid: &ScaleGrid) -> Result<f64> {
    if m0.rows() > 3 {
        return Err(Error::InvalidArgument("brute-force metric supports d <= 3"));
    }
    if !(grid.points >= 2 && grid.lo > 0.0 && grid.hi > grid.lo) {
        return Err(Error::InvalidArgument("scale grid needs two or more increasing positive points"));
    }
    let g = relative_product(m0, m_hat)?;
    let d = g.rows();
    let scales = grid.values();
    let mut perm: Vec<usize> = (0..d).collect();
    let mut best = f64::INFINITY;
    permutations(&mut perm, 0, &mut |perm| {
        let mut total = 0.0;
        for (i, &r) in perm.iter().enumerate() {
            let mut row_best = f64::INFINITY;
            for &b in &scales {
                for sign in [1.0, -1.0] {
                    let c = sign * b;
                    let cost: f64 = (0..d)
                        .map(|j| {
                            let target = if j == i { 1.0 } else { 0.0 };
                            let e = c * g[(r, j)] - target;
                            e * e
                        })
                        .sum();
                    row_best = row_best.min(cost);
                }
            }
            total += row_best;
        }
        best = best.min(total);
    });
    Ok(libm::sqrt(best) / libm::sqrt((d - 1) as f64))
}

fn permutations(items: &mut [usize], k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}
