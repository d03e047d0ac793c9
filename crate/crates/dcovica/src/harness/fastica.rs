//! Symmetric FastICA with the log-cosh contrast, used as a baseline.

use dcovica_core::estimator::{self, FitOptions};
use dcovica_core::{linalg, rng, rotations, IcaFit, Matrix, Result, RotationMatrix};

use super::mixing::haar_orthogonal;

pub const FASTICA_TOL: f64 = 1e-8;
pub const FASTICA_MAX_ITERS: usize = 500;

/// `W ← (W W′)^{-1/2} W`.
fn decorrelate(w: &Matrix) -> Result<Matrix> {
    let s = linalg::inverse_sqrt_spd(&w.matmul_t(w))?;
    Ok(s.matmul(w))
}

/// Fits whitened data `z` by the symmetric fixed-point iteration
/// `w ← E[z g(w′z)] − E[g′(w′z)] w`, `g = tanh`, from a Haar-random start.
///
/// The returned rotation has determinant `+1` (the last row is negated if
/// needed, which is one of the sign ambiguities). `objective` holds the
/// dCov objective of the estimated sources, and `iterations` the number of
/// fixed-point steps.
pub fn fastica_baseline(z: &Matrix, seed: u64) -> Result<IcaFit> {
    let n = z.rows();
    let d = z.cols();
    if d < 2 {
        return Err(dcovica_core::Error::TooFewColumns { needed: 2, got: d });
    }
    if n < 3 {
        return Err(dcovica_core::Error::TooFewRows { needed: 3, got: n });
    }
    let mut rng = rng::stream(seed, 0);
    let mut w = haar_orthogonal(d, &mut rng);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < FASTICA_MAX_ITERS {
        iterations += 1;
        let u = z.matmul_t(&w);
        let mut next = Matrix::zeros(d, d);
        for k in 0..d {
            let mut mean_dg = 0.0;
            for i in 0..n {
                let g = u[(i, k)].tanh();
                mean_dg += 1.0 - g * g;
                for (acc, zv) in next.row_mut(k).iter_mut().zip(z.row(i)) {
                    *acc += zv * g;
                }
            }
            mean_dg /= n as f64;
            for (acc, wv) in next.row_mut(k).iter_mut().zip(w.row(k)) {
                *acc = *acc / n as f64 - mean_dg * wv;
            }
        }
        let next = decorrelate(&next)?;
        let change = (0..d)
            .map(|k| {
                let dot: f64 = next.row(k).iter().zip(w.row(k)).map(|(a, b)| a * b).sum();
                (dot.abs() - 1.0).abs()
            })
            .fold(0.0, f64::max);
        w = next;
        if change < FASTICA_TOL {
            converged = true;
            break;
        }
    }
    if linalg::determinant(&w)? < 0.0 {
        for v in w.row_mut(d - 1) {
            *v = -*v;
        }
    }
    // Re-orthonormalize so the rotation check passes at full precision.
    let w = decorrelate(&w)?;
    let theta = rotations::theta_from_w(&w)?;
    let sources = z.matmul_t(&w);
    let objective = estimator::objective_dcov(&theta, z)?;
    Ok(IcaFit {
        theta,
        mixing: w.transpose(),
        w: RotationMatrix::new(w)?,
        uncorrelating: Matrix::identity(d),
        sources,
        mean: vec![0.0; d],
        objective,
        starts_evaluated: 1,
        iterations,
        converged,
        options: FitOptions { seed, n_starts: 1, ..FitOptions::default() },
    })
}
