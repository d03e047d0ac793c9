//! Random well-conditioned mixing matrices.

use dcovica_core::{linalg, rng, Error, Matrix, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Haar-distributed orthogonal matrix: Gram–Schmidt on a Gaussian matrix,
/// which is its QR factor with a positive diagonal in `R`.
pub fn haar_orthogonal<R: Rng>(d: usize, rng: &mut R) -> Matrix {
    loop {
        let g = Matrix::from_fn(d, d, |_, _| rng.sample(StandardNormal));
        let mut cols: Vec<Vec<f64>> = (0..d).map(|j| g.column(j)).collect();
        let mut ok = true;
        for j in 0..d {
            for k in 0..j {
                let proj: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
                let (head, tail) = cols.split_at_mut(j);
                for (v, q) in tail[0].iter_mut().zip(&head[k]) {
                    *v -= proj * q;
                }
            }
            let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-10 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|v| *v /= norm);
        }
        if ok {
            return Matrix::from_columns(&cols).expect("square");
        }
    }
}

/// `M₀ = U diag(σ) V′` with Haar `U`, `V` and `σ_max/σ_min` uniform on
/// `[cond_lo, cond_hi]`. The smallest singular value is 1, the largest is
/// the drawn ratio, and the others are uniform in between.
pub fn random_mixing(d: usize, cond_lo: f64, cond_hi: f64, seed: u64) -> Result<Matrix> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive"));
    }
    if !(cond_lo >= 1.0 && cond_lo <= cond_hi && cond_hi.is_finite()) {
        return Err(Error::InvalidArgument("need 1 <= cond_lo <= cond_hi"));
    }
    if d == 1 && cond_lo > 1.0 {
        return Err(Error::InvalidArgument("a 1x1 matrix has condition number 1"));
    }
    let mut rng = rng::stream(seed, 0);
    let kappa = if d == 1 { 1.0 } else { cond_lo + (cond_hi - cond_lo) * rng.random::<f64>() };
    let mut sigma = vec![1.0; d];
    sigma[0] = kappa;
    for s in sigma.iter_mut().take(d.saturating_sub(1)).skip(1) {
        *s = 1.0 + (kappa - 1.0) * rng.random::<f64>();
    }
    let u = haar_orthogonal(d, &mut rng);
    let v = haar_orthogonal(d, &mut rng);
    let us = Matrix::from_fn(d, d, |i, j| u[(i, j)] * sigma[j]);
    let m = us.matmul_t(&v);
    let cond = linalg::condition_number(&m)?;
    if !(cond >= cond_lo * (1.0 - 1e-9) && cond <= cond_hi * (1.0 + 1e-9)) {
        return Err(Error::SingularMatrix);
    }
    Ok(m)
}
