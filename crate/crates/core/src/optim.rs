//! Derivative-free local minimization.

use alloc::vec;
use alloc::vec::Vec;

/// Stopping rules for [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Converged once the spread of objective values over the simplex is at
    /// most `f_tol` and every vertex lies within `x_tol` (max norm) of the
    /// best one.
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_iters: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { f_tol: 1e-8, x_tol: 1e-6, max_iters: 200, initial_step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex search with the standard reflection, expansion,
/// contraction and shrink coefficients (1, 2, 1/2, 1/2).
///
/// Non-finite objective values are treated as `+∞`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let fx = eval(x0);
        return Minimum { x: Vec::new(), f: fx, iters: 0, evals: 1, converged: true };
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    let mut iters = 0;
    let mut converged = false;
    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let spread = values[worst] - values[best];
        let size = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.is_finite() && spread <= opts.f_tol && size <= opts.x_tol {
            converged = true;
            break;
        }
        if iters >= opts.max_iters {
            break;
        }
        iters += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &idx in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += v;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        let towards = |out: &mut [f64], t: f64, from: &[f64], c: &[f64]| {
            for ((o, x), m) in out.iter_mut().zip(from).zip(c) {
                *o = m + t * (x - m);
            }
        };

        towards(&mut trial, -1.0, &simplex[worst], &centroid);
        let fr = eval(&trial);
        if fr < values[best] {
            towards(&mut trial2, -2.0, &simplex[worst], &centroid);
            let fe = eval(&trial2);
            if fe < fr {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fe;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second_worst] {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = fr;
            continue;
        }
        // Contract toward the better of the worst vertex and its reflection.
        let (t, bound) = if fr < values[worst] { (-0.5, fr) } else { (0.5, values[worst]) };
        towards(&mut trial2, t, &simplex[worst], &centroid);
        let fc = eval(&trial2);
        if fc < bound {
            simplex[worst].copy_from_slice(&trial2);
            values[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for &idx in &order[1..] {
            for (v, a) in simplex[idx].iter_mut().zip(&anchor) {
                *v = a + 0.5 * (*v - a);
            }
            values[idx] = eval(&simplex[idx]);
        }
    }

    let best = order[0];
    Minimum { x: simplex[best].clone(), f: values[best], iters, evals, converged }
}
