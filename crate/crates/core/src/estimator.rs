//! Estimation of the separating rotation.
//!
//! Given whitened data `Z`, the sources for angles `θ` are `S(θ) = Z W(θ)′`.
//! The objective is `Σ_k ℐ_n(S_k, S_{k+1..d})`, computed on the raw sources
//! ([`Estimator::Dcov`]) or after a smoothed probability integral transform
//! of every column ([`Estimator::PitDcov`]). Minimization scans a Latin
//! hypercube of starting angles and polishes the best ones with Nelder–Mead.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::Rng as _;

use crate::dcov::{chained_dcov, chained_dcov_sum};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::par;
use crate::pit::smoothed_pit;
use crate::rng;
use crate::rotations::{self, n_angles, RotationAngles, RotationMatrix};
use crate::samples::{self, Whitening};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Distance covariance of the sources themselves.
    Dcov,
    /// Distance covariance after a kernel-smoothed PIT of each source.
    PitDcov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// All angles at once.
    Joint,
    /// One row of angles at a time, earlier rows frozen, later rows zero.
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub estimator: Estimator,
    pub mode: FitMode,
    /// Latin hypercube points scanned before local search.
    pub n_starts: usize,
    /// Multiplier on Silverman's bandwidth for [`Estimator::PitDcov`].
    pub bandwidth_scale: f64,
    /// Nelder–Mead iteration cap; `None` means `200` per free angle.
    pub max_iters: Option<usize>,
    pub f_tol: f64,
    pub seed: u64,
    /// Number of best scan points polished by local search.
    pub n_local: usize,
    /// Initial simplex edge in radians.
    pub initial_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            estimator: Estimator::Dcov,
            mode: FitMode::Joint,
            n_starts: 1000,
            bandwidth_scale: 1.0,
            max_iters: None,
            f_tol: 1e-8,
            seed: 0,
            n_local: 1,
            initial_step: 0.1,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::InvalidArgument("n_starts must be at least 1"));
        }
        if self.n_local == 0 {
            return Err(Error::InvalidArgument("n_local must be at least 1"));
        }
        if !(self.f_tol > 0.0) || !(self.initial_step > 0.0) {
            return Err(Error::InvalidArgument("tolerances and step must be positive"));
        }
        if !(self.bandwidth_scale > 0.0) {
            return Err(Error::InvalidArgument("bandwidth scale must be positive"));
        }
        if self.max_iters == Some(0) {
            return Err(Error::InvalidArgument("max_iters must be at least 1"));
        }
        Ok(())
    }

    fn nm_options(&self, free: usize) -> NelderMeadOptions {
        NelderMeadOptions {
            f_tol: self.f_tol,
            x_tol: 1e-6,
            max_iters: self.max_iters.unwrap_or(200 * free.max(1)),
            initial_step: self.initial_step,
        }
    }
}

/// Result of a fit. With `y` the observations, `Ŝ = (y − mean) O′ W′` and
/// `M̂ = O⁻¹ W′`.
#[derive(Debug, Clone)]
pub struct IcaFit {
    pub theta: RotationAngles,
    pub w: RotationMatrix,
    pub uncorrelating: Matrix,
    pub mixing: Matrix,
    pub sources: Matrix,
    pub mean: Vec<f64>,
    pub objective: f64,
    pub starts_evaluated: usize,
    pub iterations: usize,
    pub converged: bool,
    pub options: FitOptions,
}

impl IcaFit {
    /// `M̂⁻¹ = W O`.
    pub fn unmixing(&self) -> Matrix {
        self.w.as_matrix().matmul(&self.uncorrelating)
    }
}

/// `S = Z W′` restricted to rows `from..` of `W`.
fn sources_from(theta: &RotationAngles, z: &Matrix, from: usize) -> Matrix {
    let w = rotations::w_from_theta(theta);
    z.matmul_t(&w.row_block(from, w.rows()))
}

fn transformed(s: Matrix, estimator: Estimator, bandwidth_scale: f64) -> Result<Matrix> {
    match estimator {
        Estimator::Dcov => Ok(s),
        Estimator::PitDcov => smoothed_pit(&s, bandwidth_scale),
    }
}

/// `Σ_k ℐ_n(S_k, S_{k+1..d})` on the sources `Z W(θ)′`.
pub fn objective_dcov(theta: &RotationAngles, z: &Matrix) -> Result<f64> {
    objective(theta, z, Estimator::Dcov, 1.0)
}

/// As [`objective_dcov`] with each source column passed through the
/// smoothed PIT first. The bandwidth is re-estimated from the sources at
/// every `θ`.
pub fn objective_pitdcov(theta: &RotationAngles, z: &Matrix, bandwidth_scale: f64) -> Result<f64> {
    objective(theta, z, Estimator::PitDcov, bandwidth_scale)
}

pub fn objective(
    theta: &RotationAngles,
    z: &Matrix,
    estimator: Estimator,
    bandwidth_scale: f64,
) -> Result<f64> {
    check_dims(theta, z)?;
    let s = transformed(sources_from(theta, z, 0), estimator, bandwidth_scale)?;
    chained_dcov_sum(&s)
}

/// The single summand `ℐ_n(S_k, S_{k+1..d})` (stage `k`, zero-based). It
/// depends only on the angles of stages `0..=k`.
pub fn stage_objective(
    theta: &RotationAngles,
    z: &Matrix,
    k: usize,
    estimator: Estimator,
    bandwidth_scale: f64,
) -> Result<f64> {
    check_dims(theta, z)?;
    if k + 1 >= z.cols() {
        return Err(Error::IndexOutOfRange { index: k, dim: z.cols() - 1 });
    }
    let s = transformed(sources_from(theta, z, k), estimator, bandwidth_scale)?;
    Ok(chained_dcov(&s)?[0].i_n)
}

fn check_dims(theta: &RotationAngles, z: &Matrix) -> Result<()> {
    if z.cols() < 2 {
        return Err(Error::TooFewColumns { needed: 2, got: z.cols() });
    }
    if theta.dim() != z.cols() {
        return Err(Error::DimensionMismatch { expected: z.cols(), got: theta.dim() });
    }
    Ok(())
}

/// Latin hypercube over `Π [0, upper_i)`: in every coordinate each of the
/// `n_points` equal-width bins holds exactly one point.
pub fn latin_hypercube(uppers: &[f64], n_points: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; uppers.len()]; n_points];
    let mut bins: Vec<usize> = (0..n_points).collect();
    for (c, &upper) in uppers.iter().enumerate() {
        for i in (1..n_points).rev() {
            let j = rng.random_range(0..=i);
            bins.swap(i, j);
        }
        for (point, &bin) in points.iter_mut().zip(&bins) {
            let u: f64 = rng.random();
            point[c] = upper * (bin as f64 + u) / n_points as f64;
        }
    }
    points
}

/// Latin hypercube over the full angle domain of dimension `d`.
pub fn latin_hypercube_init(d: usize, n_points: usize, seed: u64) -> Vec<RotationAngles> {
    let uppers: Vec<f64> = (0..n_angles(d)).map(|idx| RotationAngles::upper_bound(d, idx)).collect();
    let mut rng = rng::stream(seed, 0);
    latin_hypercube(&uppers, n_points, &mut rng)
        .into_iter()
        .map(|t| RotationAngles::new(d, t).expect("finite angles"))
        .collect()
}

struct Search {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Scans `starts`, then polishes the best `n_local` with Nelder–Mead and
/// keeps the lowest value. Ties go to the earlier start.
fn multistart<F>(f: F, starts: &[Vec<f64>], opts: &FitOptions, free: usize) -> Search
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let values = par::map_indices(starts.len(), |i| f(&starts[i]));
    let mut ranked: Vec<usize> = (0..starts.len()).collect();
    ranked.sort_by(|&a, &b| clean(values[a]).total_cmp(&clean(values[b])).then(a.cmp(&b)));
    let nm = opts.nm_options(free);
    let local = ranked.len().min(opts.n_local);
    let runs = par::map_indices(local, |r| nelder_mead(&f, &starts[ranked[r]], &nm));
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if clean(run.f) < clean(runs[best].f) {
            best = r;
        }
    }
    let run = &runs[best];
    Search { x: run.x.clone(), iterations: run.iters, converged: run.converged }
}

fn clean(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn finish(
    theta: RotationAngles,
    z: &Matrix,
    opts: &FitOptions,
    starts_evaluated: usize,
    iterations: usize,
    converged: bool,
) -> Result<IcaFit> {
    let d = z.cols();
    let w = rotations::w_from_theta(&theta);
    let theta = rotations::theta_from_w(&w).unwrap_or_else(|_| theta.wrapped());
    let objective = objective(&theta, z, opts.estimator, opts.bandwidth_scale)?;
    let sources = z.matmul_t(&w);
    Ok(IcaFit {
        theta,
        mixing: w.transpose(),
        w: RotationMatrix::new(w)?,
        uncorrelating: Matrix::identity(d),
        sources,
        mean: vec![0.0; d],
        objective,
        starts_evaluated,
        iterations,
        converged,
        options: opts.clone(),
    })
}

fn check_input(z: &Matrix, opts: &FitOptions) -> Result<()> {
    opts.validate()?;
    if z.cols() < 2 {
        return Err(Error::TooFewColumns { needed: 2, got: z.cols() });
    }
    if z.rows() < 3 {
        return Err(Error::TooFewRows { needed: 3, got: z.rows() });
    }
    samples::check_finite(z)
}

/// Minimizes the full objective over all angles of whitened data `z`.
pub fn fit_joint(z: &Matrix, opts: &FitOptions) -> Result<IcaFit> {
    check_input(z, opts)?;
    let d = z.cols();
    let starts: Vec<Vec<f64>> = latin_hypercube_init(d, opts.n_starts, opts.seed)
        .into_iter()
        .map(RotationAngles::into_vec)
        .collect();
    let f = |x: &[f64]| {
        let theta = RotationAngles::new(d, x.to_vec());
        theta
            .and_then(|t| objective(&t, z, opts.estimator, opts.bandwidth_scale))
            .unwrap_or(f64::INFINITY)
    };
    let found = multistart(f, &starts, opts, n_angles(d));
    let theta = RotationAngles::new(d, found.x)?;
    finish(theta, z, opts, starts.len(), found.iterations, found.converged)
}

/// Solves the stages one after another: stage `k` minimizes
/// `ℐ_n(S_k, S_{k+1..d})` over its own angles with earlier stages fixed at
/// their estimates and later angles at zero. Stage `k` draws its starting
/// design from stream `k`, so two-dimensional fits match [`fit_joint`].
pub fn fit_sequential(z: &Matrix, opts: &FitOptions) -> Result<IcaFit> {
    check_input(z, opts)?;
    let d = z.cols();
    let mut theta = vec![0.0; n_angles(d)];
    let mut iterations = 0;
    let mut converged = true;
    for k in 0..d - 1 {
        let range = RotationAngles::stage_range(d, k);
        let uppers = vec![if k == 0 { TAU } else { PI }; range.len()];
        let mut rng = rng::stream(opts.seed, k as u64);
        let starts = latin_hypercube(&uppers, opts.n_starts, &mut rng);
        let base = theta.clone();
        let f = |x: &[f64]| {
            let mut full = base.clone();
            full[range.clone()].copy_from_slice(x);
            RotationAngles::new(d, full)
                .and_then(|t| stage_objective(&t, z, k, opts.estimator, opts.bandwidth_scale))
                .unwrap_or(f64::INFINITY)
        };
        let found = multistart(f, &starts, opts, range.len());
        theta[range].copy_from_slice(&found.x);
        iterations += found.iterations;
        converged &= found.converged;
    }
    let theta = RotationAngles::new(d, theta)?;
    finish(theta, z, opts, opts.n_starts * (d - 1), iterations, converged)
}

/// Fits whitened data with the configured mode.
pub fn fit_whitened(z: &Matrix, opts: &FitOptions) -> Result<IcaFit> {
    match opts.mode {
        FitMode::Joint => fit_joint(z, opts),
        FitMode::Sequential => fit_sequential(z, opts),
    }
}

/// Full pipeline on raw observations: center, whiten, fit.
pub fn fit(y: &Matrix, opts: &FitOptions) -> Result<IcaFit> {
    let (z, whitening) = samples::whiten(y)?;
    let fit = fit_whitened(&z, opts)?;
    Ok(attach_whitening(fit, &whitening))
}

/// Re-expresses a fit of whitened data in terms of the original observations.
pub fn attach_whitening(mut fit: IcaFit, whitening: &Whitening) -> IcaFit {
    fit.mixing = whitening.inverse_uncorrelating().matmul_t(fit.w.as_matrix());
    fit.uncorrelating = whitening.uncorrelating.clone();
    fit.mean = whitening.mean.clone();
    fit
}

/// Sources implied by an estimated mixing matrix: `(y − mean) (M̂⁻¹)′`.
pub fn unmix(y: &Matrix, mixing: &Matrix, mean: &[f64]) -> Result<Matrix> {
    let inv = linalg::inverse(mixing)?;
    let mut c = y.clone();
    for i in 0..c.rows() {
        for (v, m) in c.row_mut(i).iter_mut().zip(mean) {
            *v -= m;
        }
    }
    Ok(c.matmul_t(&inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn uniform_mixture(n: usize, angle: f64, seed: u64) -> Matrix {
        let mut rng = rng::stream(seed, 0);
        let r3 = libm::sqrt(3.0);
        let s = Matrix::from_fn(n, 2, |_, _| (2.0 * rng.random::<f64>() - 1.0) * r3);
        let (sn, cs) = libm::sincos(angle);
        let m = Matrix::from_rows(&[&[cs, -sn], &[sn, cs]]).unwrap();
        s.matmul_t(&m)
    }

    #[test]
    fn lhs_strata() {
        let pts = latin_hypercube_init(2, 4, 9);
        let mut bins: Vec<usize> = pts.iter().map(|t| (t.as_slice()[0] / (TAU / 4.0)) as usize).collect();
        bins.sort();
        assert_eq!(bins, vec![0, 1, 2, 3]);
        let pts = latin_hypercube_init(3, 1000, 9);
        for c in 0..3 {
            let upper = RotationAngles::upper_bound(3, c);
            let mut bins: Vec<usize> =
                pts.iter().map(|t| (t.as_slice()[c] / upper * 1000.0) as usize).collect();
            bins.sort();
            assert_eq!(bins, (0..1000).collect::<Vec<_>>());
        }
        assert_eq!(latin_hypercube_init(3, 50, 4), latin_hypercube_init(3, 50, 4));
    }

    #[test]
    fn objective_row_permutation_invariant() {
        let (z, _) = samples::whiten(&uniform_mixture(60, 0.4, 1)).unwrap();
        let theta = RotationAngles::new(2, vec![0.9]).unwrap();
        let rev: Vec<usize> = (0..60).rev().collect();
        let a = objective_dcov(&theta, &z).unwrap();
        let b = objective_dcov(&theta, &z.select_rows(&rev)).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn stage_terms_ignore_later_angles() {
        let mut rng = rng::stream(2, 0);
        let z = Matrix::from_fn(80, 4, |_, _| rng.random::<f64>() - 0.5);
        let d = 4;
        for k in 0..d - 1 {
            let base: Vec<f64> = (0..n_angles(d)).map(|_| rng.random::<f64>() * 3.0).collect();
            let mut other = base.clone();
            for v in &mut other[RotationAngles::stage_range(d, k).end..] {
                *v = rng.random::<f64>() * 3.0;
            }
            let a = stage_objective(&RotationAngles::new(d, base).unwrap(), &z, k, Estimator::Dcov, 1.0).unwrap();
            let b = stage_objective(&RotationAngles::new(d, other).unwrap(), &z, k, Estimator::Dcov, 1.0).unwrap();
            assert!((a - b).abs() < 1e-12, "{k}: {a} {b}");
        }
    }

    #[test]
    fn recovers_two_uniforms() {
        let y = uniform_mixture(500, 0.6, 3);
        let truth = {
            let (sn, cs) = libm::sincos(0.6);
            Matrix::from_rows(&[&[cs, -sn], &[sn, cs]]).unwrap()
        };
        for estimator in [Estimator::Dcov, Estimator::PitDcov] {
            let opts = FitOptions { n_starts: 50, estimator, seed: 5, ..Default::default() };
            let fit = fit(&y, &opts).unwrap();
            let err = crate::metrics::mixing_distance(&truth, &fit.mixing).unwrap();
            assert!(err < 0.1, "{estimator:?} {err}");
            assert!(fit.sources.covariance().max_abs_diff(&Matrix::identity(2)) < 1e-6);
            assert!(fit.mixing.matmul(&fit.unmixing()).max_abs_diff(&Matrix::identity(2)) < 1e-8);
        }
    }

    #[test]
    fn two_dimensional_modes_agree() {
        let (z, _) = samples::whiten(&uniform_mixture(200, 1.0, 4)).unwrap();
        let joint = fit_joint(&z, &FitOptions { n_starts: 20, ..Default::default() }).unwrap();
        let seq = fit_sequential(&z, &FitOptions { n_starts: 20, mode: FitMode::Sequential, ..Default::default() })
            .unwrap();
        assert_eq!(joint.theta, seq.theta);
        assert_eq!(joint.objective, seq.objective);
    }

    #[test]
    fn invalid_options() {
        let z = Matrix::identity(3);
        assert!(fit_joint(&z, &FitOptions { n_starts: 0, ..Default::default() }).is_err());
        assert!(fit_joint(&Matrix::zeros(10, 1), &FitOptions::default()).is_err());
    }
}
