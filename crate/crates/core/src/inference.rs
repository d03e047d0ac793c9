//! Permutation and resampling tests built on ranked distance covariance.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::dcov::{chained_dcov_sum, dcov_ustat};
use crate::error::{Error, Result};
use crate::estimator::{self, FitOptions, IcaFit};
use crate::linalg::Matrix;
use crate::metrics;
use crate::par;
use crate::pit::rank_transform;
use crate::rng;

/// Observed statistic with its permutation or resampling distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    /// `(1 + #{replicates ≥ statistic}) / (1 + n_replicates)`.
    pub p_value: f64,
    /// Replicates that entered the p-value.
    pub n_replicates: usize,
    pub replicate_stats: Vec<f64>,
    pub seed: u64,
    /// Replicates discarded because a refit failed or did not converge.
    pub n_dropped: usize,
}

impl TestResult {
    pub fn from_replicates(statistic: f64, replicate_stats: Vec<f64>, seed: u64, n_dropped: usize) -> Self {
        let exceed = replicate_stats.iter().filter(|&&r| r >= statistic).count();
        let n = replicate_stats.len();
        TestResult {
            statistic,
            p_value: (1 + exceed) as f64 / (1 + n) as f64,
            n_replicates: n,
            replicate_stats,
            seed,
            n_dropped,
        }
    }

    /// Whether the statistic exceeds the critical value at level `alpha`.
    pub fn rejects(&self, alpha: f64) -> bool {
        match kth_largest(&self.replicate_stats, alpha) {
            Some(c) => self.statistic > c,
            None => false,
        }
    }
}

/// The `k`-th largest value with `k = max(1, ⌊N α⌋)`, capped at `N`.
pub fn kth_largest(values: &[f64], alpha: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let k = (libm::floor(n as f64 * alpha) as usize).clamp(1, n);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Some(sorted[k - 1])
}

/// `n Σ_k ℐ_n(U_k, U_{k+1..d})` on the column ranks `U` of `s`.
pub fn mutual_independence_stat(s: &Matrix) -> Result<f64> {
    check_sample(s)?;
    ranked_stat(&rank_transform(s)?)
}

fn ranked_stat(u: &Matrix) -> Result<f64> {
    Ok(u.rows() as f64 * chained_dcov_sum(u)?)
}

fn check_sample(s: &Matrix) -> Result<()> {
    if s.cols() < 2 {
        return Err(Error::TooFewColumns { needed: 2, got: s.cols() });
    }
    if s.rows() < 3 {
        return Err(Error::TooFewRows { needed: 3, got: s.rows() });
    }
    crate::samples::check_finite(s)
}

fn shuffled_columns(s: &Matrix, rng: &mut rng::Rng) -> Matrix {
    let n = s.rows();
    let mut out = Matrix::zeros(n, s.cols());
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..s.cols() {
        order.shuffle(rng);
        for (i, &src) in order.iter().enumerate() {
            out[(i, j)] = s[(src, j)];
        }
    }
    out
}

/// Permutation test of mutual independence. Every replicate shuffles each
/// column with its own permutation; replicate `r` uses stream `r` of `seed`.
pub fn permutation_test_mutual(s: &Matrix, n_perm: usize, seed: u64) -> Result<TestResult> {
    if n_perm == 0 {
        return Err(Error::InvalidArgument("n_perm must be at least 1"));
    }
    check_sample(s)?;
    let u = rank_transform(s)?;
    let statistic = ranked_stat(&u)?;
    // Shuffling ranks equals ranking shuffled data.
    let reps = par::map_indices(n_perm, |r| {
        let mut rng = rng::stream(seed, r as u64);
        ranked_stat(&shuffled_columns(&u, &mut rng))
    });
    let reps = reps.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(TestResult::from_replicates(statistic, reps, seed, 0))
}

/// Uniform random permutation matrix with independent random row signs.
pub fn random_signed_permutation(d: usize, rng: &mut rng::Rng) -> Matrix {
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    let mut out = Matrix::zeros(d, d);
    for (i, &j) in perm.iter().enumerate() {
        out[(i, j)] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }
    out
}

fn ranked_lag_blocks(u: &Matrix, m: usize) -> (Matrix, Matrix) {
    let n = u.rows();
    let d = u.cols();
    let current = u.row_block(m, n);
    let lags = Matrix::from_fn(n - m, d * m, |t, c| {
        let lag = c / d + 1;
        u[(m + t - lag, c % d)]
    });
    (current, lags)
}

fn serial_ranked(u: &Matrix, m: usize) -> Result<f64> {
    let (current, lags) = ranked_lag_blocks(u, m);
    Ok((u.rows() - m) as f64 * dcov_ustat(&current, &lags)?.i_n)
}

fn check_serial(y: &Matrix, m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("lag count must be at least 1"));
    }
    if y.cols() == 0 {
        return Err(Error::TooFewColumns { needed: 1, got: 0 });
    }
    if y.rows() < m + 3 {
        return Err(Error::TooFewRows { needed: m + 3, got: y.rows() });
    }
    crate::samples::check_finite(y)
}

/// `(n − m) ℐ_n` between the ranked observations at times `m+1..n` and the
/// block of their first `m` lags.
pub fn serial_stat(y: &Matrix, m: usize) -> Result<f64> {
    check_serial(y, m)?;
    serial_ranked(&rank_transform(y)?, m)
}

/// Serial-independence test. Replicates permute whole rows in time, which
/// keeps the cross-sectional law and removes serial dependence.
pub fn serial_test(y: &Matrix, m: usize, n_perm: usize, seed: u64) -> Result<TestResult> {
    if n_perm == 0 {
        return Err(Error::InvalidArgument("n_perm must be at least 1"));
    }
    check_serial(y, m)?;
    let u = rank_transform(y)?;
    let statistic = serial_ranked(&u, m)?;
    let reps = par::map_indices(n_perm, |r| {
        let mut rng = rng::stream(seed, r as u64);
        let mut order: Vec<usize> = (0..u.rows()).collect();
        order.shuffle(&mut rng);
        serial_ranked(&u.select_rows(&order), m)
    });
    let reps = reps.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(TestResult::from_replicates(statistic, reps, seed, 0))
}

/// Settings for the resampling scheme behind the existence test and the
/// confidence radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleOptions {
    pub n_resamples: usize,
    /// Options for the refit of each replicate. Each replicate refits with
    /// its own derived seed.
    pub refit: FitOptions,
    /// Multiply the refitted sources by a random signed permutation.
    pub signed_permutation: bool,
    pub seed: u64,
}

/// Default number of scan points for replicate refits.
pub const DEFAULT_REFIT_STARTS: usize = 100;

impl ResampleOptions {
    /// Refits reuse the options of `fit`, with at most
    /// [`DEFAULT_REFIT_STARTS`] scan points.
    pub fn for_fit(fit: &IcaFit, n_resamples: usize, seed: u64) -> Self {
        let mut refit = fit.options.clone();
        refit.n_starts = refit.n_starts.min(DEFAULT_REFIT_STARTS);
        ResampleOptions { n_resamples, refit, signed_permutation: true, seed }
    }
}

/// Replicate outcomes of the resampling scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    /// `𝒰_n` of the refitted sources, one per kept replicate.
    pub stats: Vec<f64>,
    /// `D(M*, M̂)`, one per kept replicate.
    pub distances: Vec<f64>,
    pub n_dropped: usize,
}

struct Replicate {
    stat: f64,
    distance: f64,
}

fn one_replicate(fit: &IcaFit, opts: &ResampleOptions, r: usize) -> Option<Replicate> {
    let mut rng = rng::stream(opts.seed, r as u64);
    let d = fit.sources.cols();
    let s_star = shuffled_columns(&fit.sources, &mut rng);
    let y_star = s_star.matmul_t(&fit.mixing);
    let signs = random_signed_permutation(d, &mut rng);
    let mut refit_opts = opts.refit.clone();
    refit_opts.seed = rng::child_seed(opts.seed, r as u64);
    let refit = estimator::fit(&y_star, &refit_opts).ok()?;
    if !refit.converged {
        return None;
    }
    let unmixing = crate::linalg::inverse(&refit.mixing).ok()?;
    let mut s_hat = y_star.matmul_t(&unmixing);
    if opts.signed_permutation {
        s_hat = s_hat.matmul(&signs);
    }
    let stat = mutual_independence_stat(&s_hat).ok()?;
    let distance = metrics::mixing_distance(&refit.mixing, &fit.mixing).ok()?;
    Some(Replicate { stat, distance })
}

/// Runs the resampling scheme: shuffle each estimated source independently,
/// remix with `M̂`, refit, and record the independence statistic of the
/// refitted sources and the distance between the refitted and original
/// mixing matrices.
pub fn resample(fit: &IcaFit, opts: &ResampleOptions) -> Result<Resampled> {
    if opts.n_resamples == 0 {
        return Err(Error::InvalidArgument("n_resamples must be at least 1"));
    }
    opts.refit.validate()?;
    check_sample(&fit.sources)?;
    let reps = par::map_indices(opts.n_resamples, |r| one_replicate(fit, opts, r));
    let mut out = Resampled { stats: Vec::new(), distances: Vec::new(), n_dropped: 0 };
    for rep in reps {
        match rep {
            Some(rep) => {
                out.stats.push(rep.stat);
                out.distances.push(rep.distance);
            }
            None => out.n_dropped += 1,
        }
    }
    Ok(out)
}

/// Test for the existence of independent components: the observed
/// `𝒰_n(Ŝ)` against its resampling distribution.
pub fn existence_test(fit: &IcaFit, opts: &ResampleOptions) -> Result<(TestResult, Resampled)> {
    let statistic = mutual_independence_stat(&fit.sources)?;
    let resampled = resample(fit, opts)?;
    let result =
        TestResult::from_replicates(statistic, resampled.stats.clone(), opts.seed, resampled.n_dropped);
    Ok((result, resampled))
}

/// Radius `c_α` of the confidence set `{M : D(M, M̂) ≤ c_α}`: the
/// `max(1, ⌊N α⌋)`-th largest replicate distance.
pub fn confidence_radius(fit: &IcaFit, opts: &ResampleOptions, alpha: f64) -> Result<f64> {
    let resampled = resample(fit, opts)?;
    radius_from_distances(&resampled.distances, alpha)
}

pub fn radius_from_distances(distances: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1]"));
    }
    kth_largest(distances, alpha).ok_or(Error::InvalidArgument("no replicate survived"))
}
