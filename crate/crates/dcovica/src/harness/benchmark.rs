//! Monte Carlo comparison of separation methods on simulated mixtures.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use dcovica_core::estimator::{self, Estimator, FitMode, FitOptions};
use dcovica_core::{metrics, rng, samples, IcaFit, Matrix};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use super::catalog::Catalog;
use super::fastica::fastica_baseline;
use super::mixing::random_mixing;
use crate::config::Config;
use crate::error::{CliError, CliResult};

/// Benchmark config format understood by [`BenchmarkConfig::from_config`].
pub const CONFIG_VERSION: u32 = 1;

/// The desk-scale configuration shipped with the crate.
pub const DESK_CONFIG: &str = include_str!("../../configs/desk.conf");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DcovJoint,
    DcovSequential,
    PitDcovJoint,
    PitDcovSequential,
    FastIca,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::DcovJoint,
        Method::DcovSequential,
        Method::PitDcovJoint,
        Method::PitDcovSequential,
        Method::FastIca,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::DcovJoint => "dcov-joint",
            Method::DcovSequential => "dcov-sequential",
            Method::PitDcovJoint => "pitdcov-joint",
            Method::PitDcovSequential => "pitdcov-sequential",
            Method::FastIca => "fastica",
        }
    }

    fn estimator(self) -> Option<(Estimator, FitMode)> {
        match self {
            Method::DcovJoint => Some((Estimator::Dcov, FitMode::Joint)),
            Method::DcovSequential => Some((Estimator::Dcov, FitMode::Sequential)),
            Method::PitDcovJoint => Some((Estimator::PitDcov, FitMode::Joint)),
            Method::PitDcovSequential => Some((Estimator::PitDcov, FitMode::Sequential)),
            Method::FastIca => None,
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Method, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub d: usize,
    pub n: usize,
    pub n_sims: usize,
    pub seed: u64,
    /// Starts and local searches for the distance-covariance methods.
    pub n_starts: usize,
    pub n_local: usize,
    pub bandwidth_scale: f64,
    pub cond_lo: f64,
    pub cond_hi: f64,
    /// When false, wall times are recorded as zero so output files depend
    /// only on the config.
    pub timing: bool,
    /// Restricts sources to these catalog labels; all entries when empty.
    pub sources: Vec<String>,
}

impl BenchmarkConfig {
    pub fn desk() -> BenchmarkConfig {
        Self::from_config(&Config::parse(DESK_CONFIG).expect("valid")).expect("valid")
    }

    pub fn from_config(cfg: &Config) -> CliResult<BenchmarkConfig> {
        let version: u32 = cfg.require("version")?;
        if version != CONFIG_VERSION {
            return Err(CliError::Config(format!("unsupported version {version}")));
        }
        const KNOWN: [&str; 13] = [
            "version", "methods", "d", "n", "n_sims", "seed", "starts", "n_local",
            "bandwidth_scale", "cond_lo", "cond_hi", "timing", "sources",
        ];
        if let Some(k) = cfg.keys().find(|k| !KNOWN.contains(k)) {
            return Err(CliError::Config(format!("unknown key {k:?}")));
        }
        let methods = cfg
            .list("methods")
            .iter()
            .map(|m| m.parse::<Method>().map_err(CliError::Config))
            .collect::<CliResult<Vec<_>>>()?;
        let defaults = FitOptions::default();
        let out = BenchmarkConfig {
            methods,
            d: cfg.require("d")?,
            n: cfg.require("n")?,
            n_sims: cfg.require("n_sims")?,
            seed: cfg.require("seed")?,
            n_starts: cfg.get_or("starts", defaults.n_starts)?,
            n_local: cfg.get_or("n_local", defaults.n_local)?,
            bandwidth_scale: cfg.get_or("bandwidth_scale", defaults.bandwidth_scale)?,
            cond_lo: cfg.get_or("cond_lo", 1.0)?,
            cond_hi: cfg.get_or("cond_hi", 2.0)?,
            timing: cfg.get_or("timing", true)?,
            sources: cfg.list("sources"),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if self.methods.is_empty() {
            return bad("methods list is empty");
        }
        if self.d < 2 {
            return bad("d must be at least 2");
        }
        if self.n < 3 {
            return bad("n must be at least 3");
        }
        if self.n_sims == 0 {
            return bad("n_sims must be positive");
        }
        if self.n_starts == 0 || self.n_local == 0 {
            return bad("starts and n_local must be positive");
        }
        if !(self.bandwidth_scale > 0.0 && self.bandwidth_scale.is_finite()) {
            return bad("bandwidth_scale must be positive");
        }
        if !(self.cond_lo >= 1.0 && self.cond_lo <= self.cond_hi && self.cond_hi.is_finite()) {
            return bad("need 1 <= cond_lo <= cond_hi");
        }
        Ok(())
    }

    fn fit_options(&self, estimator: Estimator, mode: FitMode, seed: u64) -> FitOptions {
        FitOptions {
            estimator,
            mode,
            n_starts: self.n_starts,
            n_local: self.n_local,
            bandwidth_scale: self.bandwidth_scale,
            seed,
            ..FitOptions::default()
        }
    }
}

/// One method applied to one simulated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub sim: usize,
    pub method: Method,
    pub d: usize,
    pub n: usize,
    pub distributions: Vec<String>,
    /// `D(M₀, M̂)`, absent when the method failed.
    pub error: Option<f64>,
    pub wall_time: f64,
    pub seed: u64,
    pub converged: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub d: usize,
    pub n: usize,
    pub n_sims: usize,
    pub mean_error: f64,
    /// Sample sd of the errors over `√n_sims`.
    pub std_error: f64,
    pub mean_time: f64,
    /// Records excluded from the means because the method failed.
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutput {
    pub records: Vec<BenchmarkRecord>,
    pub summary: Vec<SummaryRow>,
}

impl BenchmarkOutput {
    pub fn summary_for(&self, method: Method) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.method == method)
    }
}

fn run_method(method: Method, cfg: &BenchmarkConfig, y: &Matrix, seed: u64) -> dcovica_core::Result<IcaFit> {
    let (z, whitening) = samples::whiten(y)?;
    let fit = match method.estimator() {
        Some((est, mode)) => estimator::fit_whitened(&z, &cfg.fit_options(est, mode, seed))?,
        None => fastica_baseline(&z, seed)?,
    };
    Ok(estimator::attach_whitening(fit, &whitening))
}

fn simulate(cfg: &BenchmarkConfig, catalog: &Catalog, pool: &[usize], sim: usize) -> Vec<BenchmarkRecord> {
    let mut rng = rng::stream(cfg.seed, sim as u64);
    let picks = index::sample(&mut rng, pool.len(), cfg.d).into_vec();
    let dists: Vec<_> = picks.iter().map(|&i| &catalog.entries[pool[i]]).collect();
    let columns: Vec<Vec<f64>> = dists.iter().map(|dist| dist.sample(rng.random(), cfg.n)).collect();
    let mixing_seed: u64 = rng.random();
    let fit_seed: u64 = rng.random();
    let s0 = Matrix::from_columns(&columns).expect("equal lengths");
    let labels: Vec<String> = dists.iter().map(|d| d.label.clone()).collect();

    let m0 = random_mixing(cfg.d, cfg.cond_lo, cfg.cond_hi, mixing_seed);
    cfg.methods
        .iter()
        .map(|&method| {
            let mut record = BenchmarkRecord {
                sim,
                method,
                d: cfg.d,
                n: cfg.n,
                distributions: labels.clone(),
                error: None,
                wall_time: 0.0,
                seed: fit_seed,
                converged: false,
                failure: None,
            };
            let m0 = match &m0 {
                Ok(m) => m,
                Err(e) => {
                    record.failure = Some(format!("mixing: {e}"));
                    return record;
                }
            };
            let y = s0.matmul_t(m0);
            let start = Instant::now();
            let fit = run_method(method, cfg, &y, fit_seed);
            let elapsed = start.elapsed().as_secs_f64();
            if cfg.timing {
                record.wall_time = elapsed;
            }
            match fit.and_then(|f| Ok((metrics::mixing_distance(m0, &f.mixing)?, f.converged))) {
                Ok((err, converged)) => {
                    record.error = Some(err);
                    record.converged = converged;
                }
                Err(e) => record.failure = Some(e.to_string()),
            }
            record
        })
        .collect()
}

/// Runs every configured method on `n_sims` simulated data sets. Each
/// simulation draws `d` distinct sources from the catalog, a mixing matrix
/// and a fit seed from stream `(seed, sim)`, so records do not depend on
/// the number of threads.
pub fn run_benchmark(cfg: &BenchmarkConfig, catalog: &Catalog) -> CliResult<BenchmarkOutput> {
    cfg.validate()?;
    let pool: Vec<usize> = if cfg.sources.is_empty() {
        (0..catalog.len()).collect()
    } else {
        cfg.sources
            .iter()
            .map(|label| {
                catalog
                    .entries
                    .iter()
                    .position(|e| &e.label == label)
                    .ok_or_else(|| CliError::Config(format!("unknown source {label:?}")))
            })
            .collect::<CliResult<_>>()?
    };
    if pool.len() < cfg.d {
        return Err(CliError::Config(format!(
            "need at least d = {} sources, have {}",
            cfg.d,
            pool.len()
        )));
    }
    let records: Vec<BenchmarkRecord> = (0..cfg.n_sims)
        .into_par_iter()
        .map(|sim| simulate(cfg, catalog, &pool, sim))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let summary = summarize(cfg, &records);
    Ok(BenchmarkOutput { records, summary })
}

fn summarize(cfg: &BenchmarkConfig, records: &[BenchmarkRecord]) -> Vec<SummaryRow> {
    cfg.methods
        .iter()
        .map(|&method| {
            let ok: Vec<&BenchmarkRecord> =
                records.iter().filter(|r| r.method == method && r.error.is_some()).collect();
            let total = records.iter().filter(|r| r.method == method).count();
            let k = ok.len() as f64;
            let mean = ok.iter().map(|r| r.error.unwrap()).sum::<f64>() / k;
            let var = ok.iter().map(|r| (r.error.unwrap() - mean).powi(2)).sum::<f64>() / (k - 1.0);
            let std_error = if ok.len() > 1 { (var / k).sqrt() } else { f64::NAN };
            SummaryRow {
                method,
                d: cfg.d,
                n: cfg.n,
                n_sims: cfg.n_sims,
                mean_error: mean,
                std_error,
                mean_time: ok.iter().map(|r| r.wall_time).sum::<f64>() / k,
                n_failed: total - ok.len(),
            }
        })
        .collect()
}

pub const RECORD_COLUMNS: [&str; 10] =
    ["sim", "method", "d", "n", "distributions", "error", "wall_time_s", "seed", "converged", "failure"];

pub const SUMMARY_COLUMNS: [&str; 8] =
    ["method", "d", "n", "n_sims", "mean_error", "std_error", "mean_time_s", "n_failed"];

pub fn write_records<W: Write>(w: W, records: &[BenchmarkRecord]) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(RECORD_COLUMNS)?;
    for r in records {
        wtr.write_record([
            r.sim.to_string(),
            r.method.to_string(),
            r.d.to_string(),
            r.n.to_string(),
            r.distributions.join("|"),
            r.error.map(|e| e.to_string()).unwrap_or_default(),
            r.wall_time.to_string(),
            r.seed.to_string(),
            r.converged.to_string(),
            r.failure.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        wtr.write_record([
            r.method.to_string(),
            r.d.to_string(),
            r.n.to_string(),
            r.n_sims.to_string(),
            r.mean_error.to_string(),
            r.std_error.to_string(),
            r.mean_time.to_string(),
            r.n_failed.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchmarkConfig {
        BenchmarkConfig {
            methods: vec![Method::DcovJoint, Method::FastIca],
            d: 2,
            n: 200,
            n_sims: 3,
            seed: 11,
            n_starts: 20,
            n_local: 1,
            bandwidth_scale: 1.0,
            cond_lo: 1.0,
            cond_hi: 2.0,
            timing: false,
            sources: vec![],
        }
    }

    #[test]
    fn desk_config_parses() {
        let c = BenchmarkConfig::desk();
        assert_eq!((c.d, c.n, c.n_sims), (4, 1000, 50));
        assert_eq!(c.methods.len(), 5);
    }

    #[test]
    fn records_are_reproducible() {
        let cat = Catalog::builtin();
        let a = run_benchmark(&small(), &cat).unwrap();
        let b = run_benchmark(&small(), &cat).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 6);
        for r in &a.records {
            assert!(r.error.unwrap() >= 0.0);
            let mut labels = r.distributions.clone();
            labels.dedup();
            assert_eq!(labels.len(), 2);
        }
        let mut x = Vec::new();
        let mut y = Vec::new();
        write_records(&mut x, &a.records).unwrap();
        write_records(&mut y, &b.records).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn config_errors() {
        let parse = |s: &str| Config::parse(s).and_then(|c| BenchmarkConfig::from_config(&c));
        let base = "version = 1\nd = 2\nn = 100\nn_sims = 2\nseed = 1\n";
        assert!(parse(&format!("{base}methods = dcov-joint\n")).is_ok());
        assert!(parse(&format!("{base}methods =\n")).is_err());
        assert!(parse(&format!("{base}methods = prodenica\n")).is_err());
        assert!(parse(&format!("{base}methods = fastica\nbogus = 1\n")).is_err());
        assert!(parse("version = 2\n").is_err());
    }

    #[test]
    fn unknown_source_label_rejected() {
        let mut c = small();
        c.sources = vec!["a".into(), "zz".into()];
        assert!(run_benchmark(&c, &Catalog::builtin()).is_err());
    }
}
