//! JSON documents written by the `fit` and `test` commands.
//!
//! Numbers are written in their shortest round-trip form, so reading a
//! document back reproduces every stored value bit for bit.

use std::fs;
use std::path::Path;

use dcovica_core::estimator::{Estimator, FitMode, FitOptions};
use dcovica_core::{IcaFit, Matrix, RotationAngles, RotationMatrix, TestResult};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub const FIT_FORMAT: &str = "dcovica-fit";
pub const TEST_FORMAT: &str = "dcovica-test";
pub const FORMAT_VERSION: u32 = 1;

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> CliResult<Matrix> {
    Matrix::from_rows(rows).map_err(|e| CliError::Input(format!("fit file field {name}: {e}")))
}

/// Steps applied to the input columns before fitting, in this order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    /// 0-based columns replaced by their natural logarithm.
    pub log_columns: Vec<usize>,
    pub difference: bool,
    pub standardize: bool,
    /// Column sds divided out by standardization.
    pub scales: Option<Vec<f64>>,
    /// Order of the VAR whose residuals replaced the data.
    pub var_order: Option<usize>,
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub rows_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub estimator: String,
    pub mode: String,
    pub n_starts: usize,
    pub n_local: usize,
    pub bandwidth_scale: f64,
    pub max_iters: Option<usize>,
    pub f_tol: f64,
    pub initial_step: f64,
    pub seed: u64,
}

impl FitSettings {
    pub fn from_options(o: &FitOptions) -> FitSettings {
        FitSettings {
            estimator: estimator_name(o.estimator).to_owned(),
            mode: mode_name(o.mode).to_owned(),
            n_starts: o.n_starts,
            n_local: o.n_local,
            bandwidth_scale: o.bandwidth_scale,
            max_iters: o.max_iters,
            f_tol: o.f_tol,
            initial_step: o.initial_step,
            seed: o.seed,
        }
    }

    pub fn to_options(&self) -> CliResult<FitOptions> {
        let opts = FitOptions {
            estimator: parse_estimator(&self.estimator)?,
            mode: parse_mode(&self.mode)?,
            n_starts: self.n_starts,
            n_local: self.n_local,
            bandwidth_scale: self.bandwidth_scale,
            max_iters: self.max_iters,
            f_tol: self.f_tol,
            initial_step: self.initial_step,
            seed: self.seed,
        };
        opts.validate()?;
        Ok(opts)
    }
}

pub fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::Dcov => "dcov",
        Estimator::PitDcov => "pitdcov",
    }
}

pub fn mode_name(m: FitMode) -> &'static str {
    match m {
        FitMode::Joint => "joint",
        FitMode::Sequential => "sequential",
    }
}

pub fn parse_estimator(s: &str) -> CliResult<Estimator> {
    match s {
        "dcov" => Ok(Estimator::Dcov),
        "pitdcov" => Ok(Estimator::PitDcov),
        _ => Err(CliError::Input(format!("unknown estimator {s:?}"))),
    }
}

pub fn parse_mode(s: &str) -> CliResult<FitMode> {
    match s {
        "joint" => Ok(FitMode::Joint),
        "sequential" => Ok(FitMode::Sequential),
        _ => Err(CliError::Input(format!("unknown mode {s:?}"))),
    }
}

/// Contents of `fit.json`. Matrices are lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub format: String,
    pub format_version: u32,
    pub manifest: RunManifest,
    pub columns: Option<Vec<String>>,
    pub preprocessing: Preprocessing,
    pub options: FitSettings,
    pub theta: Vec<f64>,
    /// Separating rotation `W`.
    pub w: Vec<Vec<f64>>,
    /// Whitening matrix `O`.
    pub uncorrelating: Vec<Vec<f64>>,
    /// Estimated mixing matrix `M̂ = O⁻¹ W′`.
    pub mixing: Vec<Vec<f64>>,
    /// `M̂⁻¹ = W O`.
    pub unmixing: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub objective: f64,
    /// Mutual-independence statistic of the estimated sources.
    pub sources_statistic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub starts_evaluated: usize,
}

impl FitReport {
    pub fn new(
        manifest: RunManifest,
        columns: Option<Vec<String>>,
        preprocessing: Preprocessing,
        fit: &IcaFit,
        sources_statistic: f64,
    ) -> FitReport {
        FitReport {
            format: FIT_FORMAT.to_owned(),
            format_version: FORMAT_VERSION,
            manifest,
            columns,
            preprocessing,
            options: FitSettings::from_options(&fit.options),
            theta: fit.theta.as_slice().to_vec(),
            w: rows(fit.w.as_matrix()),
            uncorrelating: rows(&fit.uncorrelating),
            mixing: rows(&fit.mixing),
            unmixing: rows(&fit.unmixing()),
            mean: fit.mean.clone(),
            objective: fit.objective,
            sources_statistic,
            converged: fit.converged,
            iterations: fit.iterations,
            starts_evaluated: fit.starts_evaluated,
        }
    }

    pub fn w(&self) -> CliResult<Matrix> {
        matrix("w", &self.w)
    }

    pub fn uncorrelating(&self) -> CliResult<Matrix> {
        matrix("uncorrelating", &self.uncorrelating)
    }

    pub fn mixing(&self) -> CliResult<Matrix> {
        matrix("mixing", &self.mixing)
    }

    /// Rebuilds the fit for observations `y`, which must be preprocessed the
    /// same way as the data the fit came from.
    pub fn to_fit(&self, y: &Matrix) -> CliResult<IcaFit> {
        let w = self.w()?;
        let d = w.rows();
        if y.cols() != d || self.mean.len() != d {
            return Err(CliError::Input(format!(
                "fit has dimension {d}, data has {} columns",
                y.cols()
            )));
        }
        let mixing = self.mixing()?;
        let sources = dcovica_core::estimator::unmix(y, &mixing, &self.mean)?;
        Ok(IcaFit {
            theta: RotationAngles::new(d, self.theta.clone())?,
            w: RotationMatrix::new(w)?,
            uncorrelating: self.uncorrelating()?,
            mixing,
            sources,
            mean: self.mean.clone(),
            objective: self.objective,
            starts_evaluated: self.starts_evaluated,
            iterations: self.iterations,
            converged: self.converged,
            options: self.options.to_options()?,
        })
    }

    pub fn read(path: &Path) -> CliResult<FitReport> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let report: FitReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if report.format != FIT_FORMAT || report.format_version != FORMAT_VERSION {
            return Err(CliError::Input(format!("{} is not a fit file", path.display())));
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub mean: f64,
}

impl ReplicateSummary {
    pub fn of(values: &[f64]) -> Option<ReplicateSummary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let k = v.len();
        let median = if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) };
        Some(ReplicateSummary {
            min: v[0],
            median,
            max: v[k - 1],
            mean: v.iter().sum::<f64>() / k as f64,
        })
    }
}

/// Contents of `test.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub format: String,
    pub format_version: u32,
    pub manifest: RunManifest,
    pub kind: String,
    pub preprocessing: Preprocessing,
    pub statistic: f64,
    pub p_value: f64,
    pub n_replicates: usize,
    pub n_dropped: usize,
    pub seed: u64,
    pub lags: Option<usize>,
    pub alpha: f64,
    pub rejected: bool,
    /// Radius of the resampling confidence set at `alpha` (existence test).
    pub confidence_radius: Option<f64>,
    /// Options used for the refits (existence test).
    pub refit: Option<FitSettings>,
    pub signed_permutation: Option<bool>,
    pub replicate_summary: Option<ReplicateSummary>,
    pub replicate_stats: Vec<f64>,
}

impl TestReport {
    pub fn new(manifest: RunManifest, kind: &str, preprocessing: Preprocessing, r: &TestResult, alpha: f64) -> TestReport {
        TestReport {
            format: TEST_FORMAT.to_owned(),
            format_version: FORMAT_VERSION,
            manifest,
            kind: kind.to_owned(),
            preprocessing,
            statistic: r.statistic,
            p_value: r.p_value,
            n_replicates: r.n_replicates,
            n_dropped: r.n_dropped,
            seed: r.seed,
            lags: None,
            alpha,
            rejected: r.rejects(alpha),
            confidence_radius: None,
            refit: None,
            signed_permutation: None,
            replicate_summary: ReplicateSummary::of(&r.replicate_stats),
            replicate_stats: r.replicate_stats.clone(),
        }
    }

    pub fn read(path: &Path) -> CliResult<TestReport> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let report: TestReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if report.format != TEST_FORMAT {
            return Err(CliError::Input(format!("{} is not a test file", path.display())));
        }
        Ok(report)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_round_trip() {
        let o = FitOptions { estimator: Estimator::PitDcov, mode: FitMode::Sequential, seed: 9, ..Default::default() };
        let back = FitSettings::from_options(&o).to_options().unwrap();
        assert_eq!(back, o);
        assert!(parse_estimator("fast").is_err());
    }

    #[test]
    fn floats_round_trip_through_json() {
        let xs = vec![0.1, 1.0 / 3.0, -2.220446049250313e-16, 1e300, 123456789.12345679];
        let text = serde_json::to_string(&xs).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(xs, back);
    }

    #[test]
    fn replicate_summary() {
        let s = ReplicateSummary::of(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!((s.min, s.median, s.max, s.mean), (1.0, 2.5, 10.0, 4.0));
        assert!(ReplicateSummary::of(&[]).is_none());
    }
}
