//! Command-line front end: `fit`, `test` and `benchmark`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcovica_core::estimator::{self, Estimator, FitMode, FitOptions};
use dcovica_core::inference::{self, ResampleOptions, DEFAULT_REFIT_STARTS};
use dcovica_core::{samples, Matrix};

use crate::config::Config;
use crate::error::{CliError, CliResult, EXIT_NOT_CONVERGED};
use crate::harness::benchmark::{self, BenchmarkConfig, DESK_CONFIG};
use crate::harness::Catalog;
use crate::io::{self, Table};
use crate::manifest::{sha256_hex, RunManifest};
use crate::report::{self, FitReport, FitSettings, Preprocessing, TestReport};

#[derive(Debug, Parser)]
#[command(name = "dcovica", version, about = "Independent component analysis by distance covariance")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, env = "DCOVICA_THREADS", global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate independent components of a CSV of observations.
    Fit(FitArgs),
    /// Test mutual independence, serial independence or existence of
    /// independent components.
    Test(TestArgs),
    /// Run the simulation benchmark described by a config file.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PrepArgs {
    /// 0-based columns to replace by their natural logarithm (comma list).
    #[arg(long, value_delimiter = ',')]
    pub log_columns: Vec<usize>,
    /// Replace the series by its first differences.
    #[arg(long)]
    pub difference: bool,
    /// Center and divide each column by its sample standard deviation.
    #[arg(long)]
    pub standardize: bool,
    /// Replace the data by the residuals of a VAR of this order.
    #[arg(long)]
    pub var_order: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Dcov,
    Pitdcov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Joint,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestKind {
    Mutual,
    Serial,
    Existence,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV; rows are observations.
    pub input: PathBuf,
    /// Directory for fit.json and sources.csv.
    #[arg(long, short, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub prep: PrepArgs,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Pitdcov)]
    pub estimator: EstimatorArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Joint)]
    pub mode: ModeArg,
    /// Latin hypercube starting points scanned before local search.
    #[arg(long, default_value_t = 1000)]
    pub starts: usize,
    /// Best starts polished by Nelder-Mead.
    #[arg(long, default_value_t = 1)]
    pub local: usize,
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth_scale: f64,
    /// Nelder-Mead iteration cap per local search (default 200 per angle).
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Input CSV; rows are observations (time order for the serial test).
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: TestKind,
    /// Output file.
    #[arg(long, short, default_value = "test.json")]
    pub out: PathBuf,
    #[command(flatten)]
    pub prep: PrepArgs,
    /// Apply PCA whitening before the mutual-independence test.
    #[arg(long)]
    pub whiten: bool,
    /// fit.json from `dcovica fit`; required for the existence test, whose
    /// preprocessing is then taken from the fit.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Permutations (mutual, serial) or resamples (existence).
    #[arg(long, default_value_t = 1999)]
    pub n_perm: usize,
    /// Number of lags for the serial test.
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Starts for existence-test refits (default: the fit's, at most 100).
    #[arg(long)]
    pub refit_starts: Option<usize>,
    /// Skip the random signed permutation of refitted sources.
    #[arg(long)]
    pub no_signed_permutation: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// key = value config; the bundled desk-scale config when omitted.
    pub config: Option<PathBuf>,
    /// Source catalog; the bundled catalog when omitted.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Directory for records.csv, summary.csv and manifest.json.
    #[arg(long, short, default_value = ".")]
    pub out_dir: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli, argv: Vec<String>) -> CliResult<i32> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Fit(a) => cmd_fit(a, argv),
        Command::Test(a) => cmd_test(a, argv),
        Command::Benchmark(a) => cmd_benchmark(a, argv),
    }
}

fn read_input(path: &Path, manifest: &mut RunManifest) -> CliResult<Table> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    manifest.input_sha256 = Some(sha256_hex(&bytes));
    let table = io::read_csv(bytes.as_slice())?;
    if table.dropped_rows > 0 {
        eprintln!("note: dropped {} rows with missing values", table.dropped_rows);
    }
    Ok(table)
}

/// Applies log, differencing, standardization and VAR filtering, in that
/// order.
pub fn preprocess(table: &Table, prep: &PrepArgs) -> CliResult<(Matrix, Preprocessing)> {
    let mut y = table.data.clone();
    for &c in &prep.log_columns {
        if c >= y.cols() {
            return Err(CliError::Input(format!("log column {c} out of range")));
        }
        for i in 0..y.rows() {
            let v = y[(i, c)];
            if v <= 0.0 {
                return Err(CliError::Input(format!("log of non-positive value in row {}, column {c}", i + 1)));
            }
            y[(i, c)] = v.ln();
        }
    }
    if prep.difference {
        y = samples::difference(&y)?;
    }
    let mut scales = None;
    if prep.standardize {
        let (centered, _) = samples::center(&y)?;
        let (s, sds) = samples::standardize_columns(&centered)?;
        y = s;
        scales = Some(sds);
    }
    if let Some(p) = prep.var_order {
        y = samples::var_ols_residuals(&y, p)?;
    }
    let info = Preprocessing {
        log_columns: prep.log_columns.clone(),
        difference: prep.difference,
        standardize: prep.standardize,
        scales,
        var_order: prep.var_order,
        rows_read: table.data.rows() + table.dropped_rows,
        rows_dropped: table.dropped_rows,
        rows_used: y.rows(),
    };
    Ok((y, info))
}

fn prep_from(info: &Preprocessing) -> PrepArgs {
    PrepArgs {
        log_columns: info.log_columns.clone(),
        difference: info.difference,
        standardize: info.standardize,
        var_order: info.var_order,
    }
}

fn record_prep(m: &mut RunManifest, prep: &PrepArgs) {
    let cols: Vec<String> = prep.log_columns.iter().map(usize::to_string).collect();
    m.set("log_columns", cols.join(","));
    m.set("difference", prep.difference);
    m.set("standardize", prep.standardize);
    m.set("var_order", prep.var_order.map(|p| p.to_string()).unwrap_or_default());
}

fn cmd_fit(a: FitArgs, argv: Vec<String>) -> CliResult<i32> {
    let mut manifest = RunManifest::start(argv, a.seed);
    let table = read_input(&a.input, &mut manifest)?;
    if table.data.cols() < 2 {
        return Err(CliError::Input(format!("need at least 2 columns, got {}", table.data.cols())));
    }
    let (y, prep) = preprocess(&table, &a.prep)?;
    let opts = FitOptions {
        estimator: match a.estimator {
            EstimatorArg::Dcov => Estimator::Dcov,
            EstimatorArg::Pitdcov => Estimator::PitDcov,
        },
        mode: match a.mode {
            ModeArg::Joint => FitMode::Joint,
            ModeArg::Sequential => FitMode::Sequential,
        },
        n_starts: a.starts,
        n_local: a.local,
        bandwidth_scale: a.bandwidth_scale,
        max_iters: a.max_iters,
        seed: a.seed,
        ..FitOptions::default()
    };
    opts.validate()?;
    record_prep(&mut manifest, &a.prep);
    for (k, v) in settings_entries(&FitSettings::from_options(&opts)) {
        manifest.set(&k, v);
    }

    let fit = estimator::fit(&y, &opts)?;
    let stat = inference::mutual_independence_stat(&fit.sources)?;
    manifest.finish();
    fs::create_dir_all(&a.out_dir)?;
    let report = FitReport::new(manifest, table.header.clone(), prep, &fit, stat);
    report::write_json(&a.out_dir.join("fit.json"), &report)?;
    let names: Vec<String> = (1..=fit.sources.cols()).map(|k| format!("s{k}")).collect();
    io::write_csv_file(&a.out_dir.join("sources.csv"), Some(&names), &fit.sources)?;

    println!("objective {}", fit.objective);
    println!("sources statistic {stat}");
    if !fit.converged {
        eprintln!("warning: local search did not converge; outputs written with converged = false");
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(0)
}

fn settings_entries(s: &FitSettings) -> Vec<(String, String)> {
    vec![
        ("estimator".into(), s.estimator.clone()),
        ("mode".into(), s.mode.clone()),
        ("starts".into(), s.n_starts.to_string()),
        ("local".into(), s.n_local.to_string()),
        ("bandwidth_scale".into(), s.bandwidth_scale.to_string()),
        ("max_iters".into(), s.max_iters.map(|m| m.to_string()).unwrap_or_default()),
        ("f_tol".into(), s.f_tol.to_string()),
    ]
}

fn cmd_test(a: TestArgs, argv: Vec<String>) -> CliResult<i32> {
    let mut manifest = RunManifest::start(argv, a.seed);
    if !(a.alpha > 0.0 && a.alpha <= 1.0) {
        return Err(CliError::Input("--alpha must lie in (0, 1]".into()));
    }
    let table = read_input(&a.input, &mut manifest)?;
    if table.data.cols() < 2 {
        return Err(CliError::Input(format!("need at least 2 columns, got {}", table.data.cols())));
    }
    manifest.set("kind", format!("{:?}", a.kind).to_lowercase());
    manifest.set("n_perm", a.n_perm);
    manifest.set("alpha", a.alpha);

    let report = match a.kind {
        TestKind::Mutual | TestKind::Serial => {
            let (mut y, prep) = preprocess(&table, &a.prep)?;
            record_prep(&mut manifest, &a.prep);
            if a.kind == TestKind::Mutual {
                if a.whiten {
                    y = samples::whiten(&y)?.0;
                }
                manifest.set("whiten", a.whiten);
                let r = inference::permutation_test_mutual(&y, a.n_perm, a.seed)?;
                manifest.finish();
                TestReport::new(manifest, "mutual", prep, &r, a.alpha)
            } else {
                let m = a.lags.ok_or_else(|| CliError::Input("--lags is required for the serial test".into()))?;
                manifest.set("lags", m);
                let r = inference::serial_test(&y, m, a.n_perm, a.seed)?;
                manifest.finish();
                let mut rep = TestReport::new(manifest, "serial", prep, &r, a.alpha);
                rep.lags = Some(m);
                rep
            }
        }
        TestKind::Existence => {
            let path = a.fit.as_ref().ok_or_else(|| CliError::Input("--fit is required for the existence test".into()))?;
            let fit_report = FitReport::read(path)?;
            if fit_report.manifest.input_sha256 != manifest.input_sha256 {
                eprintln!("note: input differs from the file the fit was computed on");
            }
            let prep_args = prep_from(&fit_report.preprocessing);
            let (y, prep) = preprocess(&table, &prep_args)?;
            record_prep(&mut manifest, &prep_args);
            let fit = fit_report.to_fit(&y)?;
            let mut opts = ResampleOptions::for_fit(&fit, a.n_perm, a.seed);
            opts.refit.n_starts = a.refit_starts.unwrap_or(fit.options.n_starts.min(DEFAULT_REFIT_STARTS));
            opts.signed_permutation = !a.no_signed_permutation;
            opts.refit.validate()?;
            manifest.set("refit_starts", opts.refit.n_starts);
            manifest.set("signed_permutation", opts.signed_permutation);
            let (r, resampled) = inference::existence_test(&fit, &opts)?;
            let radius = inference::radius_from_distances(&resampled.distances, a.alpha).ok();
            manifest.finish();
            let mut rep = TestReport::new(manifest, "existence", prep, &r, a.alpha);
            rep.confidence_radius = radius;
            rep.refit = Some(FitSettings::from_options(&opts.refit));
            rep.signed_permutation = Some(opts.signed_permutation);
            if r.n_dropped > 0 {
                eprintln!("note: {} replicates dropped after failed refits", r.n_dropped);
            }
            rep
        }
    };
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    report::write_json(&a.out, &report)?;
    println!("statistic {}", report.statistic);
    println!("p-value {}", report.p_value);
    Ok(0)
}

fn cmd_benchmark(a: BenchmarkArgs, argv: Vec<String>) -> CliResult<i32> {
    let text = match &a.config {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
        None => DESK_CONFIG.to_owned(),
    };
    let raw = Config::parse(&text)?;
    let mut cfg = BenchmarkConfig::from_config(&raw)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let catalog = match &a.catalog {
        Some(p) => Catalog::parse(
            &fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
        )?,
        None => Catalog::builtin(),
    };
    let mut manifest = RunManifest::start(argv, cfg.seed);
    manifest.input_sha256 = Some(sha256_hex(text.as_bytes()));
    for (k, v) in raw.entries() {
        manifest.set(k, v);
    }
    manifest.set("seed", cfg.seed);
    manifest.set("catalog_version", catalog.version);

    let out = benchmark::run_benchmark(&cfg, &catalog)?;
    manifest.finish();
    fs::create_dir_all(&a.out_dir)?;
    benchmark::write_records(fs::File::create(a.out_dir.join("records.csv"))?, &out.records)?;
    benchmark::write_summary(fs::File::create(a.out_dir.join("summary.csv"))?, &out.summary)?;
    report::write_json(&a.out_dir.join("manifest.json"), &manifest)?;
    for row in &out.summary {
        println!(
            "{:<20} mean error {:.4} (se {:.4}) mean time {:.3} s failed {}",
            row.method.tag(),
            row.mean_error,
            row.std_error,
            row.mean_time,
            row.n_failed
        );
    }
    Ok(0)
}
