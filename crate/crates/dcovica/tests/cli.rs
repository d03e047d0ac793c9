use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dcovica::report::{FitReport, TestReport};
use dcovica_core::{linalg, rng, Matrix};
use rand::Rng;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dcovica"));
    c.env_remove("DCOVICA_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_uniform_mixture(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut r = rng::stream(seed, 0);
    let mut text = String::from("x,y\n");
    for _ in 0..n {
        let (a, b): (f64, f64) = (r.random::<f64>() - 0.5, r.random::<f64>() - 0.5);
        text.push_str(&format!("{},{}\n", a + 0.5 * b, 0.3 * a - b));
    }
    let path = dir.join("mix.csv");
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_writes_outputs_that_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_uniform_mixture(dir.path(), 300, 1);
    let out_dir = dir.path().join("out");
    let out = run(&["fit", s(&input), "-o", s(&out_dir), "--estimator", "dcov", "--starts", "50", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let text = fs::read_to_string(out_dir.join("fit.json")).unwrap();
    let report = FitReport::read(&out_dir.join("fit.json")).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", text);
    assert_eq!(report.columns.as_deref(), Some(&["x".to_string(), "y".to_string()][..]));
    assert_eq!(report.manifest.seed, 3);
    assert!(report.manifest.input_sha256.is_some());

    let w = report.w().unwrap();
    let o = report.uncorrelating().unwrap();
    let m = report.mixing().unwrap();
    let unmixing = Matrix::from_rows(&report.unmixing).unwrap();
    assert_eq!(w.matmul(&o), unmixing);
    assert!(linalg::inverse(&m).unwrap().max_abs_diff(&unmixing) < 1e-10);

    let sources = dcovica::io::read_csv_file(&out_dir.join("sources.csv")).unwrap();
    assert_eq!(sources.data.rows(), 300);
    assert_eq!(sources.header.unwrap(), vec!["s1", "s2"]);

    // Estimated sources of genuinely independent components pass the
    // mutual independence test.
    let test_out = dir.path().join("t.json");
    let out = run(&["test", s(&out_dir.join("sources.csv")), "--kind", "mutual", "--n-perm", "199", "-o", s(&test_out)]);
    assert_eq!(code(&out), 0);
    let t = TestReport::read(&test_out).unwrap();
    assert!(t.p_value > 0.05, "p = {}", t.p_value);
    assert_eq!(t.n_replicates, 199);
}

#[test]
fn bad_input_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    fs::write(&one, "a\n1\n2\n3\n4\n").unwrap();
    assert_eq!(code(&run(&["fit", s(&one), "-o", s(dir.path())])), 2);

    let text = dir.path().join("text.csv");
    fs::write(&text, "a,b\n1,2\n3,oops\n").unwrap();
    let out = run(&["fit", s(&text), "-o", s(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3, column 2"));

    assert_eq!(code(&run(&["fit", "/nonexistent.csv"])), 2);
    assert_eq!(code(&run(&["fit"])), 2);
    assert_eq!(code(&run(&["test", s(&text), "--kind", "serial"])), 2);

    let constant = dir.path().join("const.csv");
    fs::write(&constant, "1,5\n2,5\n3,5\n4,5\n").unwrap();
    assert_eq!(code(&run(&["fit", s(&constant), "--standardize", "-o", s(dir.path())])), 3);
    let dup = dir.path().join("dup.csv");
    fs::write(&dup, "1,1\n2,2\n3,3\n5,5\n").unwrap();
    assert_eq!(code(&run(&["fit", s(&dup), "-o", s(dir.path())])), 3);
}

#[test]
fn non_convergence_still_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_uniform_mixture(dir.path(), 100, 2);
    let out = run(&["fit", s(&input), "-o", s(dir.path()), "--starts", "5", "--max-iters", "1"]);
    assert_eq!(code(&out), 4);
    let report = FitReport::read(&dir.path().join("fit.json")).unwrap();
    assert!(!report.converged);
    assert!(dir.path().join("sources.csv").exists());
}

#[test]
fn fits_agree_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_uniform_mixture(dir.path(), 200, 4);
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(threads);
        let out = run(&["--threads", threads, "fit", s(&input), "-o", s(&out_dir), "--starts", "40", "--local", "2"]);
        assert_eq!(code(&out), 0);
        let mut r = FitReport::read(&out_dir.join("fit.json")).unwrap();
        r.manifest = reports.first().map(|f: &FitReport| f.manifest.clone()).unwrap_or(r.manifest);
        reports.push(r);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn serial_and_existence_tests() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_uniform_mixture(dir.path(), 120, 5);
    let serial = dir.path().join("serial.json");
    let out = run(&["test", s(&input), "--kind", "serial", "--lags", "2", "--n-perm", "49", "-o", s(&serial)]);
    assert_eq!(code(&out), 0);
    let t = TestReport::read(&serial).unwrap();
    assert_eq!(t.lags, Some(2));
    assert!(t.p_value > 0.0 && t.p_value <= 1.0);

    let out = run(&["fit", s(&input), "-o", s(dir.path()), "--estimator", "dcov", "--starts", "30", "--standardize"]);
    assert_eq!(code(&out), 0);
    let existence = dir.path().join("existence.json");
    let fit_json = dir.path().join("fit.json");
    let args = [
        "test", s(&input), "--kind", "existence", "--fit", s(&fit_json),
        "--n-perm", "9", "--refit-starts", "10", "--seed", "8", "-o", s(&existence),
    ];
    assert_eq!(code(&run(&args)), 0);
    let t = TestReport::read(&existence).unwrap();
    assert_eq!(t.n_replicates + t.n_dropped, 9);
    assert_eq!(t.refit.as_ref().unwrap().n_starts, 10);
    assert!(t.preprocessing.standardize);
    assert!(t.confidence_radius.unwrap() >= 0.0);

    assert_eq!(code(&run(&["test", s(&input), "--kind", "existence"])), 2);
}

#[test]
fn benchmark_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.conf");
    fs::write(
        &cfg,
        "version = 1\nmethods = dcov-sequential, fastica\nd = 2\nn = 150\nn_sims = 2\nseed = 5\nstarts = 10\ntiming = false\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run_id in ["a", "b"] {
        let out_dir = dir.path().join(run_id);
        let out = run(&["benchmark", s(&cfg), "-o", s(&out_dir)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let records = fs::read(out_dir.join("records.csv")).unwrap();
        let summary = fs::read(out_dir.join("summary.csv")).unwrap();
        assert!(out_dir.join("manifest.json").exists());
        outputs.push((records, summary));
    }
    assert_eq!(outputs[0], outputs[1]);
    let summary = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert!(summary.starts_with("method,d,n,n_sims,mean_error,std_error,mean_time_s,n_failed\n"));
    assert_eq!(summary.lines().count(), 3);

    fs::write(&cfg, "version = 1\nmethods =\nd = 2\nn = 150\nn_sims = 2\nseed = 5\n").unwrap();
    assert_eq!(code(&run(&["benchmark", s(&cfg), "-o", s(dir.path())])), 2);
}
