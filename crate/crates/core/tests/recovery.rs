use dcovica_core::estimator::{self, Estimator, FitMode, FitOptions};
use dcovica_core::metrics::mixing_distance;
use dcovica_core::{inference, rng, Matrix};
use rand::Rng;

fn sources(n: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, 0);
    Matrix::from_fn(n, 3, |_, j| {
        let u: f64 = r.random();
        match j {
            0 => (u - 0.5) * 12f64.sqrt(),
            1 => -u.ln() - 1.0,
            _ => (if u < 0.5 { -1.0 } else { 1.0 }) + 0.3 * (r.random::<f64>() - 0.5),
        }
    })
}

fn mixing() -> Matrix {
    Matrix::from_rows(&[[1.0, 0.4, -0.2], [0.3, 1.0, 0.5], [-0.6, 0.2, 1.0]]).unwrap()
}

#[test]
fn all_estimators_recover_three_sources() {
    let m = mixing();
    let y = sources(400, 11).matmul(&m.transpose());
    for estimator in [Estimator::Dcov, Estimator::PitDcov] {
        for mode in [FitMode::Joint, FitMode::Sequential] {
            let opts = FitOptions { estimator, mode, n_starts: 60, n_local: 2, seed: 5, ..FitOptions::default() };
            let fit = estimator::fit(&y, &opts).unwrap();
            let err = mixing_distance(&m, &fit.mixing).unwrap();
            assert!(err < 0.15, "{estimator:?} {mode:?}: {err}");
            assert!(fit.w.as_matrix().orthogonality_defect() < 1e-10);
        }
    }
}

#[test]
fn estimated_sources_pass_independence_test() {
    let m = mixing();
    let y = sources(300, 12).matmul(&m.transpose());
    let fit = estimator::fit(&y, &FitOptions { n_starts: 60, seed: 1, ..FitOptions::default() }).unwrap();
    let mixed = inference::permutation_test_mutual(&y, 199, 2).unwrap();
    let unmixed = inference::permutation_test_mutual(&fit.sources, 199, 2).unwrap();
    assert!(mixed.p_value < 0.01, "{}", mixed.p_value);
    assert!(unmixed.p_value > 0.01, "{}", unmixed.p_value);
}

#[test]
fn fit_is_reproducible_from_seed() {
    let y = sources(150, 13).matmul(&mixing().transpose());
    let opts = FitOptions { n_starts: 30, seed: 21, ..FitOptions::default() };
    let a = estimator::fit(&y, &opts).unwrap();
    let b = estimator::fit(&y, &opts).unwrap();
    assert_eq!(a.theta, b.theta);
    assert_eq!(a.mixing, b.mixing);
    assert_eq!(a.objective, b.objective);
}

#[test]
fn rescaled_observations_give_equivalent_mixing() {
    let m = mixing();
    let y = sources(300, 14).matmul(&m.transpose());
    let scale = Matrix::from_diagonal(&[2.0, 0.5, 3.0]);
    let opts = FitOptions { estimator: Estimator::Dcov, n_starts: 60, n_local: 2, seed: 3, ..FitOptions::default() };
    let base = estimator::fit(&y, &opts).unwrap();
    let scaled = estimator::fit(&y.matmul(&scale), &opts).unwrap();
    let back = scale.matmul(&base.mixing);
    assert!(mixing_distance(&back, &scaled.mixing).unwrap() < 0.1);
}
