use dcovica_core::dcov::{dcov_brute, dcov_ustat};
use dcovica_core::inference::{self, kth_largest, random_signed_permutation};
use dcovica_core::metrics::mixing_distance;
use dcovica_core::pit::rank_transform;
use dcovica_core::rotations::{n_angles, rotation_from_theta, theta_from_w, w_from_theta};
use dcovica_core::{rng, samples, Matrix, RotationAngles};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0f64..10.0, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn angles(d: usize) -> impl Strategy<Value = RotationAngles> {
    let n = n_angles(d);
    prop::collection::vec(0.0f64..1.0, n).prop_map(move |u| {
        let theta = u
            .iter()
            .enumerate()
            .map(|(idx, x)| x * RotationAngles::upper_bound(d, idx))
            .collect();
        RotationAngles::new(d, theta).unwrap()
    })
}

fn invertible(d: usize) -> impl Strategy<Value = Matrix> {
    matrix(d, d).prop_filter("well conditioned", |m| {
        dcovica_core::linalg::Lu::new(m).map(|lu| lu.determinant().abs() > 1e-2).unwrap_or(false)
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dcov_is_symmetric(x in matrix(20, 2), y in matrix(20, 1)) {
        let a = dcov_ustat(&x, &y).unwrap().i_n;
        let b = dcov_ustat(&y, &x).unwrap().i_n;
        prop_assert!(close(a, b, 1e-12), "{a} vs {b}");
    }

    #[test]
    fn dcov_matches_literal_average(x in matrix(9, 2), y in matrix(9, 2)) {
        let fast = dcov_ustat(&x, &y).unwrap().i_n;
        let slow = dcov_brute(&x, &y).unwrap().i_n;
        prop_assert!(close(fast, slow, 1e-10), "{fast} vs {slow}");
    }

    #[test]
    fn dcov_scales_with_product_of_factors(
        x in matrix(15, 2),
        y in matrix(15, 1),
        b1 in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
        b2 in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
        shift in -3.0f64..3.0,
    ) {
        let base = dcov_ustat(&x, &y).unwrap().i_n;
        let xs = Matrix::from_fn(15, 2, |i, j| b1 * x[(i, j)] + shift);
        let ys = y.scale(b2);
        let scaled = dcov_ustat(&xs, &ys).unwrap().i_n;
        prop_assert!((scaled - (b1 * b2).abs() * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
    }

    #[test]
    fn dcov_invariant_under_rotation(x in matrix(15, 2), y in matrix(15, 1), psi in 0.0f64..std::f64::consts::TAU) {
        let (c, s) = (psi.cos(), psi.sin());
        let r = Matrix::from_rows(&[[c, -s], [s, c]]).unwrap();
        let a = dcov_ustat(&x, &y).unwrap().i_n;
        let b = dcov_ustat(&x.matmul(&r), &y).unwrap().i_n;
        prop_assert!(close(a, b, 1e-9));
    }

    #[test]
    fn whitening_gives_identity_covariance(m in invertible(3), seed in any::<u64>()) {
        let mut r = rng::stream(seed, 0);
        let s = Matrix::from_fn(60, 3, |_, _| rand::Rng::random::<f64>(&mut r) - 0.5);
        let (z, w) = samples::whiten(&s.matmul(&m)).unwrap();
        prop_assert!(z.covariance().max_abs_diff(&Matrix::identity(3)) < 1e-8);
        prop_assert!(z.column_means().iter().all(|v| v.abs() < 1e-10));
        let back = w.uncorrelating.matmul(&w.inverse_uncorrelating());
        prop_assert!(back.max_abs_diff(&Matrix::identity(3)) < 1e-8);
    }

    #[test]
    fn rank_statistic_ignores_monotone_maps(x in matrix(25, 3)) {
        let warped = Matrix::from_fn(25, 3, |i, j| {
            let v = x[(i, j)];
            match j { 0 => v.exp(), 1 => v * v * v + v, _ => 2.0 * v - 7.0 }
        });
        let a = inference::mutual_independence_stat(&x).unwrap();
        let b = inference::mutual_independence_stat(&warped).unwrap();
        prop_assert!(close(a, b, 1e-12), "{a} vs {b}");
        prop_assert_eq!(rank_transform(&x).unwrap(), rank_transform(&warped).unwrap());
    }

    #[test]
    fn rotations_are_special_orthogonal(theta in angles(4)) {
        let w = w_from_theta(&theta);
        prop_assert!(w.orthogonality_defect() < 1e-12);
        let det = dcovica_core::linalg::Lu::new(&w).unwrap().determinant();
        prop_assert!((det - 1.0).abs() < 1e-12);
        prop_assert_eq!(w, rotation_from_theta(&theta).into_matrix());
    }

    #[test]
    fn angles_round_trip_through_rotation(theta in angles(4)) {
        let w = w_from_theta(&theta);
        let back = theta_from_w(&w).unwrap();
        prop_assert!(w_from_theta(&back).max_abs_diff(&w) < 1e-9);
        prop_assert!(back.in_domain());
    }

    #[test]
    fn distance_ignores_scaling_and_signed_permutation(
        m in invertible(3),
        scales in prop::collection::vec(0.2f64..5.0, 3),
        seed in any::<u64>(),
    ) {
        let mut r = rng::stream(seed, 1);
        let p = random_signed_permutation(3, &mut r);
        let m_hat = m.matmul(&Matrix::from_diagonal(&scales)).matmul(&p);
        let dist = mixing_distance(&m, &m_hat).unwrap();
        prop_assert!(dist < 1e-8, "{dist}");
        prop_assert!(mixing_distance(&m, &Matrix::identity(3)).unwrap() >= 0.0);
    }

    #[test]
    fn kth_largest_is_a_member(values in prop::collection::vec(-5.0f64..5.0, 1..40), alpha in 0.0f64..1.0) {
        let c = kth_largest(&values, alpha).unwrap();
        prop_assert!(values.contains(&c));
        let k = ((values.len() as f64 * alpha).floor() as usize).max(1);
        prop_assert!(values.iter().filter(|v| **v > c).count() < k);
        prop_assert!(values.iter().filter(|v| **v >= c).count() >= k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn permutation_p_values_are_proper(x in matrix(12, 2), n_perm in 1usize..30, seed in any::<u64>()) {
        let t = inference::permutation_test_mutual(&x, n_perm, seed).unwrap();
        let lo = 1.0 / (n_perm as f64 + 1.0);
        prop_assert!(t.p_value >= lo && t.p_value <= 1.0);
        prop_assert_eq!(t.n_replicates, n_perm);
        let again = inference::permutation_test_mutual(&x, n_perm, seed).unwrap();
        prop_assert_eq!(t.p_value, again.p_value);
    }
}
