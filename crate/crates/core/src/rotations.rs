//! Givens-angle parameterization of SO(d).
//!
//! `W(θ) = Q⁽ᵈ⁻¹⁾ ⋯ Q⁽¹⁾` with `Q⁽ᵏ⁾ = Q_{k,d}(θ_{k,d}) ⋯ Q_{k,k+1}(θ_{k,k+1})`.
//! Angles are stored row-major over pairs `(i, j)`, `i < j`. Indices in this
//! module are zero-based.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Tolerance used when accepting a matrix as a rotation.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// Number of free angles for dimension `d`.
pub const fn n_angles(d: usize) -> usize {
    d * (d.saturating_sub(1)) / 2
}

/// Position of pair `(i, j)` in the row-major angle layout.
pub const fn pair_index(d: usize, i: usize, j: usize) -> usize {
    i * (2 * d - i - 1) / 2 + (j - i - 1)
}

/// Angles indexed by the pairs `(i, j)`, `i < j < d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationAngles {
    dim: usize,
    theta: Vec<f64>,
}

impl RotationAngles {
    pub fn zeros(dim: usize) -> RotationAngles {
        RotationAngles { dim, theta: vec![0.0; n_angles(dim)] }
    }

    pub fn new(dim: usize, theta: Vec<f64>) -> Result<RotationAngles> {
        if dim < 1 {
            return Err(Error::TooFewColumns { needed: 1, got: dim });
        }
        if theta.len() != n_angles(dim) {
            return Err(Error::DimensionMismatch { expected: n_angles(dim), got: theta.len() });
        }
        if let Some(pos) = theta.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite { row: 0, col: pos });
        }
        Ok(RotationAngles { dim, theta })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.theta[pair_index(self.dim, i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let idx = pair_index(self.dim, i, j);
        self.theta[idx] = value;
    }

    /// Angles `θ_{k,k+1}, …, θ_{k,d-1}` that make up stage `k`.
    pub fn stage_range(dim: usize, k: usize) -> Range<usize> {
        let start = pair_index(dim, k, k + 1);
        start..start + (dim - k - 1)
    }

    /// Upper end of the parameter range for angle position `idx`:
    /// `2π` on the first row and `π` elsewhere.
    pub fn upper_bound(dim: usize, idx: usize) -> f64 {
        if idx < dim.saturating_sub(1) {
            TAU
        } else {
            PI
        }
    }

    /// Whether every angle lies in its canonical range.
    pub fn in_domain(&self) -> bool {
        self.theta
            .iter()
            .enumerate()
            .all(|(idx, &t)| (0.0..Self::upper_bound(self.dim, idx)).contains(&t))
    }

    /// Angles reduced modulo `2π`. This leaves `W` unchanged; a reduction
    /// modulo `π` would not, so the canonical representative of an
    /// arbitrary vector is obtained with [`canonical`](Self::canonical).
    pub fn wrapped(&self) -> RotationAngles {
        RotationAngles {
            dim: self.dim,
            theta: self.theta.iter().map(|&t| wrap_tau(t)).collect(),
        }
    }

    /// The unique in-domain angle vector with the same rotation.
    pub fn canonical(&self) -> RotationAngles {
        if self.in_domain() {
            return self.clone();
        }
        let w = w_from_theta(self);
        theta_from_w(&w).unwrap_or_else(|_| self.wrapped())
    }
}

fn wrap_tau(t: f64) -> f64 {
    let r = t - TAU * libm::floor(t / TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A `d × d` rotation matrix (orthogonal, determinant one).
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix(Matrix);

impl RotationMatrix {
    /// Validates `w` as a rotation to [`ORTHOGONALITY_TOL`].
    pub fn new(w: Matrix) -> Result<RotationMatrix> {
        check_rotation(&w)?;
        Ok(RotationMatrix(w))
    }

    pub fn identity(d: usize) -> RotationMatrix {
        RotationMatrix(Matrix::identity(d))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn transpose(&self) -> RotationMatrix {
        RotationMatrix(self.0.transpose())
    }

    pub fn compose(&self, other: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0.matmul(&other.0))
    }
}

fn check_rotation(w: &Matrix) -> Result<()> {
    if !w.is_square() {
        return Err(Error::DimensionMismatch { expected: w.rows(), got: w.cols() });
    }
    let deviation = w.orthogonality_defect();
    if !(deviation <= ORTHOGONALITY_TOL) {
        return Err(Error::NotOrthogonal { deviation });
    }
    if linalg::determinant(w)? < 0.0 {
        return Err(Error::Reflection);
    }
    Ok(())
}

/// `W ← Q_{ij}(ψ) W`: mixes rows `i` and `j`.
#[inline]
fn rotate_rows(w: &mut Matrix, i: usize, j: usize, c: f64, s: f64) {
    for col in 0..w.cols() {
        let a = w[(i, col)];
        let b = w[(j, col)];
        w[(i, col)] = c * a - s * b;
        w[(j, col)] = s * a + c * b;
    }
}

/// `R ← R Q_{ij}(ψ)′`: mixes columns `i` and `j`.
#[inline]
fn rotate_cols_t(r: &mut Matrix, i: usize, j: usize, c: f64, s: f64) {
    for row in 0..r.rows() {
        let a = r[(row, i)];
        let b = r[(row, j)];
        r[(row, i)] = c * a - s * b;
        r[(row, j)] = s * a + c * b;
    }
}

/// Plane rotation in coordinates `(i, j)` by `psi`.
pub fn givens(d: usize, i: usize, j: usize, psi: f64) -> Result<RotationMatrix> {
    if j >= d {
        return Err(Error::IndexOutOfRange { index: j, dim: d });
    }
    if i >= j {
        return Err(Error::IndexOutOfRange { index: i, dim: j });
    }
    let mut q = Matrix::identity(d);
    let (s, c) = libm::sincos(psi);
    q[(i, i)] = c;
    q[(j, j)] = c;
    q[(i, j)] = -s;
    q[(j, i)] = s;
    Ok(RotationMatrix(q))
}

fn apply_stages(theta: &[f64], d: usize, stages: usize) -> Matrix {
    let mut w = Matrix::identity(d);
    for k in 0..stages {
        for l in k + 1..d {
            let (s, c) = libm::sincos(theta[pair_index(d, k, l)]);
            rotate_rows(&mut w, k, l, c, s);
        }
    }
    w
}

/// `W(θ)`. Angles outside their range are reduced modulo `2π` first.
pub fn w_from_theta(theta: &RotationAngles) -> Matrix {
    let wrapped = theta.wrapped();
    apply_stages(wrapped.as_slice(), theta.dim, theta.dim.saturating_sub(1))
}

/// `W(θ)` as a validated rotation.
pub fn rotation_from_theta(theta: &RotationAngles) -> RotationMatrix {
    RotationMatrix(w_from_theta(theta))
}

/// `Q⁽ᵏ⁾ ⋯ Q⁽¹⁾` for `1 ≤ stages ≤ d - 1`. Its first `stages` rows equal
/// those of `W(θ)`.
pub fn partial_product(theta: &RotationAngles, stages: usize) -> Result<Matrix> {
    let d = theta.dim;
    if stages == 0 || stages >= d {
        return Err(Error::IndexOutOfRange { index: stages, dim: d });
    }
    Ok(apply_stages(theta.wrapped().as_slice(), d, stages))
}

/// Angles of one stage recovered from the active part `r` of a row.
///
/// `r = (Π c, -s₂ Π_{l>2} c_l, …, -s_m)`. Walking from the last entry, each
/// cosine sign is free; `signs` fixes it per step (bit set = negative) when
/// given, otherwise the sign is chosen so the next sine is non-negative.
/// Returns the angles in `(-π, π]`.
fn peel_row(r: &[f64], signs: Option<u32>, out: &mut [f64]) {
    let m = r.len();
    debug_assert_eq!(out.len(), m - 1);
    // Signed product of the cosines already peeled off.
    let mut scale = 1.0;
    for j in (1..m).rev() {
        if scale == 0.0 {
            out[j - 1] = 0.0;
            continue;
        }
        let s = -r[j] / scale;
        if j == 1 {
            out[0] = libm::atan2(s, r[0] / scale);
            break;
        }
        let mut rest = 0.0;
        for v in &r[..j] {
            rest += v * v;
        }
        let rest = libm::sqrt(rest) / scale.abs();
        let negative = match signs {
            Some(mask) => mask & (1 << (j - 2)) != 0,
            None => {
                // Next sine is -r[j-1] / (scale c); keep it non-negative.
                let next = -r[j - 1] / scale;
                next < 0.0
            }
        };
        let c = if negative { -rest } else { rest };
        out[j - 1] = libm::atan2(s, c);
        scale *= c;
        if scale.abs() < 1e-300 {
            scale = 0.0;
        }
    }
}

/// Peels all stages below the first from `r = W Q⁽¹⁾′` and returns the
/// total amount by which the recovered angles fall below zero.
fn peel_lower(mut r: Matrix, theta: &mut [f64], d: usize) -> f64 {
    let mut violation = 0.0;
    let mut row = vec![0.0; d];
    for k in 1..d - 1 {
        let m = d - k;
        for (t, v) in row[..m].iter_mut().enumerate() {
            *v = r[(k, k + t)];
        }
        let range = RotationAngles::stage_range(d, k);
        peel_row(&row[..m], None, &mut theta[range.clone()]);
        for (offset, idx) in range.enumerate() {
            let t = theta[idx];
            if t < 0.0 {
                violation += -t;
            }
            let (s, c) = libm::sincos(t);
            rotate_cols_t(&mut r, k, k + 1 + offset, c, s);
        }
    }
    violation
}

fn stage_one_residual(w: &Matrix, theta: &[f64], d: usize) -> Matrix {
    let mut r = w.clone();
    // W Q⁽¹⁾′ = W Q_{1,2}′ ⋯ Q_{1,d}′.
    for l in 1..d {
        let (s, c) = libm::sincos(theta[l - 1]);
        rotate_cols_t(&mut r, 0, l, c, s);
    }
    r
}

/// Recovers the in-domain angles of a rotation.
///
/// The first row admits one cosine-sign choice per angle beyond the first;
/// every choice is tried and the one whose remaining rows fit the `[0, π)`
/// range is kept, preferring positive cosines on ties.
pub fn theta_from_w(w: &Matrix) -> Result<RotationAngles> {
    check_rotation(w)?;
    let d = w.rows();
    let p = n_angles(d);
    if d < 2 {
        return Ok(RotationAngles::zeros(d));
    }
    let branches: u32 = 1 << (d - 2).min(30);
    let first: Vec<f64> = w.row(0).to_vec();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut theta = vec![0.0; p];
    for mask in 0..branches {
        peel_row(&first, Some(mask), &mut theta[..d - 1]);
        let residual = stage_one_residual(w, &theta, d);
        let violation = peel_lower(residual, &mut theta, d);
        let better = match &best {
            None => true,
            Some((v, _)) => violation < *v - 1e-12,
        };
        if better {
            best = Some((violation, theta.clone()));
            if violation == 0.0 {
                break;
            }
        }
    }
    let (_, mut theta) = best.expect("at least one branch");
    for t in theta.iter_mut() {
        // Rounding can leave an angle a hair below zero; snap it to zero.
        let v = wrap_tau(*t);
        *t = if v > TAU - 1e-12 { 0.0 } else { v };
    }
    RotationAngles::new(d, theta)
}

/// Flips row signs so each row's largest-magnitude entry is positive. For
/// display and comparison only; the result may have determinant `-1`.
pub fn canonicalize_rows(w: &Matrix) -> Matrix {
    let mut out = w.clone();
    for i in 0..out.rows() {
        let row = out.row(i);
        let mut pivot = 0;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[pivot].abs() {
                pivot = j;
            }
        }
        if row[pivot] < 0.0 {
            for v in out.row_mut(i) {
                *v = -*v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_interior(d: usize, rng: &mut crate::rng::Rng) -> RotationAngles {
        let theta = (0..n_angles(d))
            .map(|idx| {
                let upper = RotationAngles::upper_bound(d, idx);
                // Stay away from the range ends and from the quarter turns
                // where cosines vanish.
                loop {
                    let t = rng.random::<f64>() * upper;
                    let near_edge = t < 1e-3 || upper - t < 1e-3;
                    let near_quarter = [PI / 2.0, 3.0 * PI / 2.0].iter().any(|q| (t - q).abs() < 1e-3);
                    if !near_edge && !near_quarter {
                        break t;
                    }
                }
            })
            .collect();
        RotationAngles::new(d, theta).unwrap()
    }

    #[test]
    fn layout() {
        assert_eq!(n_angles(4), 6);
        let pairs: Vec<usize> = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
            .iter()
            .map(|&(i, j)| pair_index(4, i, j))
            .collect();
        assert_eq!(pairs, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(RotationAngles::stage_range(4, 1), 3..5);
        assert_eq!(RotationAngles::stage_range(4, 2), 5..6);
    }

    #[test]
    fn givens_examples() {
        assert_eq!(givens(2, 0, 1, 0.0).unwrap().as_matrix(), &Matrix::identity(2));
        let q = givens(2, 0, 1, PI / 2.0).unwrap();
        let expected = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
        assert!(q.as_matrix().max_abs_diff(&expected) < 1e-15);
        let q = givens(3, 0, 2, PI).unwrap();
        let expected = Matrix::from_diagonal(&[-1.0, 1.0, -1.0]);
        assert!(q.as_matrix().max_abs_diff(&expected) < 1e-15);
        assert!(givens(3, 1, 3, 0.1).is_err());
        assert!(givens(3, 2, 1, 0.1).is_err());
    }

    #[test]
    fn w_examples() {
        assert_eq!(w_from_theta(&RotationAngles::zeros(5)), Matrix::identity(5));
        let theta = RotationAngles::new(2, vec![0.7]).unwrap();
        let g = givens(2, 0, 1, 0.7).unwrap();
        assert!(w_from_theta(&theta).max_abs_diff(g.as_matrix()) < 1e-15);
    }

    #[test]
    fn w_matches_explicit_product() {
        let mut rng = crate::rng::stream(11, 0);
        let theta = random_interior(4, &mut rng);
        let mut expected = Matrix::identity(4);
        for k in 0..3 {
            for l in k + 1..4 {
                let q = givens(4, k, l, theta.get(k, l)).unwrap();
                expected = q.as_matrix().matmul(&expected);
            }
        }
        let w = w_from_theta(&theta);
        assert!(w.max_abs_diff(&expected) < 1e-14);
        assert!(w.orthogonality_defect() < 1e-12);
        assert!((linalg::determinant(&w).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_row_closed_form() {
        let theta = RotationAngles::new(3, vec![0.4, 1.1, 2.0]).unwrap();
        let w = w_from_theta(&theta);
        let (s2, c2) = libm::sincos(0.4);
        let (s3, c3) = libm::sincos(1.1);
        let expected = [c2 * c3, -s2 * c3, -s3];
        for (a, b) in w.row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn round_trip() {
        let mut rng = crate::rng::stream(12, 0);
        for d in 2..=6 {
            for _ in 0..100 {
                let theta = random_interior(d, &mut rng);
                let back = theta_from_w(&w_from_theta(&theta)).unwrap();
                let err = theta
                    .as_slice()
                    .iter()
                    .zip(back.as_slice())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(err < 1e-8, "d={d} err={err} theta={theta:?} back={back:?}");
            }
        }
    }

    #[test]
    fn identity_inverts_to_zero() {
        let t = theta_from_w(&Matrix::identity(4)).unwrap();
        assert!(t.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reflections_and_non_rotations_rejected() {
        assert_eq!(theta_from_w(&Matrix::from_diagonal(&[1.0, -1.0, 1.0])), Err(Error::Reflection));
        assert!(matches!(
            theta_from_w(&Matrix::from_diagonal(&[1.0, 2.0])),
            Err(Error::NotOrthogonal { .. })
        ));
    }

    #[test]
    fn arbitrary_rotations_invert() {
        // Rotations built from out-of-range angles still invert into range.
        let mut rng = crate::rng::stream(13, 0);
        for d in 2..=5 {
            for _ in 0..50 {
                let raw: Vec<f64> = (0..n_angles(d)).map(|_| rng.random::<f64>() * 20.0 - 10.0).collect();
                let theta = RotationAngles::new(d, raw).unwrap();
                let w = w_from_theta(&theta);
                let back = theta_from_w(&w).unwrap();
                assert!(back.in_domain(), "{back:?}");
                assert!(w_from_theta(&back).max_abs_diff(&w) < 1e-9);
            }
        }
    }

    #[test]
    fn wrapping_is_modulo_tau() {
        let theta = RotationAngles::new(3, vec![7.0, -1.0, 4.0]).unwrap();
        let wrapped = theta.wrapped();
        assert!(w_from_theta(&theta).max_abs_diff(&w_from_theta(&wrapped)) < 1e-14);
        let canonical = theta.canonical();
        assert!(canonical.in_domain());
        assert!(w_from_theta(&canonical).max_abs_diff(&w_from_theta(&theta)) < 1e-9);
    }

    #[test]
    fn partial_products() {
        let theta = RotationAngles::new(3, vec![0.3, 1.2, 2.2]).unwrap();
        let w = w_from_theta(&theta);
        assert_eq!(partial_product(&theta, 2).unwrap(), w);
        let p1 = partial_product(&theta, 1).unwrap();
        assert_eq!(p1.row(0), w.row(0));
        assert!(p1.row_block(1, 3).max_abs_diff(&w.row_block(1, 3)) > 1e-3);
        assert!(partial_product(&theta, 0).is_err());
        assert!(partial_product(&theta, 3).is_err());
        let zero = RotationAngles::zeros(4);
        for k in 1..4 {
            assert_eq!(partial_product(&zero, k).unwrap(), Matrix::identity(4));
        }
    }

    #[test]
    fn later_angles_leave_leading_rows_unchanged() {
        let mut rng = crate::rng::stream(14, 0);
        let d = 5;
        for k in 1..d - 1 {
            let theta = random_interior(d, &mut rng);
            let mut perturbed = theta.clone();
            for idx in pair_index(d, k, k + 1)..n_angles(d) {
                perturbed.as_mut_slice()[idx] += rng.random::<f64>();
            }
            let a = w_from_theta(&theta);
            let b = w_from_theta(&perturbed);
            assert_eq!(a.row_block(0, k), b.row_block(0, k));
        }
    }

    #[test]
    fn canonical_rows() {
        let w = Matrix::from_rows(&[&[0.1, -0.9], &[0.8, 0.2]]).unwrap();
        let c = canonicalize_rows(&w);
        assert_eq!(c.row(0), &[-0.1, 0.9]);
        assert_eq!(c.row(1), &[0.8, 0.2]);
    }
}
