//! Independent component analysis by distance covariance.
//!
//! The crate estimates a separating rotation over SO(d) by minimizing a sum of
//! distance-covariance U-statistics between each estimated component and the
//! block of components after it, optionally after a kernel-smoothed probability
//! integral transform. It also provides permutation and resampling tests for
//! mutual independence, existence of independent components and serial
//! dependence.
//!
//! The crate is `no_std` (it needs `alloc`). Enabling the `parallel` feature
//! pulls in `std` and `rayon` and spreads start scans and test replicates over
//! a thread pool; results do not depend on the number of threads.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style checks deliberately reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dcov;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod pit;
pub mod rng;
pub mod rotations;
pub mod samples;

mod par;

pub use dcov::DcovStat;
pub use error::{Error, Result};
pub use estimator::{Estimator, FitMode, FitOptions, IcaFit};
pub use inference::TestResult;
pub use linalg::Matrix;
pub use metrics::ErrorBreakdown;
pub use rotations::{RotationAngles, RotationMatrix};
pub use samples::Whitening;
