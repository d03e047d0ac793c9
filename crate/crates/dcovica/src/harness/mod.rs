//! Simulation benchmark: source catalog, random mixing, a FastICA baseline
//! and the runner that compares methods by the mixing error `D`.

pub mod benchmark;
pub mod catalog;
pub mod fastica;
pub mod mixing;

pub use benchmark::{run_benchmark, BenchmarkConfig, BenchmarkOutput, BenchmarkRecord, Method, SummaryRow};
pub use catalog::{Catalog, Family, SourceDistribution};
pub use fastica::fastica_baseline;
pub use mixing::random_mixing;
