//! Benchmark harness and file plumbing behind the `prs` binary.

pub mod bench;
pub mod report;
pub mod store;

pub use bench::{
    bench_accuracy, bench_baseline, bench_exposure, bench_scaling, exact_knn, linear_fit, overlap, AccuracyConfig,
    AccuracyReport, BaselineConfig, BaselineReport, ExposureBench, ExposureConfig, LinearFit, QueryKind, ScalingConfig,
    ScalingReport,
};
pub use report::{all_passed, Gate, Table};

/// Environment variable fixing every seed of a run.
pub const SEED_VAR: &str = "PRS_SEED";

/// The seed from [`SEED_VAR`], if set and numeric.
pub fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(s) => Ok(Some(s.trim().parse().map_err(|_| anyhow::anyhow!("{SEED_VAR} must be an unsigned integer, got {s:?}"))?)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e.into()),
    }
}
