//! Synthetic two-view streams, the regime runner and the scaling bench.
//!
//! Each sample draws latent factors, couples the first `r_C` pairs with
//! correlations `ρ_k`, and maps them through orthonormal bases scaled by
//! `σ_k/√n`, so an `n`-row data matrix has singular values near `σ_k`.

mod bench;
mod model;
mod runner;

pub use bench::{bench_csv, bench_scaling, BenchConfig, BenchRow};
pub use model::{drift_basis, gen_pair, true_directions, Drift, ModelConfig, ModelTruth, Noise};
pub use runner::{
    run_regime, trial_seed, tune_genoja, Methods, MetricCurve, Regime, RunConfig, RunResult, GENOJA_TUNED,
};
