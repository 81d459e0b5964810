//! Order batching and the variance of supplier orders.
//!
//! Retailers batch R periods of demand into one order per review cycle. This crate
//! generates demand, builds order schedules (including the binomial per-period model
//! that lets a retailer order several times per cycle), decomposes demand variance
//! into within- and between-cycle parts, and runs replicated experiments comparing
//! the resulting supplier-order variance against closed-form predictions.

pub mod demand;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod ordering;
pub mod rng;
pub mod stats;
pub mod variance;

pub use demand::{
    gen_ar1, gen_iid, sequence_stats, DemandDistribution, DemandParams, DemandSequence,
};
pub use diagnostics::{
    autocorrelation, count_stats, ergodicity_report, phase_stats, CountStats, ErgodicityReport,
    PhaseStats,
};
pub use error::{Error, Result};
pub use experiments::{
    compare_models, diagnose, run_experiment, run_experiment_with_threads, simulate_replication,
    sweep, Comparison, DiagnosticReport, ExperimentConfig, ExperimentReport, Replication, Sweep,
    SweepParam,
};
pub use ordering::{
    build_schedule, cycle_totals, moving_sum, periodic_batch, schedule_balanced,
    schedule_correlated, schedule_lpw_binomial, schedule_random, supplier_orders, BatchedSeries,
    OrderSchedule, ReviewConfig, ScheduleKind, SupplierSeries,
};
pub use variance::{
    asymptotic_variance, batched_variance_decomp, batched_variance_direct, bullwhip_ratio,
    classify_scenario, classify_scenario_multi, decompose, lpw_correlated_variance,
    multi_retailer_variance, CycleDecomposition, Scenario, ScenarioLabel,
};
