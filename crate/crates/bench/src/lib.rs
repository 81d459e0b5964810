//! Fixtures shared by the benchmarks.

use orderbatch_core::{
    build_schedule, gen_iid, DemandParams, DemandSequence, ExperimentConfig, OrderSchedule,
    ReviewConfig, ScheduleKind,
};

/// One i.i.d. normal(10, 1) path of length `t`.
pub fn demand(t: usize, seed: u64) -> DemandSequence {
    gen_iid(&DemandParams::normal(10.0, 1.0), t, seed).expect("valid fixture")
}

/// N demand paths of length R·M and a schedule of the given kind.
pub fn retail_setup(
    kind: ScheduleKind,
    r: usize,
    n: usize,
    m: usize,
) -> (Vec<DemandSequence>, OrderSchedule) {
    let cfg = ReviewConfig::new(r, n, m).expect("valid fixture");
    let demands = (0..n).map(|j| demand(cfg.horizon(), j as u64)).collect();
    (demands, build_schedule(kind, &cfg, 99))
}

/// Small experiment used to time the full replication pipeline.
pub fn small_experiment(kind: ScheduleKind) -> ExperimentConfig {
    ExperimentConfig {
        review: ReviewConfig::new(4, 4, 10_000).expect("valid fixture"),
        schedule: kind,
        replications: 4,
        ..Default::default()
    }
}
