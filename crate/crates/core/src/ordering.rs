//! Order schedules and batching operators.
//!
//! Periods, cycles, phases and retailers are 0-based in the API; CSV exports are
//! 1-based so that phase 1 is the review period with `t mod R = 1`.
//!
//! Batching is cycle-indexed: a retailer's order in cycle `i` carries its cycle-`i`
//! demand batch. Placing it one cycle later (ordering on last cycle's demand) shifts
//! the timeline by one cycle and leaves every variance unchanged.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::format_decimal;
use crate::rng::stream_rng;

/// Batching geometry: `R` periods per review cycle, `N` retailers, `M` cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawReviewConfig", into = "RawReviewConfig")]
pub struct ReviewConfig {
    cycle_len: usize,
    retailers: usize,
    cycles: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReviewConfig {
    #[serde(rename = "R")]
    cycle_len: usize,
    #[serde(rename = "N")]
    retailers: usize,
    #[serde(rename = "M")]
    cycles: usize,
}

impl TryFrom<RawReviewConfig> for ReviewConfig {
    type Error = Error;

    fn try_from(raw: RawReviewConfig) -> Result<Self> {
        ReviewConfig::new(raw.cycle_len, raw.retailers, raw.cycles)
    }
}

impl From<ReviewConfig> for RawReviewConfig {
    fn from(c: ReviewConfig) -> Self {
        RawReviewConfig {
            cycle_len: c.cycle_len,
            retailers: c.retailers,
            cycles: c.cycles,
        }
    }
}

impl ReviewConfig {
    pub fn new(cycle_len: usize, retailers: usize, cycles: usize) -> Result<Self> {
        if cycle_len == 0 {
            return Err(Error::param("R", "review cycle length must be >= 1"));
        }
        if retailers == 0 {
            return Err(Error::param("N", "number of retailers must be >= 1"));
        }
        if cycles == 0 {
            return Err(Error::param("M", "number of review cycles must be >= 1"));
        }
        cycle_len
            .checked_mul(cycles)
            .ok_or_else(|| Error::param("M", "horizon R*M overflows"))?;
        Ok(Self {
            cycle_len,
            retailers,
            cycles,
        })
    }

    /// R
    pub fn cycle_len(&self) -> usize {
        self.cycle_len
    }

    /// N
    pub fn retailers(&self) -> usize {
        self.retailers
    }

    /// M
    pub fn cycles(&self) -> usize {
        self.cycles
    }

    /// T = R·M
    pub fn horizon(&self) -> usize {
        self.cycle_len * self.cycles
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// All retailers order together at phase 1.
    Correlated,
    /// Retailers spread evenly over phases, each keeping its phase every cycle.
    Balanced,
    /// Each retailer picks a uniform phase each cycle, ordering exactly once.
    Random,
    /// Every (cycle, phase, retailer) independently orders with probability 1/R.
    LpwBinomial,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 4] = [
        Self::Correlated,
        Self::Balanced,
        Self::Random,
        Self::LpwBinomial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Correlated => "correlated",
            Self::Balanced => "balanced",
            Self::Random => "random",
            Self::LpwBinomial => "lpw_binomial",
        }
    }

    /// Whether every retailer orders exactly once per cycle.
    pub fn once_per_cycle(self) -> bool {
        !matches!(self, Self::LpwBinomial)
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "correlated" => Ok(Self::Correlated),
            "balanced" => Ok(Self::Balanced),
            "random" => Ok(Self::Random),
            "lpw_binomial" | "lpw" | "binomial" => Ok(Self::LpwBinomial),
            other => Err(Error::param(
                "schedule",
                format!("expected correlated, balanced, random or lpw_binomial (got {other:?})"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Assignments {
    /// Phase per (cycle, retailer), row-major `cycle * N + retailer`.
    Phases(Vec<usize>),
    /// Order flag per (cycle, phase, retailer), row-major.
    Triggers(Vec<bool>),
}

/// Which retailer orders in which period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderSchedule {
    kind: ScheduleKind,
    config: ReviewConfig,
    seed: Option<u64>,
    assignments: Assignments,
}

impl OrderSchedule {
    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn config(&self) -> &ReviewConfig {
        &self.config
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Phase at which `retailer` orders in `cycle`; `None` for `lpw_binomial` schedules.
    pub fn phase(&self, cycle: usize, retailer: usize) -> Option<usize> {
        match &self.assignments {
            Assignments::Phases(p) => Some(p[cycle * self.config.retailers + retailer]),
            Assignments::Triggers(_) => None,
        }
    }

    /// Whether `retailer` places an order at (`cycle`, `phase`).
    pub fn orders_at(&self, cycle: usize, phase: usize, retailer: usize) -> bool {
        let c = &self.config;
        match &self.assignments {
            Assignments::Phases(p) => p[cycle * c.retailers + retailer] == phase,
            Assignments::Triggers(f) => f[(cycle * c.cycle_len + phase) * c.retailers + retailer],
        }
    }

    /// n_t: retailers ordering in each period, length T.
    pub fn period_counts(&self) -> Vec<u32> {
        let c = &self.config;
        let mut counts = vec![0u32; c.horizon()];
        match &self.assignments {
            Assignments::Phases(p) => {
                for (idx, &phase) in p.iter().enumerate() {
                    counts[(idx / c.retailers) * c.cycle_len + phase] += 1;
                }
            }
            Assignments::Triggers(f) => {
                for (t, n) in counts.iter_mut().enumerate() {
                    *n = f[t * c.retailers..(t + 1) * c.retailers]
                        .iter()
                        .filter(|&&b| b)
                        .count() as u32;
                }
            }
        }
        counts
    }

    /// How many orders each retailer places per cycle, row-major `cycle * N + retailer`.
    /// Always 1 for once-per-cycle kinds.
    pub fn order_counts(&self) -> Vec<u32> {
        let c = &self.config;
        match &self.assignments {
            Assignments::Phases(p) => vec![1; p.len()],
            Assignments::Triggers(f) => {
                let mut counts = vec![0u32; c.cycles * c.retailers];
                for cycle in 0..c.cycles {
                    for phase in 0..c.cycle_len {
                        let base = (cycle * c.cycle_len + phase) * c.retailers;
                        for j in 0..c.retailers {
                            counts[cycle * c.retailers + j] += f[base + j] as u32;
                        }
                    }
                }
                counts
            }
        }
    }

    /// CSV export, 1-based indices. Columns `cycle,retailer,phase` for once-per-cycle
    /// kinds, `cycle,phase,retailer,ordered` for `lpw_binomial`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let c = &self.config;
        let mut w = csv::Writer::from_writer(writer);
        match &self.assignments {
            Assignments::Phases(p) => {
                w.write_record(["cycle", "retailer", "phase"])?;
                for (idx, phase) in p.iter().enumerate() {
                    let (i, j) = (idx / c.retailers, idx % c.retailers);
                    w.write_record([
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        (phase + 1).to_string(),
                    ])?;
                }
            }
            Assignments::Triggers(f) => {
                w.write_record(["cycle", "phase", "retailer", "ordered"])?;
                for (idx, flag) in f.iter().enumerate() {
                    let j = idx % c.retailers;
                    let t = idx / c.retailers;
                    let (i, p) = (t / c.cycle_len, t % c.cycle_len);
                    w.write_record([
                        (i + 1).to_string(),
                        (p + 1).to_string(),
                        (j + 1).to_string(),
                        u8::from(*flag).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// All retailers order at phase 1 of every cycle.
pub fn schedule_correlated(cfg: &ReviewConfig) -> OrderSchedule {
    OrderSchedule {
        kind: ScheduleKind::Correlated,
        config: *cfg,
        seed: None,
        assignments: Assignments::Phases(vec![0; cfg.cycles * cfg.retailers]),
    }
}

/// Retailers dealt round-robin onto phases after a seeded shuffle; the partition
/// is fixed across cycles, so phase counts differ by at most one.
pub fn schedule_balanced(cfg: &ReviewConfig, seed: u64) -> OrderSchedule {
    let mut order: Vec<usize> = (0..cfg.retailers).collect();
    order.shuffle(&mut stream_rng(seed));
    let mut phase_of = vec![0; cfg.retailers];
    for (slot, &retailer) in order.iter().enumerate() {
        phase_of[retailer] = slot % cfg.cycle_len;
    }
    let phases = (0..cfg.cycles)
        .flat_map(|_| phase_of.iter().copied())
        .collect();
    OrderSchedule {
        kind: ScheduleKind::Balanced,
        config: *cfg,
        seed: Some(seed),
        assignments: Assignments::Phases(phases),
    }
}

/// Independent uniform phase per (cycle, retailer). Each retailer orders exactly
/// once per cycle; phase counts within a cycle are multinomial(N; 1/R, ..., 1/R).
pub fn schedule_random(cfg: &ReviewConfig, seed: u64) -> OrderSchedule {
    let mut rng = stream_rng(seed);
    let phases = (0..cfg.cycles * cfg.retailers)
        .map(|_| rng.random_range(0..cfg.cycle_len))
        .collect();
    OrderSchedule {
        kind: ScheduleKind::Random,
        config: *cfg,
        seed: Some(seed),
        assignments: Assignments::Phases(phases),
    }
}

/// Independent Bernoulli(1/R) order flag per (cycle, phase, retailer), so that
/// n_t ~ Binomial(N, 1/R) independently across periods. A retailer may order
/// zero or several times in a cycle.
pub fn schedule_lpw_binomial(cfg: &ReviewConfig, seed: u64) -> OrderSchedule {
    let mut rng = stream_rng(seed);
    let p = 1.0 / cfg.cycle_len as f64;
    let flags = (0..cfg.horizon() * cfg.retailers)
        .map(|_| rng.random_bool(p))
        .collect();
    OrderSchedule {
        kind: ScheduleKind::LpwBinomial,
        config: *cfg,
        seed: Some(seed),
        assignments: Assignments::Triggers(flags),
    }
}

pub fn build_schedule(kind: ScheduleKind, cfg: &ReviewConfig, seed: u64) -> OrderSchedule {
    match kind {
        ScheduleKind::Correlated => schedule_correlated(cfg),
        ScheduleKind::Balanced => schedule_balanced(cfg, seed),
        ScheduleKind::Random => schedule_random(cfg, seed),
        ScheduleKind::LpwBinomial => schedule_lpw_binomial(cfg, seed),
    }
}

/// Per-cycle demand aggregates ξ_agg^(i) of one retailer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchedSeries {
    pub aggregates: Vec<f64>,
    pub cycle_len: usize,
}

impl BatchedSeries {
    pub fn cycles(&self) -> usize {
        self.aggregates.len()
    }
}

pub(crate) fn check_divisible(t: usize, r: usize) -> Result<usize> {
    if r == 0 {
        return Err(Error::param("R", "review cycle length must be >= 1"));
    }
    if t == 0 {
        return Err(Error::Input("demand sequence is empty".into()));
    }
    if t % r != 0 {
        return Err(Error::Config(format!(
            "sequence length T={t} is not divisible by R={r}"
        )));
    }
    Ok(t / r)
}

/// Non-overlapping sums over consecutive blocks of `r` periods.
pub fn periodic_batch(seq: &[f64], r: usize) -> Result<BatchedSeries> {
    check_divisible(seq.len(), r)?;
    Ok(BatchedSeries {
        aggregates: seq.chunks_exact(r).map(|c| c.iter().sum()).collect(),
        cycle_len: r,
    })
}

/// Rolling sums over every window of `r` consecutive periods (length T - R + 1).
/// Neighbouring windows share R - 1 terms.
pub fn moving_sum(seq: &[f64], r: usize) -> Result<Vec<f64>> {
    if r == 0 {
        return Err(Error::param("R", "window length must be >= 1"));
    }
    if seq.len() < r {
        return Err(Error::Input(format!(
            "sequence length T={} is shorter than R={r}",
            seq.len()
        )));
    }
    Ok(seq.windows(r).map(|w| w.iter().sum()).collect())
}

/// Orders received by the supplier, Z_t for t = 1..T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplierSeries {
    pub z: Vec<f64>,
    pub config: ReviewConfig,
    pub kind: ScheduleKind,
    /// Σ_j ξ_agg,j^(i): the demand the cycle's orders should carry.
    pub cycle_demand: Vec<f64>,
}

impl SupplierSeries {
    /// Received minus demanded, per cycle. Identically zero for once-per-cycle kinds.
    pub fn conservation_gaps(&self) -> Vec<f64> {
        cycle_totals(self)
            .iter()
            .zip(&self.cycle_demand)
            .map(|(z, d)| z - d)
            .collect()
    }

    /// `t,Z` CSV with 1-based t.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "Z"])?;
        for (t, z) in self.z.iter().enumerate() {
            w.write_record([(t + 1).to_string(), format_decimal(*z)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Applies `schedule` to the retailers' demand paths.
///
/// Each triggered order carries the retailer's cycle batch; under `lpw_binomial` a
/// retailer triggered twice contributes its batch twice and one never triggered
/// contributes nothing.
pub fn supplier_orders<S: AsRef<[f64]>>(
    schedule: &OrderSchedule,
    demands: &[S],
) -> Result<SupplierSeries> {
    let c = schedule.config;
    if demands.len() != c.retailers {
        return Err(Error::Input(format!(
            "schedule has N={} retailers but {} demand sequences were given",
            c.retailers,
            demands.len()
        )));
    }
    let mut batches = Vec::with_capacity(c.retailers);
    for (j, d) in demands.iter().enumerate() {
        let d = d.as_ref();
        if d.len() != c.horizon() {
            return Err(Error::Input(format!(
                "retailer {} has T={} periods, schedule expects R*M={}",
                j + 1,
                d.len(),
                c.horizon()
            )));
        }
        batches.push(periodic_batch(d, c.cycle_len)?.aggregates);
    }

    let mut z = vec![0.0; c.horizon()];
    for cycle in 0..c.cycles {
        let base = cycle * c.cycle_len;
        match &schedule.assignments {
            Assignments::Phases(p) => {
                for (j, batch) in batches.iter().enumerate() {
                    z[base + p[cycle * c.retailers + j]] += batch[cycle];
                }
            }
            Assignments::Triggers(f) => {
                for phase in 0..c.cycle_len {
                    let t = base + phase;
                    for (j, batch) in batches.iter().enumerate() {
                        if f[t * c.retailers + j] {
                            z[t] += batch[cycle];
                        }
                    }
                }
            }
        }
    }
    let cycle_demand = (0..c.cycles)
        .map(|i| batches.iter().map(|b| b[i]).sum())
        .collect();
    Ok(SupplierSeries {
        z,
        config: c,
        kind: schedule.kind,
        cycle_demand,
    })
}

/// Z_i = Σ_{t in cycle i} Z_t.
pub fn cycle_totals(supplier: &SupplierSeries) -> Vec<f64> {
    supplier
        .z
        .chunks_exact(supplier.config.cycle_len)
        .map(|c| c.iter().sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(r: usize, n: usize, m: usize) -> ReviewConfig {
        ReviewConfig::new(r, n, m).unwrap()
    }

    #[test]
    fn review_config_validation() {
        assert_eq!(ReviewConfig::new(0, 1, 1).unwrap_err().field(), Some("R"));
        assert_eq!(ReviewConfig::new(1, 0, 1).unwrap_err().field(), Some("N"));
        assert_eq!(ReviewConfig::new(1, 1, 0).unwrap_err().field(), Some("M"));
        assert_eq!(cfg(3, 2, 100).horizon(), 300);
    }

    #[test]
    fn review_config_serde_uses_single_letter_keys() {
        let json = serde_json::to_string(&cfg(2, 3, 4)).unwrap();
        assert_eq!(json, r#"{"R":2,"N":3,"M":4}"#);
        assert!(serde_json::from_str::<ReviewConfig>(r#"{"R":0,"N":3,"M":4}"#).is_err());
    }

    #[test]
    fn periodic_batch_examples() {
        let b = periodic_batch(&[1.0, 3.0, 2.0, 4.0], 2).unwrap();
        assert_eq!(b.aggregates, vec![4.0, 6.0]);
        let xs = [0.5, -1.0, 7.0];
        assert_eq!(periodic_batch(&xs, 1).unwrap().aggregates, xs.to_vec());
        assert_eq!(
            periodic_batch(&[2.5; 6], 3).unwrap().aggregates,
            vec![7.5, 7.5]
        );
        assert!(matches!(
            periodic_batch(&[1.0; 5], 2),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn moving_sum_examples() {
        assert_eq!(
            moving_sum(&[1.0, 3.0, 2.0, 4.0], 2).unwrap(),
            vec![4.0, 5.0, 6.0]
        );
        assert_eq!(moving_sum(&[1.0, 3.0], 1).unwrap(), vec![1.0, 3.0]);
        assert_eq!(moving_sum(&[2.0; 5], 3).unwrap(), vec![6.0; 3]);
        assert!(matches!(moving_sum(&[1.0], 2), Err(Error::Input(_))));
    }

    #[test]
    fn correlated_puts_everyone_on_phase_one() {
        let s = schedule_correlated(&cfg(2, 2, 3));
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(s.phase(i, j), Some(0));
            }
        }
        assert_eq!(s.period_counts(), vec![2, 0, 2, 0, 2, 0]);
    }

    #[test]
    fn r1_schedules_all_order_every_period() {
        let c = cfg(1, 3, 5);
        for kind in ScheduleKind::ALL {
            let s = build_schedule(kind, &c, 11);
            assert_eq!(s.period_counts(), vec![3; 5], "{kind}");
            assert_eq!(s.order_counts(), vec![1; 15], "{kind}");
        }
    }

    #[test]
    fn balanced_splits() {
        let s = schedule_balanced(&cfg(2, 4, 5), 1);
        assert_eq!(s.period_counts(), [2, 2].repeat(5));

        let s = schedule_balanced(&cfg(2, 3, 6), 1);
        let counts = s.period_counts();
        let first = &counts[..2];
        assert!(first == [2, 1] || first == [1, 2]);
        for cycle in counts.chunks(2) {
            assert_eq!(cycle, first);
        }
    }

    #[test]
    fn balanced_keeps_phase_fixed() {
        let s = schedule_balanced(&cfg(3, 7, 20), 99);
        for j in 0..7 {
            let p0 = s.phase(0, j);
            assert!((1..20).all(|i| s.phase(i, j) == p0));
        }
    }

    #[test]
    fn random_orders_once_per_cycle() {
        let c = cfg(4, 5, 200);
        let s = schedule_random(&c, 3);
        for cycle in s.period_counts().chunks(4) {
            assert_eq!(cycle.iter().sum::<u32>(), 5);
        }
        assert_eq!(s, schedule_random(&c, 3));
    }

    #[test]
    fn lpw_binomial_breaks_once_per_cycle() {
        let s = schedule_lpw_binomial(&cfg(2, 2, 500), 5);
        let oc = s.order_counts();
        assert!(oc.contains(&0));
        assert!(oc.contains(&2));
        assert_eq!(s.phase(0, 0), None);
    }

    #[test]
    fn supplier_single_retailer_example() {
        let s = schedule_correlated(&cfg(2, 1, 2));
        let sup = supplier_orders(&s, &[vec![1.0, 3.0, 2.0, 4.0]]).unwrap();
        assert_eq!(sup.z, vec![4.0, 0.0, 6.0, 0.0]);
        assert_eq!(cycle_totals(&sup), vec![4.0, 6.0]);
        assert_eq!(sup.conservation_gaps(), vec![0.0, 0.0]);
    }

    #[test]
    fn supplier_linear_in_identical_retailers() {
        let d = vec![1.0, 3.0, 2.0, 4.0];
        let s = schedule_correlated(&cfg(2, 2, 2));
        let sup = supplier_orders(&s, &[d.clone(), d]).unwrap();
        assert_eq!(sup.z, vec![8.0, 0.0, 12.0, 0.0]);
    }

    #[test]
    fn supplier_rejects_mismatched_dimensions() {
        let s = schedule_correlated(&cfg(2, 2, 2));
        assert!(supplier_orders(&s, &[vec![1.0; 4]]).is_err());
        assert!(supplier_orders(&s, &[vec![1.0; 4], vec![1.0; 6]]).is_err());
    }

    #[test]
    fn all_zero_orders_give_zero_totals() {
        let s = schedule_random(&cfg(3, 2, 4), 0);
        let sup = supplier_orders(&s, &[vec![0.0; 12], vec![0.0; 12]]).unwrap();
        assert_eq!(cycle_totals(&sup), vec![0.0; 4]);
    }

    #[test]
    fn schedule_csv_layouts() {
        let mut buf = Vec::new();
        schedule_correlated(&cfg(2, 2, 1))
            .write_csv(&mut buf)
            .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "cycle,retailer,phase\n1,1,1\n1,2,1\n"
        );
        let mut buf = Vec::new();
        schedule_lpw_binomial(&cfg(1, 1, 2), 0)
            .write_csv(&mut buf)
            .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "cycle,phase,retailer,ordered\n1,1,1,1\n2,1,1,1\n"
        );
    }

    #[test]
    fn supplier_csv() {
        let s = schedule_correlated(&cfg(2, 1, 1));
        let sup = supplier_orders(&s, &[vec![1.0, 3.0]]).unwrap();
        let mut buf = Vec::new();
        sup.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,Z\n1,4.00000000000\n2,0.00000000000\n"
        );
    }
}
