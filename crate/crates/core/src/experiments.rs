//! Replicated Monte Carlo experiments.
//!
//! Each replication generates N independent demand paths, applies an order schedule,
//! and measures the across-cycle variance of the supplier's cycle totals Z_i next to
//! the decomposition-based prediction and the binomial closed form. Replication seeds
//! come from [`derive_seed`] so results do not depend on thread count or execution order.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demand::{generate, DemandParams, DemandSequence};
use crate::diagnostics::{
    autocorrelation, count_stats, ergodicity_report, phase_stats, CountStats, ErgodicityReport,
    PhaseStats,
};
use crate::error::{Error, Result};
use crate::io::format_decimal;
use crate::ordering::{
    build_schedule, cycle_totals, moving_sum, periodic_batch, supplier_orders, OrderSchedule,
    ReviewConfig, ScheduleKind, SupplierSeries,
};
use crate::rng::{derive_seed, stream, RNG_ALGORITHM};
use crate::stats::{mean, pop_variance, sample_variance};
use crate::variance::{
    asymptotic_variance, bullwhip_ratio, classify_scenario_multi, decompose,
    lpw_correlated_variance, multi_retailer_variance, Scenario, ScenarioLabel, EXACT_TOLERANCE,
};

pub const DEFAULT_CYCLES: usize = 100_000;
pub const DEFAULT_REPLICATIONS: usize = 10;
pub const DEFAULT_MASTER_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub demand: DemandParams,
    pub review: ReviewConfig,
    pub schedule: ScheduleKind,
    /// K
    pub replications: usize,
    pub master_seed: u64,
    /// Scenario A band on σ²_within / σ²_total.
    pub scenario_tolerance: f64,
    /// Where front ends write artifacts. Not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            demand: DemandParams::normal(10.0, 1.0),
            review: ReviewConfig::new(2, 2, DEFAULT_CYCLES).expect("valid default"),
            schedule: ScheduleKind::Correlated,
            replications: DEFAULT_REPLICATIONS,
            master_seed: DEFAULT_MASTER_SEED,
            scenario_tolerance: EXACT_TOLERANCE,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.demand.validate()?;
        if self.replications == 0 {
            return Err(Error::param("reps", "replication count K must be >= 1"));
        }
        if !(self.scenario_tolerance.is_finite() && self.scenario_tolerance >= 0.0) {
            return Err(Error::param(
                "tolerance",
                format!("must be finite and >= 0 (got {})", self.scenario_tolerance),
            ));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of the config, excluding `output_dir`.
    pub fn config_hash(&self) -> String {
        let canonical = ExperimentConfig {
            output_dir: None,
            ..self.clone()
        };
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn replication_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, stream::REPLICATION, index as u64)
    }

    /// N σ², the variance of the summed non-batched demand.
    pub fn nonbatched_variance(&self) -> f64 {
        self.review.retailers() as f64 * self.demand.sigma2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub index: usize,
    pub seed: u64,
    /// Var(Z_i), divisor M.
    pub cycle_variance: f64,
    /// Var(Z_i), divisor M − 1.
    pub cycle_variance_sample: Option<f64>,
    /// Σ_j σ²_total,j of the realized demand.
    pub demand_variance: f64,
    /// Σ_j R² (σ²_total,j − σ²_within,j).
    pub decomposition_variance: f64,
    /// R² N σ² − R² Σ_j σ²_within,j.
    pub asymptotic_variance: f64,
    pub empirical_ratio: Option<f64>,
    pub scenario: ScenarioLabel,
    /// Time-average variance of Z_t over all periods.
    pub period_variance: f64,
    pub non_ergodic: bool,
    /// Mean |Z_i − Σ_j ξ_agg,j^(i)| over cycles.
    pub conservation_gap: f64,
    pub off_once_fraction: f64,
}

/// Raw artifacts of one replication: per-retailer demand, the schedule, and the
/// resulting supplier series.
#[derive(Debug, Clone)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub demands: Vec<DemandSequence>,
    pub schedule: OrderSchedule,
    pub supplier: SupplierSeries,
}

/// Simulates replication `index` exactly as [`run_experiment`] does.
pub fn simulate_replication(cfg: &ExperimentConfig, index: usize) -> Result<Replication> {
    cfg.validate()?;
    let seed = cfg.replication_seed(index);
    let review = &cfg.review;
    let demands = (0..review.retailers())
        .map(|j| {
            generate(
                &cfg.demand,
                review.horizon(),
                derive_seed(seed, stream::DEMAND, j as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let schedule = build_schedule(cfg.schedule, review, derive_seed(seed, stream::SCHEDULE, 0));
    let supplier = supplier_orders(&schedule, &demands)?;
    Ok(Replication {
        index,
        seed,
        demands,
        schedule,
        supplier,
    })
}

fn run_replication(cfg: &ExperimentConfig, index: usize) -> Result<ReplicationResult> {
    let Replication {
        seed,
        demands,
        schedule,
        supplier,
        ..
    } = simulate_replication(cfg, index)?;
    let (r, n) = (cfg.review.cycle_len(), cfg.review.retailers());

    let totals = cycle_totals(&supplier);
    let cycle_variance = pop_variance(&totals);
    let decomps = demands
        .iter()
        .map(|d| decompose(d.values(), r))
        .collect::<Result<Vec<_>>>()?;
    let demand_variance: f64 = decomps.iter().map(|d| d.sigma2_total).sum();
    let within: Vec<f64> = decomps.iter().map(|d| d.sigma2_within).collect();

    let gaps = supplier.conservation_gaps();
    let order_counts = schedule.order_counts();
    Ok(ReplicationResult {
        index,
        seed,
        cycle_variance,
        cycle_variance_sample: sample_variance(&totals),
        demand_variance,
        decomposition_variance: multi_retailer_variance(&decomps)?,
        asymptotic_variance: asymptotic_variance(cfg.demand.sigma2, r, n, &within)?,
        empirical_ratio: bullwhip_ratio(cycle_variance, demand_variance).ok(),
        scenario: classify_scenario_multi(&decomps, cfg.scenario_tolerance)?,
        period_variance: phase_stats(&supplier).pooled_variance,
        non_ergodic: ergodicity_report(&supplier).non_ergodic,
        conservation_gap: gaps.iter().map(|g| g.abs()).sum::<f64>() / gaps.len() as f64,
        off_once_fraction: order_counts.iter().filter(|&&k| k != 1).count() as f64
            / order_counts.len() as f64,
    })
}

/// Mean across replications with its standard error (sample s.d. / √K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: Option<f64>,
}

impl Estimate {
    fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            mean: mean(values),
            std_error: sample_variance(values).map(|v| (v / values.len() as f64).sqrt()),
        })
    }

    fn of(results: &[ReplicationResult], f: impl Fn(&ReplicationResult) -> f64) -> Self {
        let values: Vec<f64> = results.iter().map(f).collect();
        Self::from_values(&values).expect("K >= 1")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ScenarioTally {
    pub A: usize,
    pub B: usize,
    pub C: usize,
}

impl ScenarioTally {
    fn add(&mut self, s: Scenario) {
        match s {
            Scenario::A => self.A += 1,
            Scenario::B => self.B += 1,
            Scenario::C => self.C += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    /// Var(Z_i) / Σ_j σ²_total,j per replication.
    pub empirical: Option<Estimate>,
    /// Decomposition prediction over N σ².
    pub corrected: f64,
    /// Binomial closed form over N σ².
    pub lpw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub period_variance: Estimate,
    pub non_ergodic_replications: usize,
    pub conservation_gap: Estimate,
    pub off_once_fraction: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub rng: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub replication_seeds: Vec<u64>,
    /// N σ²
    pub nonbatched_variance: f64,
    /// Var(Z_i), divisor M.
    pub empirical_variance: Estimate,
    /// Var(Z_i), divisor M − 1; absent when M = 1.
    pub empirical_variance_sample: Option<Estimate>,
    pub demand_variance: Estimate,
    pub decomposition_variance: Estimate,
    pub corrected_variance: Estimate,
    pub lpw_variance: f64,
    pub ratios: Ratios,
    pub scenarios: ScenarioTally,
    pub diagnostics: DiagnosticsSummary,
    pub warnings: Vec<String>,
    pub replications: Vec<ReplicationResult>,
}

impl ExperimentReport {
    fn assemble(cfg: &ExperimentConfig, results: Vec<ReplicationResult>) -> Self {
        let review = &cfg.review;
        let nonbatched = cfg.nonbatched_variance();
        let corrected = Estimate::of(&results, |r| r.asymptotic_variance);
        let lpw = lpw_correlated_variance(
            review.retailers(),
            review.cycle_len(),
            cfg.demand.mean,
            cfg.demand.sigma2,
        );

        let mut scenarios = ScenarioTally::default();
        for r in &results {
            scenarios.add(r.scenario.label);
        }

        let mut warnings = Vec::new();
        if review.cycles() == 1 {
            warnings.push(
                "M=1: each replication has a single review cycle, so across-cycle variances are degenerate (0)"
                    .to_string(),
            );
        }
        if cfg.replications == 1 {
            warnings.push("K=1: standard errors are unavailable".to_string());
        }

        let ratios_emp: Vec<f64> = results.iter().filter_map(|r| r.empirical_ratio).collect();
        let sample: Vec<f64> = results
            .iter()
            .filter_map(|r| r.cycle_variance_sample)
            .collect();

        ExperimentReport {
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_ALGORITHM.to_string(),
            config: cfg.clone(),
            config_hash: cfg.config_hash(),
            replication_seeds: results.iter().map(|r| r.seed).collect(),
            nonbatched_variance: nonbatched,
            empirical_variance: Estimate::of(&results, |r| r.cycle_variance),
            empirical_variance_sample: Estimate::from_values(&sample),
            demand_variance: Estimate::of(&results, |r| r.demand_variance),
            decomposition_variance: Estimate::of(&results, |r| r.decomposition_variance),
            corrected_variance: corrected,
            lpw_variance: lpw,
            ratios: Ratios {
                empirical: Estimate::from_values(&ratios_emp),
                corrected: corrected.mean / nonbatched,
                lpw: lpw / nonbatched,
            },
            scenarios,
            diagnostics: DiagnosticsSummary {
                period_variance: Estimate::of(&results, |r| r.period_variance),
                non_ergodic_replications: results.iter().filter(|r| r.non_ergodic).count(),
                conservation_gap: Estimate::of(&results, |r| r.conservation_gap),
                off_once_fraction: Estimate::of(&results, |r| r.off_once_fraction),
            },
            warnings,
            replications: results,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per replication.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "config_hash",
            "master_seed",
            "replication",
            "seed",
            "cycle_variance",
            "demand_variance",
            "decomposition_variance",
            "corrected_variance",
            "lpw_variance",
            "empirical_ratio",
            "scenario",
            "lhs",
            "threshold",
            "period_variance",
            "non_ergodic",
        ])?;
        for r in &self.replications {
            w.write_record([
                self.config_hash.clone(),
                self.config.master_seed.to_string(),
                (r.index + 1).to_string(),
                r.seed.to_string(),
                format_decimal(r.cycle_variance),
                format_decimal(r.demand_variance),
                format_decimal(r.decomposition_variance),
                format_decimal(r.asymptotic_variance),
                format_decimal(self.lpw_variance),
                r.empirical_ratio.map(format_decimal).unwrap_or_default(),
                r.scenario.label.to_string(),
                format_decimal(r.scenario.lhs),
                format_decimal(r.scenario.threshold),
                format_decimal(r.period_variance),
                r.non_ergodic.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "N={} R={} M={} K={} schedule={} demand={}(m={}, sigma2={}, phi={}) seed={}",
            c.review.retailers(),
            c.review.cycle_len(),
            c.review.cycles(),
            c.replications,
            c.schedule,
            c.demand.distribution,
            c.demand.mean,
            c.demand.sigma2,
            c.demand.phi,
            c.master_seed
        );
        let _ = writeln!(s, "config hash {}", self.config_hash);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<28} {:>16} {:>14} {:>12}",
            "quantity", "variance", "std error", "ratio"
        );
        let row = |s: &mut String, name: &str, e: Estimate, ratio: Option<f64>| {
            let _ = writeln!(
                s,
                "{:<28} {:>16.6} {:>14} {:>12}",
                name,
                e.mean,
                e.std_error.map_or("-".into(), |v| format!("{v:.6}")),
                ratio.map_or("-".into(), |v| format!("{v:.4}")),
            );
        };
        row(
            &mut s,
            "empirical Var(Z_i)",
            self.empirical_variance,
            self.ratios.empirical.map(|e| e.mean),
        );
        row(
            &mut s,
            "decomposition (realized)",
            self.decomposition_variance,
            None,
        );
        row(
            &mut s,
            "corrected prediction",
            self.corrected_variance,
            Some(self.ratios.corrected),
        );
        row(
            &mut s,
            "lpw closed form",
            Estimate {
                mean: self.lpw_variance,
                std_error: None,
            },
            Some(self.ratios.lpw),
        );
        row(
            &mut s,
            "realized demand variance",
            self.demand_variance,
            None,
        );
        let _ = writeln!(
            s,
            "{:<28} {:>16.6}",
            "non-batched N*sigma2", self.nonbatched_variance
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "scenarios: A={} B={} C={}   non-ergodic replications: {}/{}",
            self.scenarios.A,
            self.scenarios.B,
            self.scenarios.C,
            self.diagnostics.non_ergodic_replications,
            c.replications
        );
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Runs K replications on the global rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let results = (0..cfg.replications)
        .into_par_iter()
        .map(|k| run_replication(cfg, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::assemble(cfg, results))
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub variance: f64,
    pub ratio: Option<f64>,
    /// |variance − empirical|
    pub abs_discrepancy: f64,
    /// abs_discrepancy / empirical
    pub rel_discrepancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config_hash: String,
    pub master_seed: u64,
    pub rows: Vec<ComparisonRow>,
    /// Scenario per replication.
    pub scenarios: Vec<Scenario>,
    pub report: ExperimentReport,
}

impl Comparison {
    pub fn row(&self, model: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "config_hash",
            "master_seed",
            "model",
            "variance",
            "ratio",
            "abs_discrepancy",
            "rel_discrepancy",
        ])?;
        for r in &self.rows {
            w.write_record([
                self.config_hash.clone(),
                self.master_seed.to_string(),
                r.model.clone(),
                format_decimal(r.variance),
                r.ratio.map(format_decimal).unwrap_or_default(),
                format_decimal(r.abs_discrepancy),
                r.rel_discrepancy.map(format_decimal).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "config hash {}  seed {}",
            self.config_hash, self.master_seed
        );
        let _ = writeln!(
            s,
            "{:<12} {:>16} {:>12} {:>16} {:>12}",
            "model", "variance", "ratio", "abs vs emp", "rel vs emp"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<12} {:>16.6} {:>12} {:>16.6} {:>12}",
                r.model,
                r.variance,
                r.ratio.map_or("-".into(), |v| format!("{v:.4}")),
                r.abs_discrepancy,
                r.rel_discrepancy.map_or("-".into(), |v| format!("{v:.4}")),
            );
        }
        let mut tally = ScenarioTally::default();
        for sc in &self.scenarios {
            tally.add(*sc);
        }
        let _ = writeln!(
            s,
            "scenarios per replication: A={} B={} C={}",
            tally.A, tally.B, tally.C
        );
        s
    }
}

/// Side-by-side empirical Var(Z_i), the decomposition prediction and the binomial
/// closed form, with discrepancies measured against the empirical value.
pub fn compare_models(cfg: &ExperimentConfig) -> Result<Comparison> {
    let report = run_experiment(cfg)?;
    let empirical = report.empirical_variance.mean;
    let nonbatched = report.nonbatched_variance;
    let mk = |model: &str, variance: f64, ratio: Option<f64>| {
        let abs = (variance - empirical).abs();
        ComparisonRow {
            model: model.to_string(),
            variance,
            ratio,
            abs_discrepancy: abs,
            rel_discrepancy: (empirical != 0.0).then(|| abs / empirical.abs()),
        }
    };
    let rows = vec![
        mk(
            "empirical",
            empirical,
            report.ratios.empirical.map(|e| e.mean),
        ),
        mk(
            "corrected",
            report.corrected_variance.mean,
            Some(report.corrected_variance.mean / nonbatched),
        ),
        mk("lpw", report.lpw_variance, Some(report.ratios.lpw)),
    ];
    Ok(Comparison {
        config_hash: report.config_hash.clone(),
        master_seed: cfg.master_seed,
        rows,
        scenarios: report
            .replications
            .iter()
            .map(|r| r.scenario.label)
            .collect(),
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    R,
    N,
    #[serde(rename = "m")]
    Mean,
    #[serde(rename = "sigma2")]
    Sigma2,
    #[serde(rename = "phi")]
    Phi,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::R => "R",
            Self::N => "N",
            Self::Mean => "m",
            Self::Sigma2 => "sigma2",
            Self::Phi => "phi",
        }
    }

    /// Applies `value` to a copy of `template`.
    pub fn apply(self, template: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = template.clone();
        let name = self.name();
        let as_count = |v: f64| -> Result<usize> {
            if v.is_finite() && v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::param(
                    name,
                    format!("sweep value {v} is not an integer >= 1"),
                ))
            }
        };
        let review = template.review;
        match self {
            Self::R => {
                cfg.review =
                    ReviewConfig::new(as_count(value)?, review.retailers(), review.cycles())?
            }
            Self::N => {
                cfg.review =
                    ReviewConfig::new(review.cycle_len(), as_count(value)?, review.cycles())?
            }
            Self::Mean => cfg.demand.mean = value,
            Self::Sigma2 => cfg.demand.sigma2 = value,
            Self::Phi => cfg.demand.phi = value,
        }
        cfg.validate().map_err(|e| match e {
            Error::Parameter { field, reason } => Error::Parameter {
                field,
                reason: format!("sweep value {value}: {reason}"),
            },
            other => other,
        })?;
        Ok(cfg)
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R" => Ok(Self::R),
            "N" => Ok(Self::N),
            "m" => Ok(Self::Mean),
            "sigma2" => Ok(Self::Sigma2),
            "phi" => Ok(Self::Phi),
            other => Err(Error::param(
                "sweep",
                format!("parameter must be one of R, N, m, sigma2, phi (got {other:?})"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub config_hash: String,
    pub empirical_variance: Estimate,
    pub empirical_ratio: Option<Estimate>,
    pub corrected_variance: f64,
    pub corrected_ratio: f64,
    pub lpw_variance: f64,
    pub lpw_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: SweepParam,
    pub master_seed: u64,
    pub rows: Vec<SweepRow>,
    pub reports: Vec<ExperimentReport>,
}

impl Sweep {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "parameter",
            "value",
            "config_hash",
            "master_seed",
            "empirical_variance",
            "empirical_std_error",
            "empirical_ratio",
            "corrected_variance",
            "corrected_ratio",
            "lpw_variance",
            "lpw_ratio",
        ])?;
        for r in &self.rows {
            w.write_record([
                self.parameter.name().to_string(),
                format_decimal(r.value),
                r.config_hash.clone(),
                self.master_seed.to_string(),
                format_decimal(r.empirical_variance.mean),
                r.empirical_variance
                    .std_error
                    .map(format_decimal)
                    .unwrap_or_default(),
                r.empirical_ratio
                    .map(|e| format_decimal(e.mean))
                    .unwrap_or_default(),
                format_decimal(r.corrected_variance),
                format_decimal(r.corrected_ratio),
                format_decimal(r.lpw_variance),
                format_decimal(r.lpw_ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "sweep over {}  seed {}",
            self.parameter.name(),
            self.master_seed
        );
        let _ = writeln!(
            s,
            "{:>10} {:>14} {:>10} {:>14} {:>10} {:>14} {:>12}",
            self.parameter.name(),
            "empirical",
            "ratio",
            "corrected",
            "ratio",
            "lpw",
            "ratio"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>10} {:>14.6} {:>10} {:>14.6} {:>10.4} {:>14.4} {:>12.4}",
                r.value,
                r.empirical_variance.mean,
                r.empirical_ratio
                    .map_or("-".into(), |e| format!("{:.4}", e.mean)),
                r.corrected_variance,
                r.corrected_ratio,
                r.lpw_variance,
                r.lpw_ratio,
            );
        }
        s
    }
}

/// One experiment per value, all sharing the template's master seed. Every point is
/// validated before any simulation runs.
pub fn sweep(template: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Sweep> {
    if values.is_empty() {
        return Err(Error::param("sweep", "no values given"));
    }
    template.validate()?;
    let configs = values
        .iter()
        .map(|&v| param.apply(template, v))
        .collect::<Result<Vec<_>>>()?;
    let reports = configs
        .iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>>>()?;
    let rows = values
        .iter()
        .zip(&reports)
        .map(|(&value, rep)| SweepRow {
            value,
            config_hash: rep.config_hash.clone(),
            empirical_variance: rep.empirical_variance,
            empirical_ratio: rep.ratios.empirical,
            corrected_variance: rep.corrected_variance.mean,
            corrected_ratio: rep.ratios.corrected,
            lpw_variance: rep.lpw_variance,
            lpw_ratio: rep.ratios.lpw,
        })
        .collect();
    Ok(Sweep {
        parameter: param,
        master_seed: template.master_seed,
        rows,
        reports,
    })
}

/// Lag-1 autocorrelation of retailer 1's demand aggregated two ways. `None` when
/// the aggregate is constant or too short.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapDiagnostic {
    pub moving_sum_lag1: Option<f64>,
    pub periodic_batch_lag1: Option<f64>,
}

/// Diagnostics of the first replication of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub version: String,
    pub rng: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub replication_seed: u64,
    pub phase_stats: PhaseStats,
    pub count_stats: CountStats,
    pub ergodicity: ErgodicityReport,
    pub overlap: OverlapDiagnostic,
}

impl DiagnosticReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The per-phase orderer-count pmf table, prefixed with hash and seed columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "config_hash",
            "seed",
            "phase",
            "value",
            "probability",
            "binomial",
        ])?;
        let c = &self.count_stats;
        for (p, pmf) in c.phase_pmf.iter().enumerate() {
            for (k, prob) in pmf.iter().enumerate() {
                w.write_record([
                    self.config_hash.clone(),
                    self.replication_seed.to_string(),
                    (p + 1).to_string(),
                    k.to_string(),
                    format_decimal(*prob),
                    format_decimal(c.binomial_reference[k]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn render_text(&self) -> String {
        let c = &self.config;
        let e = &self.ergodicity;
        let counts = &self.count_stats;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "N={} R={} M={} schedule={} seed={}",
            c.review.retailers(),
            c.review.cycle_len(),
            c.review.cycles(),
            c.schedule,
            self.replication_seed
        );
        let _ = writeln!(s, "config hash {}", self.config_hash);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<8} {:>16} {:>16}",
            "phase", "mean Z_t", "variance Z_t"
        );
        for (i, p) in self.phase_stats.phases.iter().enumerate() {
            let _ = writeln!(s, "{:<8} {:>16.6} {:>16.6}", i + 1, p.mean, p.variance);
        }
        let _ = writeln!(
            s,
            "{:<8} {:>16.6} {:>16.6}",
            "pooled", self.phase_stats.pooled_mean, self.phase_stats.pooled_variance
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "Var(Z_i) {:.6}  per period {:.6}",
            e.cycle_total_variance, e.cycle_total_variance_per_period
        );
        let _ = writeln!(
            s,
            "largest phase gap beyond {} SE: means {:.6}, variances {:.6}  non-ergodic: {}",
            e.se_multiple, e.mean_excess, e.variance_excess, e.non_ergodic
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "orderers per phase (observed vs binomial):");
        let _ = write!(s, "{:<8}", "k");
        for p in 0..counts.cycle_len {
            let _ = write!(s, " {:>12}", format!("phase {}", p + 1));
        }
        let _ = writeln!(s, " {:>12}", "binomial");
        for k in 0..=counts.retailers {
            let _ = write!(s, "{k:<8}");
            for pmf in &counts.phase_pmf {
                let _ = write!(s, " {:>12.6}", pmf[k]);
            }
            let _ = writeln!(s, " {:>12.6}", counts.binomial_reference[k]);
        }
        let _ = writeln!(
            s,
            "cov(phase 1, phase 2) {}  multinomial {:.6}",
            counts
                .covariance
                .first()
                .and_then(|row| row.get(1))
                .map_or("-".into(), |v| format!("{v:.6}")),
            counts.multinomial_reference.covariance
        );
        let _ = writeln!(
            s,
            "orders per cycle: mean {:.6} variance {:.6}  off-once fraction {:.6}",
            counts.cycle_total_mean, counts.cycle_total_variance, counts.off_once_fraction
        );
        let fmt = |v: Option<f64>| v.map_or("-".into(), |v| format!("{v:.6}"));
        let _ = writeln!(
            s,
            "lag-1 autocorrelation: moving sum {}  periodic batch {}",
            fmt(self.overlap.moving_sum_lag1),
            fmt(self.overlap.periodic_batch_lag1)
        );
        s
    }
}

/// Phase, count, ergodicity and overlap diagnostics for replication 0 of `cfg`.
pub fn diagnose(cfg: &ExperimentConfig) -> Result<DiagnosticReport> {
    let rep = simulate_replication(cfg, 0)?;
    let r = cfg.review.cycle_len();
    let xs = rep.demands[0].values();
    let overlap = OverlapDiagnostic {
        moving_sum_lag1: moving_sum(xs, r)
            .ok()
            .and_then(|ms| autocorrelation(&ms, 1).ok()),
        periodic_batch_lag1: periodic_batch(xs, r)
            .ok()
            .and_then(|b| autocorrelation(&b.aggregates, 1).ok()),
    };
    Ok(DiagnosticReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        rng: RNG_ALGORITHM.to_string(),
        config: cfg.clone(),
        config_hash: cfg.config_hash(),
        replication_seed: rep.seed,
        phase_stats: phase_stats(&rep.supplier),
        count_stats: count_stats(&rep.schedule),
        ergodicity: ergodicity_report(&rep.supplier),
        overlap,
    })
}
