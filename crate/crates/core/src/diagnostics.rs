//! Phase-level statistics of the supplier's order stream and of the per-period
//! orderer counts n_t.
//!
//! Z_t is a mixture of R phase-specific laws, so its pooled time average says little
//! about any single period. Cycle totals Z_i are the series with a stable law.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::format_decimal;
use crate::ordering::{cycle_totals, OrderSchedule, SupplierSeries};
use crate::stats::{fourth_central_moment, pop_covariance, population_moments};

/// Two phases differ when their means or variances are further apart than this
/// many standard errors.
pub const NON_ERGODIC_SE_MULTIPLE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMoments {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    /// Index p holds periods with t mod R = p + 1 (1-based t).
    pub phases: Vec<PhaseMoments>,
    pub pooled_mean: f64,
    pub pooled_variance: f64,
}

impl PhaseStats {
    /// Mean of phase variances plus variance of phase means. Equals
    /// `pooled_variance` up to rounding because every phase has M observations.
    pub fn mixture_variance(&self) -> f64 {
        let r = self.phases.len() as f64;
        let within = self.phases.iter().map(|p| p.variance).sum::<f64>() / r;
        let grand = self.phases.iter().map(|p| p.mean).sum::<f64>() / r;
        let between = self
            .phases
            .iter()
            .map(|p| (p.mean - grand).powi(2))
            .sum::<f64>()
            / r;
        within + between
    }
}

fn phase_columns(z: &[f64], r: usize) -> Vec<Vec<f64>> {
    (0..r)
        .map(|p| z.iter().skip(p).step_by(r).copied().collect())
        .collect()
}

/// Mean and variance of Z_t grouped by phase, plus pooled statistics.
pub fn phase_stats(supplier: &SupplierSeries) -> PhaseStats {
    let r = supplier.config.cycle_len();
    let phases = phase_columns(&supplier.z, r)
        .iter()
        .map(|col| {
            let (mean, variance) = population_moments(col).expect("M >= 1");
            PhaseMoments { mean, variance }
        })
        .collect();
    let (pooled_mean, pooled_variance) = population_moments(&supplier.z).expect("T >= 1");
    PhaseStats {
        phases,
        pooled_mean,
        pooled_variance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultinomialMoments {
    /// N (1/R)(1 − 1/R)
    pub variance: f64,
    /// −N / R²
    pub covariance: f64,
}

/// Empirical law of n_t under a schedule next to the two theoretical references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountStats {
    #[serde(rename = "R")]
    pub cycle_len: usize,
    #[serde(rename = "N")]
    pub retailers: usize,
    #[serde(rename = "M")]
    pub cycles: usize,
    /// `phase_pmf[p][k]` = P̂(n = k) over periods of phase p, k = 0..=N.
    pub phase_pmf: Vec<Vec<f64>>,
    /// P̂(Σ_phases n_t = k), k = 0..=N·R.
    pub cycle_total_pmf: Vec<f64>,
    pub cycle_total_mean: f64,
    pub cycle_total_variance: f64,
    /// Population covariance of (n_1, ..., n_R) across cycles.
    pub covariance: Vec<Vec<f64>>,
    /// Share of (retailer, cycle) pairs whose order count is not exactly one.
    pub off_once_fraction: f64,
    /// Binomial(N, 1/R) pmf.
    pub binomial_reference: Vec<f64>,
    pub multinomial_reference: MultinomialMoments,
}

impl CountStats {
    /// `phase,value,probability` CSV of the per-phase pmfs (1-based phase).
    pub fn write_pmf_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["phase", "value", "probability"])?;
        for (p, pmf) in self.phase_pmf.iter().enumerate() {
            for (k, prob) in pmf.iter().enumerate() {
                w.write_record([(p + 1).to_string(), k.to_string(), format_decimal(*prob)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Binomial(n, p) pmf by the ratio recurrence.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; n + 1];
    if p >= 1.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    pmf[0] = (1.0 - p).powi(n as i32);
    let odds = p / (1.0 - p);
    for k in 0..n {
        pmf[k + 1] = pmf[k] * (n - k) as f64 / (k + 1) as f64 * odds;
    }
    pmf
}

fn histogram(values: impl Iterator<Item = u32>, max: usize, total: usize) -> Vec<f64> {
    let mut h = vec![0usize; max + 1];
    for v in values {
        h[v as usize] += 1;
    }
    h.into_iter().map(|c| c as f64 / total as f64).collect()
}

pub fn count_stats(schedule: &OrderSchedule) -> CountStats {
    let c = schedule.config();
    let (r, n, m) = (c.cycle_len(), c.retailers(), c.cycles());
    let counts = schedule.period_counts();

    let phase_pmf = (0..r)
        .map(|p| histogram(counts.iter().skip(p).step_by(r).copied(), n, m))
        .collect();

    let totals: Vec<u32> = counts.chunks_exact(r).map(|cyc| cyc.iter().sum()).collect();
    let cycle_total_pmf = histogram(totals.iter().copied(), n * r, m);
    let totals_f: Vec<f64> = totals.iter().map(|&v| v as f64).collect();
    let (cycle_total_mean, cycle_total_variance) = population_moments(&totals_f).expect("M >= 1");

    let columns: Vec<Vec<f64>> = (0..r)
        .map(|p| {
            counts
                .iter()
                .skip(p)
                .step_by(r)
                .map(|&v| v as f64)
                .collect()
        })
        .collect();
    let mut covariance = vec![vec![0.0; r]; r];
    for a in 0..r {
        for b in a..r {
            let v = pop_covariance(&columns[a], &columns[b]);
            covariance[a][b] = v;
            covariance[b][a] = v;
        }
    }

    let order_counts = schedule.order_counts();
    let off_once = order_counts.iter().filter(|&&k| k != 1).count();

    let p = 1.0 / r as f64;
    CountStats {
        cycle_len: r,
        retailers: n,
        cycles: m,
        phase_pmf,
        cycle_total_pmf,
        cycle_total_mean,
        cycle_total_variance,
        covariance,
        off_once_fraction: off_once as f64 / order_counts.len() as f64,
        binomial_reference: binomial_pmf(n, p),
        multinomial_reference: MultinomialMoments {
            variance: n as f64 * p * (1.0 - p),
            covariance: -(n as f64) * p * p,
        },
    }
}

/// Sample autocorrelation at `lag`, normalized by the lag-0 sum of squares.
pub fn autocorrelation(series: &[f64], lag: usize) -> Result<f64> {
    if series.len() <= lag + 1 {
        return Err(Error::Input(format!(
            "autocorrelation at lag {lag} needs more than {} observations (got {})",
            lag + 1,
            series.len()
        )));
    }
    let (mean, var) = population_moments(series).expect("non-empty");
    if var == 0.0 {
        return Err(Error::Domain(
            "autocorrelation is undefined for a constant series".into(),
        ));
    }
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let num: f64 = dev.iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum();
    let den: f64 = dev.iter().map(|d| d * d).sum();
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    #[serde(rename = "R")]
    pub cycle_len: usize,
    #[serde(rename = "M")]
    pub cycles: usize,
    /// Time-average variance of Z_t over all periods.
    pub pooled_variance: f64,
    pub phase_means: Vec<f64>,
    pub phase_variances: Vec<f64>,
    /// Var(Z_i) across cycles.
    pub cycle_total_variance: f64,
    /// Var(Z_i) / R, for comparison with the pooled per-period variance.
    pub cycle_total_variance_per_period: f64,
    /// Largest |mean_p − mean_q| minus its threshold; positive means flagged.
    pub mean_excess: f64,
    /// Largest |var_p − var_q| minus its threshold; positive means flagged.
    pub variance_excess: f64,
    pub se_multiple: f64,
    pub non_ergodic: bool,
}

/// Largest pairwise gap in excess of `NON_ERGODIC_SE_MULTIPLE` combined standard errors.
fn max_excess(values: &[f64], std_errors: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for a in 0..values.len() {
        for b in a + 1..values.len() {
            let gap = (values[a] - values[b]).abs();
            let se = (std_errors[a].powi(2) + std_errors[b].powi(2)).sqrt();
            let floor = 1e-12 * values[a].abs().max(values[b].abs()).max(1.0);
            worst = worst.max(gap - (NON_ERGODIC_SE_MULTIPLE * se).max(floor));
        }
    }
    worst
}

/// Contrasts the pooled per-period view of Z_t with its per-phase and per-cycle views.
///
/// Standard errors are plug-in estimates from the series itself: √(s²/M) for a
/// phase mean, √((μ₄ − s⁴)/M) for a phase variance.
pub fn ergodicity_report(supplier: &SupplierSeries) -> ErgodicityReport {
    let r = supplier.config.cycle_len();
    let m = supplier.config.cycles();
    let stats = phase_stats(supplier);
    let cols = phase_columns(&supplier.z, r);

    let phase_means: Vec<f64> = stats.phases.iter().map(|p| p.mean).collect();
    let phase_variances: Vec<f64> = stats.phases.iter().map(|p| p.variance).collect();
    let mean_se: Vec<f64> = phase_variances
        .iter()
        .map(|v| (v / m as f64).sqrt())
        .collect();
    let var_se: Vec<f64> = cols
        .iter()
        .zip(&stats.phases)
        .map(|(col, p)| {
            let m4 = fourth_central_moment(col, p.mean);
            ((m4 - p.variance * p.variance).max(0.0) / m as f64).sqrt()
        })
        .collect();

    let (mean_excess, variance_excess) = if r > 1 {
        (
            max_excess(&phase_means, &mean_se),
            max_excess(&phase_variances, &var_se),
        )
    } else {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    };

    let totals = cycle_totals(supplier);
    let (_, cycle_total_variance) = population_moments(&totals).expect("M >= 1");
    ErgodicityReport {
        cycle_len: r,
        cycles: m,
        pooled_variance: stats.pooled_variance,
        phase_means,
        phase_variances,
        cycle_total_variance,
        cycle_total_variance_per_period: cycle_total_variance / r as f64,
        // -inf is not representable in JSON; report "no pair" as 0 excess.
        mean_excess: if mean_excess.is_finite() {
            mean_excess
        } else {
            0.0
        },
        variance_excess: if variance_excess.is_finite() {
            variance_excess
        } else {
            0.0
        },
        se_multiple: NON_ERGODIC_SE_MULTIPLE,
        non_ergodic: mean_excess > 0.0 || variance_excess > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordering::{schedule_correlated, schedule_random, ReviewConfig, ScheduleKind};

    fn supplier_from_z(z: Vec<f64>, r: usize) -> SupplierSeries {
        let m = z.len() / r;
        SupplierSeries {
            cycle_demand: cycle_totals_of(&z, r),
            z,
            config: ReviewConfig::new(r, 1, m).unwrap(),
            kind: ScheduleKind::Correlated,
        }
    }

    fn cycle_totals_of(z: &[f64], r: usize) -> Vec<f64> {
        z.chunks(r).map(|c| c.iter().sum()).collect()
    }

    #[test]
    fn hand_phase_stats() {
        let sup = supplier_from_z(vec![4.0, 0.0, 6.0, 0.0], 2);
        let ps = phase_stats(&sup);
        assert_eq!(
            ps.phases[0],
            PhaseMoments {
                mean: 5.0,
                variance: 1.0
            }
        );
        assert_eq!(
            ps.phases[1],
            PhaseMoments {
                mean: 0.0,
                variance: 0.0
            }
        );
        assert_eq!(ps.pooled_mean, 2.5);
        assert_eq!(ps.pooled_variance, ps.mixture_variance());
    }

    #[test]
    fn single_phase_equals_pooled() {
        let sup = supplier_from_z(vec![1.0, 5.0, 2.0], 1);
        let ps = phase_stats(&sup);
        assert_eq!(ps.phases.len(), 1);
        assert_eq!(ps.phases[0].mean, ps.pooled_mean);
        assert_eq!(ps.phases[0].variance, ps.pooled_variance);
        assert!(!ergodicity_report(&sup).non_ergodic);
    }

    #[test]
    fn correlated_hand_series_is_flagged() {
        let rep = ergodicity_report(&supplier_from_z(vec![4.0, 0.0, 6.0, 0.0], 2));
        assert!(rep.non_ergodic);
        assert_eq!(rep.phase_variances, vec![1.0, 0.0]);
        assert_eq!(rep.cycle_total_variance, 1.0);
    }

    #[test]
    fn binomial_pmf_values() {
        assert_eq!(binomial_pmf(2, 0.5), vec![0.25, 0.5, 0.25]);
        assert_eq!(binomial_pmf(3, 1.0), vec![0.0, 0.0, 0.0, 1.0]);
        let s: f64 = binomial_pmf(40, 0.3).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlated_counts_are_degenerate() {
        let cfg = ReviewConfig::new(3, 4, 50).unwrap();
        let cs = count_stats(&schedule_correlated(&cfg));
        assert_eq!(cs.phase_pmf[0], vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(cs.phase_pmf[1][0], 1.0);
        assert_eq!(cs.cycle_total_variance, 0.0);
        assert_eq!(cs.off_once_fraction, 0.0);
    }

    #[test]
    fn count_pmfs_normalized_and_cov_symmetric() {
        let cfg = ReviewConfig::new(3, 5, 1000).unwrap();
        let cs = count_stats(&schedule_random(&cfg, 8));
        for pmf in &cs.phase_pmf {
            assert!((pmf.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        assert!((cs.cycle_total_pmf.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert_eq!(cs.cycle_total_pmf[5], 1.0);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(cs.covariance[a][b], cs.covariance[b][a]);
            }
        }
    }

    #[test]
    fn pmf_csv_layout() {
        let cfg = ReviewConfig::new(2, 1, 4).unwrap();
        let cs = count_stats(&schedule_correlated(&cfg));
        let mut buf = Vec::new();
        cs.write_pmf_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "phase,value,probability");
        assert_eq!(lines.len(), 1 + 2 * 2);
        assert!(lines[2].starts_with("1,1,1.0"));
    }

    #[test]
    fn autocorrelation_basics() {
        let xs = [1.0, 2.0, 0.5, 3.0, -1.5];
        assert!((autocorrelation(&xs, 0).unwrap() - 1.0).abs() < 1e-15);
        // mean 1, dev = [0, 1, -0.5, 2, -2.5]; lag-1 products sum to -6.5; Σdev² = 11.5
        assert!((autocorrelation(&xs, 1).unwrap() + 6.5 / 11.5).abs() < 1e-15);
        assert!(matches!(
            autocorrelation(&[2.0; 5], 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(autocorrelation(&xs, 4), Err(Error::Input(_))));
    }
}
