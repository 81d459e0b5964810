//! Within/between-cycle variance decomposition and the batching comparisons built on it.
//!
//! For a sequence split into M cycles of R periods:
//!
//! ```text
//! σ²_total = σ²_within + σ²_between
//! Var(batch) = R² σ²_between = R² (σ²_total − σ²_within)
//! ```
//!
//! Batching amplifies variance exactly when σ²_within / σ²_total < (R² − 1) / R².

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordering::{check_divisible, BatchedSeries};
use crate::stats::{pop_variance, population_moments};

/// Tolerance for exact-arithmetic scenario checks.
pub const EXACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleDecomposition {
    pub sigma2_total: f64,
    pub sigma2_within: f64,
    /// Variance of the cycle means.
    pub sigma2_between: f64,
    #[serde(rename = "R")]
    pub cycle_len: usize,
    #[serde(rename = "M")]
    pub cycles: usize,
}

impl CycleDecomposition {
    /// |total − (within + between)|, the floating-point residual of the identity.
    pub fn identity_residual(&self) -> f64 {
        (self.sigma2_total - (self.sigma2_within + self.sigma2_between)).abs()
    }

    /// (R² − 1) / R²
    pub fn threshold(&self) -> f64 {
        scenario_threshold(self.cycle_len)
    }
}

/// Splits the variance of `seq` into within-cycle and between-cycle parts.
/// All three components use population divisors (R, M and T).
pub fn decompose(seq: &[f64], r: usize) -> Result<CycleDecomposition> {
    let m = check_divisible(seq.len(), r)?;
    let (_, total) = population_moments(seq).expect("non-empty");
    let mut means = Vec::with_capacity(m);
    let mut within = 0.0;
    for cycle in seq.chunks_exact(r) {
        let (mu, var) = population_moments(cycle).expect("r >= 1");
        means.push(mu);
        within += var;
    }
    Ok(CycleDecomposition {
        sigma2_total: total,
        sigma2_within: within / m as f64,
        sigma2_between: pop_variance(&means),
        cycle_len: r,
        cycles: m,
    })
}

/// Population variance of the cycle aggregates.
pub fn batched_variance_direct(batched: &BatchedSeries) -> f64 {
    pop_variance(&batched.aggregates)
}

/// R² (σ²_total − σ²_within).
pub fn batched_variance_decomp(d: &CycleDecomposition) -> f64 {
    let r = d.cycle_len as f64;
    r * r * (d.sigma2_total - d.sigma2_within)
}

fn shared_cycle_len(decomps: &[CycleDecomposition]) -> Result<usize> {
    let first = decomps
        .first()
        .ok_or_else(|| Error::Input("no retailer decompositions given".into()))?;
    if let Some((j, d)) = decomps
        .iter()
        .enumerate()
        .find(|(_, d)| d.cycle_len != first.cycle_len)
    {
        return Err(Error::Input(format!(
            "retailer {} has R={} but retailer 1 has R={}",
            j + 1,
            d.cycle_len,
            first.cycle_len
        )));
    }
    Ok(first.cycle_len)
}

/// Σ_j R² (σ²_total,j − σ²_within,j): the across-cycle variance of the supplier's
/// cycle totals when retailer demands are independent.
pub fn multi_retailer_variance(decomps: &[CycleDecomposition]) -> Result<f64> {
    shared_cycle_len(decomps)?;
    Ok(decomps.iter().map(batched_variance_decomp).sum())
}

/// R² N σ² − R² Σ_j σ²_within,j, the long-horizon form with every retailer's total
/// variance replaced by σ². Negative results are returned as is; they mean the
/// within-cycle inputs exceed σ².
pub fn asymptotic_variance(sigma2: f64, r: usize, n: usize, within: &[f64]) -> Result<f64> {
    if !sigma2.is_finite() {
        return Err(Error::Input(format!(
            "sigma2 must be finite (got {sigma2})"
        )));
    }
    if sigma2 <= 0.0 {
        return Err(Error::param(
            "sigma2",
            format!("must be > 0 (got {sigma2})"),
        ));
    }
    if r == 0 {
        return Err(Error::param("R", "review cycle length must be >= 1"));
    }
    if within.len() != n {
        return Err(Error::Input(format!(
            "expected {n} within-cycle variances, got {}",
            within.len()
        )));
    }
    if let Some(w) = within.iter().find(|w| !w.is_finite()) {
        return Err(Error::Input(format!(
            "non-finite within-cycle variance {w}"
        )));
    }
    let r2 = (r * r) as f64;
    Ok(r2 * n as f64 * sigma2 - r2 * within.iter().sum::<f64>())
}

/// N σ² + m² N² (R − 1): the batched-order variance under the binomial
/// positively-correlated ordering model.
pub fn lpw_correlated_variance(n: usize, r: usize, m: f64, sigma2: f64) -> f64 {
    let n = n as f64;
    n * sigma2 + m * m * n * n * (r as f64 - 1.0)
}

pub fn bullwhip_ratio(var_orders: f64, var_demand: f64) -> Result<f64> {
    if var_demand.is_nan() || var_demand <= 0.0 {
        return Err(Error::Domain(format!(
            "bullwhip ratio needs a positive demand variance (got {var_demand})"
        )));
    }
    Ok(var_orders / var_demand)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Batching leaves variance unchanged.
    A,
    /// Batching dampens variance.
    B,
    /// Batching amplifies variance (bullwhip).
    C,
}

impl Scenario {
    pub fn describe(self) -> &'static str {
        match self {
            Scenario::A => "no effect on variance",
            Scenario::B => "batching dampens variance",
            Scenario::C => "batching amplifies variance",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioLabel {
    pub label: Scenario,
    /// σ²_within / σ²_total (pooled over retailers in the multi-retailer case).
    pub lhs: f64,
    /// (R² − 1) / R²
    pub threshold: f64,
    pub tolerance: f64,
}

pub fn scenario_threshold(r: usize) -> f64 {
    let r2 = (r * r) as f64;
    (r2 - 1.0) / r2
}

fn label(within: f64, total: f64, r: usize, tolerance: f64) -> ScenarioLabel {
    let threshold = scenario_threshold(r);
    // A constant sequence batches to a constant order stream.
    if total <= 0.0 {
        return ScenarioLabel {
            label: Scenario::A,
            lhs: threshold,
            threshold,
            tolerance,
        };
    }
    let lhs = within / total;
    let label = if (lhs - threshold).abs() <= tolerance {
        Scenario::A
    } else if lhs > threshold {
        Scenario::B
    } else {
        Scenario::C
    };
    ScenarioLabel {
        label,
        lhs,
        threshold,
        tolerance,
    }
}

/// Compares σ²_within / σ²_total with (R² − 1) / R². Zero-variance input is A.
pub fn classify_scenario(d: &CycleDecomposition, tolerance: f64) -> ScenarioLabel {
    label(d.sigma2_within, d.sigma2_total, d.cycle_len, tolerance)
}

/// Pooled version over N retailers: (Σ_j σ²_within,j) / (Σ_j σ²_total,j) against
/// (R² − 1) / R². With equal totals σ² this is Σ σ²_within,j / (N σ²).
pub fn classify_scenario_multi(
    decomps: &[CycleDecomposition],
    tolerance: f64,
) -> Result<ScenarioLabel> {
    let r = shared_cycle_len(decomps)?;
    let within = decomps.iter().map(|d| d.sigma2_within).sum();
    let total = decomps.iter().map(|d| d.sigma2_total).sum();
    Ok(label(within, total, r, tolerance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordering::periodic_batch;

    const HAND: [f64; 4] = [1.0, 3.0, 2.0, 4.0];

    fn synthetic(within: f64, total: f64, r: usize) -> CycleDecomposition {
        CycleDecomposition {
            sigma2_total: total,
            sigma2_within: within,
            sigma2_between: total - within,
            cycle_len: r,
            cycles: 10,
        }
    }

    #[test]
    fn hand_decomposition() {
        // cycles (1,3) and (2,4): within variances 1 and 1, means 2 and 3
        let d = decompose(&HAND, 2).unwrap();
        assert_eq!(d.sigma2_within, 1.0);
        assert_eq!(d.sigma2_between, 0.25);
        assert_eq!(d.sigma2_total, 1.25);
        assert_eq!((d.cycle_len, d.cycles), (2, 2));
        assert_eq!(batched_variance_decomp(&d), 1.0);
        let b = periodic_batch(&HAND, 2).unwrap();
        assert_eq!(batched_variance_direct(&b), 1.0);
    }

    #[test]
    fn degenerate_decompositions() {
        assert_eq!(
            decompose(&[3.0; 6], 3).unwrap(),
            CycleDecomposition {
                sigma2_total: 0.0,
                sigma2_within: 0.0,
                sigma2_between: 0.0,
                cycle_len: 3,
                cycles: 2
            }
        );
        let d = decompose(&HAND, 1).unwrap();
        assert_eq!(d.sigma2_within, 0.0);
        assert_eq!(d.sigma2_between, d.sigma2_total);
        assert_eq!(batched_variance_decomp(&d), d.sigma2_total);
        assert!(matches!(decompose(&HAND, 3), Err(Error::Config(_))));
    }

    #[test]
    fn direct_variance_edge_cases() {
        let b = |a: Vec<f64>| BatchedSeries {
            aggregates: a,
            cycle_len: 2,
        };
        assert_eq!(batched_variance_direct(&b(vec![5.0; 4])), 0.0);
        assert_eq!(batched_variance_direct(&b(vec![5.0])), 0.0);
    }

    #[test]
    fn within_equal_total_gives_zero_batched_variance() {
        assert_eq!(batched_variance_decomp(&synthetic(0.7, 0.7, 3)), 0.0);
    }

    #[test]
    fn multi_retailer_additivity() {
        let d = decompose(&HAND, 2).unwrap();
        assert_eq!(multi_retailer_variance(&[d, d]).unwrap(), 2.0);
        assert_eq!(
            multi_retailer_variance(&[d]).unwrap(),
            batched_variance_decomp(&d)
        );
        let other = decompose(&HAND, 1).unwrap();
        assert!(matches!(
            multi_retailer_variance(&[d, other]),
            Err(Error::Input(_))
        ));
        assert!(multi_retailer_variance(&[]).is_err());
    }

    #[test]
    fn asymptotic_examples() {
        assert_eq!(asymptotic_variance(1.0, 2, 2, &[0.5, 0.5]).unwrap(), 4.0);
        assert_eq!(
            asymptotic_variance(1.5, 3, 2, &[0.0, 0.0]).unwrap(),
            9.0 * 2.0 * 1.5
        );
        assert_eq!(asymptotic_variance(2.0, 1, 3, &[0.0; 3]).unwrap(), 6.0);
        assert!(asymptotic_variance(1.0, 2, 1, &[2.0]).unwrap() < 0.0);
        assert!(asymptotic_variance(f64::NAN, 2, 1, &[0.0]).is_err());
        assert!(asymptotic_variance(1.0, 2, 1, &[f64::INFINITY]).is_err());
        assert!(asymptotic_variance(1.0, 2, 2, &[0.0]).is_err());
    }

    #[test]
    fn lpw_formula() {
        assert_eq!(lpw_correlated_variance(2, 2, 10.0, 1.0), 402.0);
        assert_eq!(lpw_correlated_variance(3, 1, 10.0, 2.0), 6.0);
        assert_eq!(lpw_correlated_variance(3, 7, 0.0, 2.0), 6.0);
    }

    #[test]
    fn ratio() {
        assert_eq!(bullwhip_ratio(402.0, 2.0).unwrap(), 201.0);
        assert_eq!(bullwhip_ratio(3.3, 3.3).unwrap(), 1.0);
        assert_eq!(bullwhip_ratio(4.0, 2.0).unwrap(), 2.0);
        assert!(matches!(bullwhip_ratio(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(bullwhip_ratio(1.0, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn hand_sequence_is_scenario_b() {
        let l = classify_scenario(&decompose(&HAND, 2).unwrap(), EXACT_TOLERANCE);
        assert_eq!(l.label, Scenario::B);
        assert!((l.lhs - 0.8).abs() < 1e-15);
        assert_eq!(l.threshold, 0.75);
    }

    #[test]
    fn r1_and_constant_are_scenario_a() {
        let l = classify_scenario(&decompose(&HAND, 1).unwrap(), EXACT_TOLERANCE);
        assert_eq!((l.label, l.lhs, l.threshold), (Scenario::A, 0.0, 0.0));
        let l = classify_scenario(&decompose(&[2.0; 8], 4).unwrap(), EXACT_TOLERANCE);
        assert_eq!(l.label, Scenario::A);
    }

    #[test]
    fn multi_classification() {
        let pooled = [synthetic(0.0, 1.0, 2), synthetic(1.0, 1.0, 2)];
        let l = classify_scenario_multi(&pooled, EXACT_TOLERANCE).unwrap();
        assert_eq!(l.label, Scenario::C);
        assert_eq!(l.lhs, 0.5);

        let d = decompose(&HAND, 2).unwrap();
        let single = classify_scenario(&d, EXACT_TOLERANCE);
        let multi = classify_scenario_multi(&[d; 5], EXACT_TOLERANCE).unwrap();
        assert_eq!(single.label, multi.label);

        let flat = decompose(&[4.0; 4], 2).unwrap();
        assert_eq!(
            classify_scenario_multi(&[flat, flat], EXACT_TOLERANCE)
                .unwrap()
                .label,
            Scenario::A
        );
        assert!(classify_scenario_multi(&[d, decompose(&HAND, 4).unwrap()], 0.0).is_err());
    }

    #[test]
    fn tolerance_band_widens_scenario_a() {
        let d = decompose(&HAND, 2).unwrap();
        assert_eq!(classify_scenario(&d, 0.1).label, Scenario::A);
        assert_eq!(classify_scenario(&d, 0.04).label, Scenario::B);
    }

    #[test]
    fn json_keys() {
        let d = decompose(&HAND, 2).unwrap();
        let v = serde_json::to_value(d).unwrap();
        for k in ["sigma2_total", "sigma2_within", "sigma2_between", "R", "M"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        let v = serde_json::to_value(classify_scenario(&d, 1e-9)).unwrap();
        assert_eq!(v["label"], "B");
        for k in ["lhs", "threshold", "tolerance"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
