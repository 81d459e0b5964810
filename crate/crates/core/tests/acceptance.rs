//! Acceptance suite. Runs every criterion at its pinned tolerance, prints one
//! PASS/FAIL line each, and exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use orderbatch_core::*;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// 1. Closed-form headline figures.
fn lpw_headline() -> Outcome {
    let v = lpw_correlated_variance(2, 2, 10.0, 1.0);
    let ratio = bullwhip_ratio(v, 2.0).map_err(|e| e.to_string())?;
    check(
        v == 402.0 && ratio == 201.0,
        format!("variance {v}, ratio {ratio}"),
    )
}

/// 2. Simulated correlated ordering: Var(Z_i) ≈ 4 and ratio ≈ 2, not 402 and 201.
fn corrected_refutation() -> Outcome {
    let cfg = ExperimentConfig {
        demand: DemandParams::normal(10.0, 1.0),
        review: ReviewConfig::new(2, 2, 200_000).unwrap(),
        schedule: ScheduleKind::Correlated,
        replications: 10,
        master_seed: 42,
        ..Default::default()
    };
    let rep = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let var = rep.empirical_variance.mean;
    let ratio = rep.ratios.empirical.ok_or("no ratio")?.mean;
    check(
        (var - 4.0).abs() <= 0.03 * 4.0 && (ratio - 2.0).abs() <= 0.03 * 2.0,
        format!(
            "Var(Z_i) {var:.5} (target 4 ± 3%), ratio {ratio:.5} (target 2 ± 3%), closed form {}",
            rep.lpw_variance
        ),
    )
}

struct Case {
    values: Vec<f64>,
    r: usize,
}

/// 1000 randomized (distribution, T, R) sequences, fixed seed.
fn random_cases() -> Vec<Case> {
    let mut rng = orderbatch_core::rng::stream_rng(20_240_601);
    (0..1000)
        .map(|i| {
            let dist = DemandDistribution::ALL[i % 3];
            let r = rng.random_range(1..=12usize);
            let m = rng.random_range(1..=150usize);
            let mean = rng.random_range(0.5..200.0);
            let sigma2 = rng.random_range(0.01..50.0);
            let phi = if i % 4 == 0 {
                rng.random_range(-0.9..0.9)
            } else {
                0.0
            };
            let p = DemandParams::new(mean, sigma2, dist).with_phi(phi);
            let seq = demand::generate(&p, r * m, rng.random()).unwrap();
            Case {
                values: seq.into_values(),
                r,
            }
        })
        .collect()
}

/// 3. σ²_total = σ²_within + σ²_between on every case.
fn total_variance_identity(cases: &[Case]) -> Outcome {
    let mut worst: f64 = 0.0;
    for c in cases {
        let d = decompose(&c.values, c.r).map_err(|e| e.to_string())?;
        worst = worst.max(d.identity_residual() / d.sigma2_total.max(1.0));
    }
    check(
        worst <= 1e-9,
        format!(
            "{} cases, worst scaled residual {worst:.3e} (limit 1e-9)",
            cases.len()
        ),
    )
}

/// 4. Var(batches) = R² σ²_between = R² (σ²_total − σ²_within) on every case.
fn batched_variance_chain(cases: &[Case]) -> Outcome {
    let mut worst: f64 = 0.0;
    for c in cases {
        let d = decompose(&c.values, c.r).map_err(|e| e.to_string())?;
        let direct =
            batched_variance_direct(&periodic_batch(&c.values, c.r).map_err(|e| e.to_string())?);
        let between = (c.r * c.r) as f64 * d.sigma2_between;
        let via = batched_variance_decomp(&d);
        for (a, b) in [(direct, between), (between, via), (direct, via)] {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
        }
    }
    check(
        worst <= 1e-9,
        format!(
            "{} cases, worst relative gap {worst:.3e} (limit 1e-9)",
            cases.len()
        ),
    )
}

/// 5. [1, 3, 2, 4] with R = 2.
fn hand_oracle() -> Outcome {
    let xs = [1.0, 3.0, 2.0, 4.0];
    let d = decompose(&xs, 2).map_err(|e| e.to_string())?;
    let b = periodic_batch(&xs, 2).map_err(|e| e.to_string())?;
    let bv = batched_variance_direct(&b);
    let l = classify_scenario(&d, variance::EXACT_TOLERANCE);
    check(
        (d.sigma2_total, d.sigma2_within, d.sigma2_between) == (1.25, 1.0, 0.25)
            && b.aggregates == [4.0, 6.0]
            && bv == 1.0
            && l.label == Scenario::B
            && rel_close(l.lhs, 0.8, 1e-12)
            && l.threshold == 0.75,
        format!(
            "total {} within {} between {}, batches {:?} var {bv}, scenario {} ({:.3} vs {:.3})",
            d.sigma2_total,
            d.sigma2_within,
            d.sigma2_between,
            b.aggregates,
            l.label,
            l.lhs,
            l.threshold
        ),
    )
}

/// 6. Exactly-once vs binomial orderer counts at N = 2, R = 2, 10⁵ cycles.
fn schedule_distributions() -> Outcome {
    let cfg = ReviewConfig::new(2, 2, 100_000).unwrap();
    let rnd = count_stats(&schedule_random(&cfg, 42));
    let lpw = count_stats(&schedule_lpw_binomial(&cfg, 42));
    let totals_exact = rnd.cycle_total_pmf[2] == 1.0;
    let p1 = rnd.phase_pmf[0][1];
    let cov_r = rnd.covariance[0][1];
    let cov_l = lpw.covariance[0][1];
    let off = lpw.off_once_fraction;
    check(
        totals_exact
            && (p1 - 0.5).abs() <= 0.01
            && (cov_r + 0.5).abs() <= 0.02
            && cov_l.abs() <= 0.02
            && (off - 0.5).abs() <= 0.01,
        format!(
            "random: totals always 2 = {totals_exact}, P(n1=1) {p1:.4}, cov {cov_r:.4}; lpw: cov {cov_l:.4}, off-once {off:.4}"
        ),
    )
}

/// 7. Moving sums are serially correlated, periodic batches are not.
fn overlap_diagnostic() -> Outcome {
    let seq =
        gen_iid(&DemandParams::normal(10.0, 1.0), 1_000_000, 42).map_err(|e| e.to_string())?;
    let ms = moving_sum(seq.values(), 2).map_err(|e| e.to_string())?;
    let pb = periodic_batch(seq.values(), 2).map_err(|e| e.to_string())?;
    let a_ms = autocorrelation(&ms, 1).map_err(|e| e.to_string())?;
    let a_pb = autocorrelation(&pb.aggregates, 1).map_err(|e| e.to_string())?;
    check(
        (a_ms - 0.5).abs() <= 0.02 && a_pb.abs() <= 0.02,
        format!("moving-sum lag-1 {a_ms:.4} (0.5 ± 0.02), periodic lag-1 {a_pb:.4} (0 ± 0.02)"),
    )
}

/// 8. Ratio grows like R; realized-variance ratio ignores m while the closed form does not.
fn sweeps() -> Outcome {
    let template = ExperimentConfig {
        review: ReviewConfig::new(2, 1, 100_000).unwrap(),
        replications: 10,
        master_seed: 42,
        ..Default::default()
    };
    let rs = [1.0, 2.0, 4.0, 8.0];
    let s = sweep(&template, SweepParam::R, &rs).map_err(|e| e.to_string())?;
    let r_ratios: Vec<f64> = s
        .rows
        .iter()
        .map(|r| r.empirical_ratio.map_or(f64::NAN, |e| e.mean))
        .collect();
    let r_ok = r_ratios
        .iter()
        .zip(rs)
        .all(|(got, want)| (got - want).abs() <= 0.05 * want);

    let template = ExperimentConfig {
        review: ReviewConfig::new(2, 2, 100_000).unwrap(),
        ..template
    };
    let s = sweep(&template, SweepParam::Mean, &[0.0, 10.0, 100.0]).map_err(|e| e.to_string())?;
    let m_ratios: Vec<f64> = s
        .rows
        .iter()
        .map(|r| r.empirical_ratio.map_or(f64::NAN, |e| e.mean))
        .collect();
    let lpw: Vec<f64> = s.rows.iter().map(|r| r.lpw_variance).collect();
    let spread = m_ratios.iter().cloned().fold(f64::MIN, f64::max)
        - m_ratios.iter().cloned().fold(f64::MAX, f64::min);
    let m_ok = m_ratios.iter().all(|r| (r - 2.0).abs() <= 0.03 * 2.0) && spread <= 0.01 * 2.0;
    let lpw_ok = lpw == [2.0, 402.0, 40002.0];
    check(
        r_ok && m_ok && lpw_ok,
        format!("R-sweep ratios {r_ratios:.4?} (±5%); m-sweep ratios {m_ratios:.4?} (spread {spread:.2e}); closed form {lpw:?}"),
    )
}

/// 9. Same config and seed give byte-identical JSON for 1 and 4 worker threads.
fn determinism() -> Outcome {
    let mut outputs = Vec::new();
    for kind in [ScheduleKind::Random, ScheduleKind::LpwBinomial] {
        let cfg = ExperimentConfig {
            review: ReviewConfig::new(3, 3, 20_000).unwrap(),
            schedule: kind,
            replications: 8,
            master_seed: 7,
            ..Default::default()
        };
        let runs = [
            run_experiment_with_threads(&cfg, 1),
            run_experiment_with_threads(&cfg, 4),
            run_experiment(&cfg),
        ];
        let json: Vec<String> = runs
            .into_iter()
            .map(|r| r.and_then(|r| r.to_json()).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        outputs.push(json.windows(2).all(|w| w[0] == w[1]));
    }
    check(
        outputs.iter().all(|&b| b),
        format!("identical across thread counts: {outputs:?}"),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let cases = random_cases();
    let criteria: Vec<Criterion> = vec![
        ("1 closed-form headline 402 / 201", Box::new(lpw_headline)),
        (
            "2 corrected model: Var(Z_i) ~ 4, ratio ~ 2",
            Box::new(corrected_refutation),
        ),
        (
            "3 total variance identity, 1000 cases",
            Box::new(|| total_variance_identity(&cases)),
        ),
        (
            "4 batched variance chain, 1000 cases",
            Box::new(|| batched_variance_chain(&cases)),
        ),
        ("5 hand sequence [1,3,2,4], R=2", Box::new(hand_oracle)),
        (
            "6 schedule count distributions",
            Box::new(schedule_distributions),
        ),
        ("7 overlap autocorrelation", Box::new(overlap_diagnostic)),
        ("8 R and m sweeps", Box::new(sweeps)),
        ("9 determinism across thread counts", Box::new(determinism)),
    ];

    let mut failed = 0;
    for (name, run) in &criteria {
        let t = Instant::now();
        let outcome = run();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] criterion {name}: {detail} ({:.2?})", t.elapsed());
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.2?}",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
