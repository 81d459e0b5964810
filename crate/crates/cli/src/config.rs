//! Config files and the flag > file > default layering.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use orderbatch_core::{
    DemandDistribution, DemandParams, ExperimentConfig, ReviewConfig, ScheduleKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Config document. Mirrors `ExperimentConfig` with every key optional, plus the
/// output format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demand: Option<FileDemand>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub review: Option<FileReview>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDemand {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DemandDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileReview {
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl FileConfig {
    /// JSON when the extension is `.json`, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(anyhow::Error::from)
        } else {
            toml::from_str(&text).map_err(anyhow::Error::from)
        };
        parsed.with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn defaults() -> Self {
        let d = ExperimentConfig::default();
        FileConfig {
            demand: Some(FileDemand {
                m: Some(d.demand.mean),
                sigma2: Some(d.demand.sigma2),
                distribution: Some(d.demand.distribution),
                phi: Some(d.demand.phi),
            }),
            review: Some(FileReview {
                r: Some(d.review.cycle_len()),
                n: Some(d.review.retailers()),
                m: Some(d.review.cycles()),
            }),
            schedule: Some(d.schedule),
            replications: Some(d.replications),
            master_seed: Some(d.master_seed),
            scenario_tolerance: Some(d.scenario_tolerance),
            output_dir: None,
            format: Some(Format::Text),
        }
    }
}

/// Defaults as a commented TOML document that `--config` accepts unchanged.
pub fn defaults_toml() -> String {
    let d = ExperimentConfig::default();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# orderbatch defaults. Pass a copy with --config; flags override file values."
    );
    let line = |s: &mut String, kv: String, doc: &str| {
        let _ = writeln!(s, "{kv:<32} # {doc}");
    };
    line(
        &mut s,
        format!("schedule = \"{}\"", d.schedule),
        "--schedule: correlated | balanced | random | lpw_binomial",
    );
    line(
        &mut s,
        format!("replications = {}", d.replications),
        "--reps: independent replications K",
    );
    line(&mut s, format!("master_seed = {}", d.master_seed), "--seed");
    line(
        &mut s,
        format!("scenario_tolerance = {:?}", d.scenario_tolerance),
        "--tolerance: band for scenario A",
    );
    line(
        &mut s,
        "format = \"text\"".into(),
        "--format: json | csv | text",
    );
    line(
        &mut s,
        "# output_dir = \"results\"".into(),
        "--out: also write all formats here",
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "[demand]");
    line(
        &mut s,
        format!("m = {:?}", d.demand.mean),
        "--m: mean demand per period",
    );
    line(
        &mut s,
        format!("sigma2 = {:?}", d.demand.sigma2),
        "--sigma2: demand variance per period",
    );
    line(
        &mut s,
        format!("distribution = \"{}\"", d.demand.distribution),
        "--distribution: normal | gamma | uniform",
    );
    line(
        &mut s,
        format!("phi = {:?}", d.demand.phi),
        "--phi: AR(1) coefficient, |phi| < 1",
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "[review]");
    line(
        &mut s,
        format!("R = {}", d.review.cycle_len()),
        "--R: periods per review cycle",
    );
    line(
        &mut s,
        format!("N = {}", d.review.retailers()),
        "--N: retailers",
    );
    line(
        &mut s,
        format!("M = {}", d.review.cycles()),
        "--cycles: review cycles per replication",
    );
    s
}

/// Experiment flags shared by simulate, compare and diagnose.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// Number of retailers
    #[arg(long = "N", value_name = "N")]
    pub n: Option<usize>,
    /// Review cycle length in periods
    #[arg(long = "R", value_name = "R")]
    pub r: Option<usize>,
    /// Mean demand per period
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<f64>,
    /// Demand variance per period
    #[arg(long, allow_negative_numbers = true)]
    pub sigma2: Option<f64>,
    /// normal, gamma or uniform
    #[arg(long, value_parser = parse_distribution)]
    pub distribution: Option<DemandDistribution>,
    /// AR(1) coefficient of demand
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    /// correlated, balanced, random or lpw_binomial
    #[arg(long, value_parser = parse_schedule)]
    pub schedule: Option<ScheduleKind>,
    /// Review cycles M per replication
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Replications K
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tolerance for scenario A
    #[arg(long, allow_negative_numbers = true)]
    pub tolerance: Option<f64>,
    /// TOML or JSON config file
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Directory to write json, csv and text outputs into
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Format printed to stdout
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn parse_distribution(s: &str) -> Result<DemandDistribution, String> {
    s.parse().map_err(|e: orderbatch_core::Error| e.to_string())
}

fn parse_schedule(s: &str) -> Result<ScheduleKind, String> {
    s.parse().map_err(|e: orderbatch_core::Error| e.to_string())
}

/// Fixed parameter sets applied over the defaults and under file and flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// N=2, R=2, m=10, sigma2=1
    #[value(name = "lpw-section1")]
    LpwSection1,
}

impl Preset {
    fn layer(self) -> FileConfig {
        match self {
            Preset::LpwSection1 => FileConfig {
                demand: Some(FileDemand {
                    m: Some(10.0),
                    sigma2: Some(1.0),
                    ..Default::default()
                }),
                review: Some(FileReview {
                    r: Some(2),
                    n: Some(2),
                    m: None,
                }),
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: ExperimentConfig,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn layer(&self) -> FileConfig {
        FileConfig {
            demand: Some(FileDemand {
                m: self.m,
                sigma2: self.sigma2,
                distribution: self.distribution,
                phi: self.phi,
            }),
            review: Some(FileReview {
                r: self.r,
                n: self.n,
                m: self.cycles,
            }),
            schedule: self.schedule,
            replications: self.reps,
            master_seed: self.seed,
            scenario_tolerance: self.tolerance,
            output_dir: self.output.out.clone(),
            format: self.output.format,
        }
    }

    /// Effective config: defaults, then preset, then config file, then flags.
    pub fn resolve(&self, preset: Option<Preset>) -> Result<Resolved> {
        let mut layers = vec![FileConfig::defaults()];
        layers.extend(preset.map(Preset::layer));
        if let Some(path) = &self.config {
            layers.push(FileConfig::load(path)?);
        }
        layers.push(self.layer());
        let merged = layers.into_iter().fold(FileConfig::default(), merge);

        let demand = merged.demand.unwrap_or_default();
        let review = merged.review.unwrap_or_default();
        let base = ExperimentConfig::default();
        let experiment = ExperimentConfig {
            demand: DemandParams::new(
                demand.m.unwrap_or(base.demand.mean),
                demand.sigma2.unwrap_or(base.demand.sigma2),
                demand.distribution.unwrap_or(base.demand.distribution),
            )
            .with_phi(demand.phi.unwrap_or(base.demand.phi)),
            review: ReviewConfig::new(
                review.r.unwrap_or(base.review.cycle_len()),
                review.n.unwrap_or(base.review.retailers()),
                review.m.unwrap_or(base.review.cycles()),
            )?,
            schedule: merged.schedule.unwrap_or(base.schedule),
            replications: merged.replications.unwrap_or(base.replications),
            master_seed: merged.master_seed.unwrap_or(base.master_seed),
            scenario_tolerance: merged.scenario_tolerance.unwrap_or(base.scenario_tolerance),
            output_dir: merged.output_dir.clone(),
        };
        experiment.validate()?;
        Ok(Resolved {
            experiment,
            format: merged.format.unwrap_or(Format::Text),
            out: merged.output_dir,
        })
    }
}

/// `over` wins wherever it sets a value.
fn merge(under: FileConfig, over: FileConfig) -> FileConfig {
    let demand = match (under.demand, over.demand) {
        (Some(u), Some(o)) => Some(FileDemand {
            m: o.m.or(u.m),
            sigma2: o.sigma2.or(u.sigma2),
            distribution: o.distribution.or(u.distribution),
            phi: o.phi.or(u.phi),
        }),
        (u, o) => o.or(u),
    };
    let review = match (under.review, over.review) {
        (Some(u), Some(o)) => Some(FileReview {
            r: o.r.or(u.r),
            n: o.n.or(u.n),
            m: o.m.or(u.m),
        }),
        (u, o) => o.or(u),
    };
    FileConfig {
        demand,
        review,
        schedule: over.schedule.or(under.schedule),
        replications: over.replications.or(under.replications),
        master_seed: over.master_seed.or(under.master_seed),
        scenario_tolerance: over.scenario_tolerance.or(under.scenario_tolerance),
        output_dir: over.output_dir.or(under.output_dir),
        format: over.format.or(under.format),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_document_parses_back_to_defaults() {
        let parsed: FileConfig = toml::from_str(&defaults_toml()).unwrap();
        assert_eq!(parsed, FileConfig::defaults());
        let r = ExperimentArgs::default().resolve(None).unwrap();
        assert_eq!(r.experiment, ExperimentConfig::default());
        assert_eq!(r.format, Format::Text);
    }

    #[test]
    fn flags_beat_file_beat_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "replications = 3\n[review]\nR = 4\nM = 50\n").unwrap();
        let args = ExperimentArgs {
            config: Some(path),
            cycles: Some(70),
            ..Default::default()
        };
        let r = args.resolve(Some(Preset::LpwSection1)).unwrap().experiment;
        assert_eq!(r.review.cycle_len(), 4);
        assert_eq!(r.review.retailers(), 2);
        assert_eq!(r.review.cycles(), 70);
        assert_eq!(r.replications, 3);
        assert_eq!((r.demand.mean, r.demand.sigma2), (10.0, 1.0));
    }

    #[test]
    fn unknown_keys_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"review": {"R": 2, "Q": 1}}"#).unwrap();
        let err = FileConfig::load(&path).unwrap_err();
        assert!(format!("{err:#}").contains("Q"), "{err:#}");
    }
}
