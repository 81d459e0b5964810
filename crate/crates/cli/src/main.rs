mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use serde::Serialize;

use orderbatch_core::io::format_decimal;
use orderbatch_core::variance::EXACT_TOLERANCE;
use orderbatch_core::{
    batched_variance_direct, classify_scenario, compare_models, decompose, diagnose,
    periodic_batch, run_experiment, simulate_replication, sweep, CycleDecomposition,
    DemandSequence, ScenarioLabel, SweepParam,
};

use config::{defaults_toml, ExperimentArgs, FileConfig, Format, OutputArgs, Preset};

/// Order-batching experiments: supplier order variance under periodic review.
#[derive(Debug, Parser)]
#[command(name = "orderbatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run replicated experiments and report supplier order variance
    Simulate(ExperimentArgs),
    /// Decompose a demand series from CSV into within- and between-cycle variance
    Decompose(DecomposeArgs),
    /// Compare empirical, corrected and closed-form variances, optionally over a sweep
    Compare(CompareArgs),
    /// Phase, orderer-count, ergodicity and overlap diagnostics for one replication
    Diagnose(ExperimentArgs),
    /// Print the default configuration as a config file
    Defaults {
        /// Print as json instead of commented toml
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

#[derive(Debug, clap::Args)]
struct DecomposeArgs {
    /// CSV with an `xi` column, or a single unlabelled column
    input: PathBuf,
    /// Review cycle length
    #[arg(long = "R", value_name = "R")]
    r: usize,
    /// Tolerance for scenario A
    #[arg(long, default_value_t = EXACT_TOLERANCE, allow_negative_numbers = true)]
    tolerance: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, clap::Args)]
struct CompareArgs {
    /// Named parameter set applied before config file and flags
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Sweep one of R, N, m, sigma2, phi over comma-separated values
    #[arg(long, num_args = 2, value_names = ["PARAM", "VALUES"], allow_hyphen_values = true)]
    sweep: Option<Vec<String>>,
    #[command(flatten)]
    experiment: ExperimentArgs,
}

/// One result rendered three ways, plus optional extra files for `--out`.
struct Output {
    stem: &'static str,
    json: String,
    csv: Vec<u8>,
    text: String,
    extra: Vec<(&'static str, Vec<u8>)>,
}

impl Output {
    fn emit(self, format: Format, out: Option<&Path>) -> Result<()> {
        let stdout_bytes = match format {
            Format::Json => format!("{}\n", self.json).into_bytes(),
            Format::Csv => self.csv.clone(),
            Format::Text => self.text.clone().into_bytes(),
        };
        if let Some(dir) = out {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create output directory {}", dir.display()))?;
            let files = [
                (format!("{}.json", self.stem), self.json.into_bytes()),
                (format!("{}.csv", self.stem), self.csv),
                (format!("{}.txt", self.stem), self.text.into_bytes()),
            ];
            let extra = self.extra.into_iter().map(|(n, b)| (n.to_string(), b));
            for (name, bytes) in files.into_iter().chain(extra) {
                let path = dir.join(name);
                std::fs::write(&path, bytes)
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
        let mut stdout = std::io::stdout().lock();
        match stdout
            .write_all(&stdout_bytes)
            .and_then(|()| stdout.flush())
        {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => Ok(r?),
        }
    }
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> orderbatch_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn cmd_simulate(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.resolve(None)?;
    let report = run_experiment(&cfg.experiment)?;
    Output {
        stem: "report",
        json: report.to_json()?,
        csv: csv_bytes(|b| report.write_csv(b))?,
        text: report.render_text(),
        extra: Vec::new(),
    }
    .emit(cfg.format, cfg.out.as_deref())
}

#[derive(Serialize)]
struct DecomposeReport {
    input: String,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "R")]
    r: usize,
    decomposition: CycleDecomposition,
    identity_residual: f64,
    batched_variance: f64,
    scenario: ScenarioLabel,
}

impl DecomposeReport {
    fn write_csv(&self, buf: &mut Vec<u8>) -> orderbatch_core::Result<()> {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "T",
            "R",
            "M",
            "sigma2_total",
            "sigma2_within",
            "sigma2_between",
            "batched_variance",
            "lhs",
            "threshold",
            "scenario",
        ])?;
        let d = &self.decomposition;
        w.write_record([
            self.t.to_string(),
            self.r.to_string(),
            d.cycles.to_string(),
            format_decimal(d.sigma2_total),
            format_decimal(d.sigma2_within),
            format_decimal(d.sigma2_between),
            format_decimal(self.batched_variance),
            format_decimal(self.scenario.lhs),
            format_decimal(self.scenario.threshold),
            self.scenario.label.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }

    fn render_text(&self) -> String {
        let d = &self.decomposition;
        let s = &self.scenario;
        format!(
            "input {}  T={} R={} M={}\n\
             total variance     {:.12}\n\
             within-cycle       {:.12}\n\
             between-cycle      {:.12}\n\
             batched variance   {:.12}\n\
             within/total {:.6} vs (R^2-1)/R^2 {:.6}: scenario {} ({})\n",
            self.input,
            self.t,
            self.r,
            d.cycles,
            d.sigma2_total,
            d.sigma2_within,
            d.sigma2_between,
            self.batched_variance,
            s.lhs,
            s.threshold,
            s.label,
            s.label.describe(),
        )
    }
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<()> {
    let file =
        File::open(&args.input).with_context(|| format!("cannot open {}", args.input.display()))?;
    let seq = DemandSequence::read_csv(BufReader::new(file))
        .with_context(|| format!("cannot read demand from {}", args.input.display()))?;
    if !(args.tolerance.is_finite() && args.tolerance >= 0.0) {
        anyhow::bail!(
            "invalid tolerance: must be finite and >= 0 (got {})",
            args.tolerance
        );
    }
    let d = decompose(seq.values(), args.r)?;
    let batches = periodic_batch(seq.values(), args.r)?;
    let report = DecomposeReport {
        input: args.input.display().to_string(),
        t: seq.len(),
        r: args.r,
        identity_residual: d.identity_residual(),
        batched_variance: batched_variance_direct(&batches),
        scenario: classify_scenario(&d, args.tolerance),
        decomposition: d,
    };
    Output {
        stem: "decomposition",
        json: serde_json::to_string_pretty(&report)?,
        csv: csv_bytes(|b| report.write_csv(b))?,
        text: report.render_text(),
        extra: Vec::new(),
    }
    .emit(
        args.output.format.unwrap_or(Format::Text),
        args.output.out.as_deref(),
    )
}

/// Exits with status 2 and the usage of `compare`.
fn usage_error(msg: String) -> ! {
    let mut cmd = Cli::command();
    cmd.build();
    let compare = cmd
        .find_subcommand_mut("compare")
        .expect("compare subcommand");
    compare.error(ErrorKind::InvalidValue, msg).exit()
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let cfg = args.experiment.resolve(args.preset)?;
    let output = match &args.sweep {
        Some(sweep_args) => {
            let param: SweepParam = sweep_args[0]
                .parse()
                .unwrap_or_else(|e: orderbatch_core::Error| usage_error(format!("--sweep: {e}")));
            let values: Vec<f64> = sweep_args[1]
                .split(',')
                .map(|v| {
                    v.trim().parse().unwrap_or_else(|_| {
                        usage_error(format!("--sweep: cannot parse {v:?} as a number"))
                    })
                })
                .collect();
            let s = sweep(&cfg.experiment, param, &values)?;
            Output {
                stem: "sweep",
                json: serde_json::to_string_pretty(&s)?,
                csv: csv_bytes(|b| s.write_csv(b))?,
                text: s.render_text(),
                extra: Vec::new(),
            }
        }
        None => {
            let c = compare_models(&cfg.experiment)?;
            Output {
                stem: "comparison",
                json: serde_json::to_string_pretty(&c)?,
                csv: csv_bytes(|b| c.write_csv(b))?,
                text: c.render_text(),
                extra: Vec::new(),
            }
        }
    };
    output.emit(cfg.format, cfg.out.as_deref())
}

fn cmd_diagnose(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.resolve(None)?;
    let report = diagnose(&cfg.experiment)?;
    let mut extra = Vec::new();
    if cfg.out.is_some() {
        let rep = simulate_replication(&cfg.experiment, 0)?;
        extra.push(("schedule.csv", csv_bytes(|b| rep.schedule.write_csv(b))?));
        extra.push(("supplier.csv", csv_bytes(|b| rep.supplier.write_csv(b))?));
    }
    Output {
        stem: "diagnostics",
        json: report.to_json()?,
        csv: csv_bytes(|b| report.write_csv(b))?,
        text: report.render_text(),
        extra,
    }
    .emit(cfg.format, cfg.out.as_deref())
}

fn cmd_defaults(format: Option<Format>) -> Result<()> {
    let mut out = BufWriter::new(std::io::stdout().lock());
    match format {
        Some(Format::Json) => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&FileConfig::defaults())?
        )?,
        Some(Format::Csv) => {
            anyhow::bail!("invalid format: defaults are printed as text (toml) or json")
        }
        Some(Format::Text) | None => write!(out, "{}", defaults_toml())?,
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Defaults { format } => cmd_defaults(*format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
