//! Reproducible demand paths.
//!
//! Generators are pure functions of `(params, T, seed)`. Normal draws are never
//! truncated, so negative demand can occur; truncation would move the mean and
//! variance away from the requested values.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::format_decimal;
use crate::rng::stream_rng;
use crate::stats::population_moments;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandDistribution {
    Normal,
    /// Moment-matched: shape m²/σ², scale σ²/m.
    Gamma,
    /// Symmetric on m ± √(3σ²).
    Uniform,
}

impl DemandDistribution {
    pub const ALL: [DemandDistribution; 3] = [Self::Normal, Self::Gamma, Self::Uniform];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Gamma => "gamma",
            Self::Uniform => "uniform",
        }
    }
}

impl fmt::Display for DemandDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DemandDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Self::Normal),
            "gamma" => Ok(Self::Gamma),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::param(
                "distribution",
                format!("expected one of normal, gamma, uniform (got {other:?})"),
            )),
        }
    }
}

/// Per-period demand law: mean `m`, variance `sigma2`, shape, optional AR(1) coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandParams {
    #[serde(rename = "m")]
    pub mean: f64,
    pub sigma2: f64,
    pub distribution: DemandDistribution,
    #[serde(default)]
    pub phi: f64,
}

impl DemandParams {
    pub fn new(mean: f64, sigma2: f64, distribution: DemandDistribution) -> Self {
        Self {
            mean,
            sigma2,
            distribution,
            phi: 0.0,
        }
    }

    pub fn normal(mean: f64, sigma2: f64) -> Self {
        Self::new(mean, sigma2, DemandDistribution::Normal)
    }

    pub fn with_phi(self, phi: f64) -> Self {
        Self { phi, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::param(
                "m",
                format!("must be finite (got {})", self.mean),
            ));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::param(
                "sigma2",
                format!("must be finite and > 0 (got {})", self.sigma2),
            ));
        }
        if self.distribution == DemandDistribution::Gamma && self.mean <= 0.0 {
            return Err(Error::param(
                "m",
                format!("gamma demand needs m > 0 (got {})", self.mean),
            ));
        }
        self.validate_phi()
    }

    fn validate_phi(&self) -> Result<()> {
        if !(self.phi.is_finite() && self.phi.abs() < 1.0) {
            return Err(Error::param(
                "phi",
                format!("must satisfy |phi| < 1 (got {})", self.phi),
            ));
        }
        Ok(())
    }

    /// Innovation sampler: zero-mean draws with variance `sigma2` in the configured shape.
    fn innovations(&self) -> Innovations {
        let sd = self.sigma2.sqrt();
        match self.distribution {
            DemandDistribution::Normal => {
                Innovations::Normal(Normal::new(0.0, sd).expect("validated sigma2"))
            }
            DemandDistribution::Gamma => {
                let shape = self.mean * self.mean / self.sigma2;
                let scale = self.sigma2 / self.mean;
                Innovations::Gamma(
                    Gamma::new(shape, scale).expect("validated gamma params"),
                    self.mean,
                )
            }
            DemandDistribution::Uniform => {
                let half = (3.0 * self.sigma2).sqrt();
                Innovations::Uniform(Uniform::new(-half, half).expect("validated sigma2"))
            }
        }
    }
}

enum Innovations {
    Normal(Normal<f64>),
    Gamma(Gamma<f64>, f64),
    Uniform(Uniform<f64>),
}

impl Innovations {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Innovations::Normal(d) => d.sample(rng),
            Innovations::Gamma(d, mean) => d.sample(rng) - mean,
            Innovations::Uniform(d) => d.sample(rng),
        }
    }
}

/// A realized demand path ξ_1..ξ_T.
///
/// `params` and `seed` are `None` for sequences imported from data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSequence {
    values: Vec<f64>,
    params: Option<DemandParams>,
    seed: Option<u64>,
}

impl DemandSequence {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("demand sequence is empty".into()));
        }
        if let Some(t) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite demand at period {}",
                t + 1
            )));
        }
        Ok(Self {
            values,
            params: None,
            seed: None,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn params(&self) -> Option<&DemandParams> {
        self.params.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Writes the one-column `xi` CSV form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["xi"])?;
        for v in &self.values {
            w.write_record([format_decimal(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV with a header row and an `xi` column (other columns are ignored).
    /// Reads the `xi` column of a CSV file. A file with a single unlabelled numeric
    /// column is also accepted.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = r.records();
        let first = records
            .next()
            .ok_or_else(|| Error::Input("CSV file is empty".into()))??;
        let headerless = first.len() == 1 && first[0].parse::<f64>().is_ok();
        let (col, mut values) = if headerless {
            (0, vec![first[0].parse::<f64>().unwrap_or(f64::NAN)])
        } else {
            let col = first
                .iter()
                .position(|h| h == "xi")
                .ok_or_else(|| Error::Input("CSV header has no `xi` column".into()))?;
            (col, Vec::new())
        };
        for (row, rec) in records.enumerate() {
            let rec = rec?;
            let field = rec.get(col).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| {
                let row = row + 1 + usize::from(headerless);
                Error::Input(format!("row {row}: cannot parse {field:?} as a number"))
            })?;
            values.push(v);
        }
        Self::from_values(values)
    }
}

impl AsRef<[f64]> for DemandSequence {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

fn check_horizon(t: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::param("T", "sequence length must be >= 1"));
    }
    Ok(())
}

/// T independent draws with mean `m` and variance `sigma2`. `phi` is ignored.
pub fn gen_iid(params: &DemandParams, t: usize, seed: u64) -> Result<DemandSequence> {
    DemandParams {
        phi: 0.0,
        ..*params
    }
    .validate()?;
    check_horizon(t)?;
    let innov = params.innovations();
    let mut rng = stream_rng(seed);
    let values = (0..t).map(|_| params.mean + innov.draw(&mut rng)).collect();
    Ok(DemandSequence {
        values,
        params: Some(*params),
        seed: Some(seed),
    })
}

/// Stationary AR(1) path with marginal mean `m` and marginal variance `sigma2`.
///
/// The deviation follows d_t = φ d_{t-1} + √(1-φ²) ε_t with ε_t the same innovation
/// stream `gen_iid` uses and d_1 = ε_1, so φ = 0 reproduces `gen_iid` bit for bit.
pub fn gen_ar1(params: &DemandParams, t: usize, seed: u64) -> Result<DemandSequence> {
    params.validate()?;
    check_horizon(t)?;
    let innov = params.innovations();
    let mut rng = stream_rng(seed);
    let scale = (1.0 - params.phi * params.phi).sqrt();
    let mut dev = innov.draw(&mut rng);
    let mut values = Vec::with_capacity(t);
    values.push(params.mean + dev);
    for _ in 1..t {
        dev = params.phi * dev + scale * innov.draw(&mut rng);
        values.push(params.mean + dev);
    }
    Ok(DemandSequence {
        values,
        params: Some(*params),
        seed: Some(seed),
    })
}

/// `gen_ar1` when φ ≠ 0, otherwise `gen_iid`.
pub fn generate(params: &DemandParams, t: usize, seed: u64) -> Result<DemandSequence> {
    if params.phi == 0.0 {
        gen_iid(params, t, seed)
    } else {
        gen_ar1(params, t, seed)
    }
}

/// Mean and population variance of a realized sequence.
pub fn sequence_stats(seq: &[f64]) -> Result<(f64, f64)> {
    population_moments(seq).ok_or_else(|| Error::Input("cannot summarize an empty sequence".into()))
}
