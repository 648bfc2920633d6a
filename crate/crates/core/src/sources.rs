//! Synthetic stationary test sources and ingestion of external sequences.
//!
//! All randomness comes from xoshiro256++ seeded through SplitMix64, and the
//! transcendental functions come from `libm`, so a `(SourceSpec, seed)` pair
//! produces the same bits on every platform.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The generator used everywhere a seed appears.
pub type SeededRng = Xoshiro256PlusPlus;

pub fn seeded_rng(seed: u64) -> SeededRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceKind {
    /// Two-sided exponential with density `exp(-|x|/scale) / (2 scale)`.
    Laplace { scale: f64 },
    Gaussian { mean: f64, variance: f64 },
    /// `x_t = rho x_{t-1} + w_t` with `w_t ~ N(0, innovation_variance)`.
    Ar1 { rho: f64, innovation_variance: f64 },
}

impl SourceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::Laplace { .. } => "laplace",
            SourceKind::Gaussian { .. } => "gaussian",
            SourceKind::Ar1 { .. } => "ar1",
        }
    }

    /// Marginal variance of the stationary process.
    pub fn variance(&self) -> f64 {
        match *self {
            SourceKind::Laplace { scale } => 2.0 * scale * scale,
            SourceKind::Gaussian { variance, .. } => variance,
            SourceKind::Ar1 {
                rho,
                innovation_variance,
            } => innovation_variance / (1.0 - rho * rho),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub n: usize,
    pub seed: u64,
}

impl SourceSpec {
    pub fn new(kind: SourceKind, n: usize, seed: u64) -> Self {
        SourceSpec { kind, n, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "length must be at least 1"));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self.kind {
            SourceKind::Laplace { scale } if !positive(scale) => {
                Err(Error::param("scale", format!("must be positive, got {scale}")))
            }
            SourceKind::Gaussian { mean, .. } if !mean.is_finite() => {
                Err(Error::param("mean", format!("must be finite, got {mean}")))
            }
            SourceKind::Gaussian { variance, .. } if !positive(variance) => Err(Error::param(
                "variance",
                format!("must be positive, got {variance}"),
            )),
            SourceKind::Ar1 { rho, .. } if !(rho.abs() < 1.0) => Err(Error::param(
                "rho",
                format!("stationarity requires |rho| < 1, got {rho}"),
            )),
            SourceKind::Ar1 {
                innovation_variance,
                ..
            } if !positive(innovation_variance) => Err(Error::param(
                "innovation_variance",
                format!("must be positive, got {innovation_variance}"),
            )),
            _ => Ok(()),
        }
    }
}

/// A real-valued input sequence with its summary statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalBuffer {
    samples: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl SignalBuffer {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                location: format!("sample {}", pos + 1),
                reason: "non-finite value".into(),
            });
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let variance = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(SignalBuffer {
            samples,
            mean,
            variance,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn empirical_mean(&self) -> f64 {
        self.mean
    }

    /// Population variance, `(1/n) sum (x_i - mean)^2`.
    pub fn empirical_variance(&self) -> f64 {
        self.variance
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Box-Muller normal sampler. Both outputs of each pair are used, in order.
struct BoxMuller {
    spare: Option<f64>,
}

impl BoxMuller {
    fn new() -> Self {
        BoxMuller { spare: None }
    }

    fn sample(&mut self, rng: &mut SeededRng) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1: f64 = rng.sample(Open01);
        let u2: f64 = rng.sample(Open01);
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }
}

fn laplace_sample(rng: &mut SeededRng, scale: f64) -> f64 {
    // Inverse CDF of one uniform on (0, 1).
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    let magnitude = -scale * libm::log(1.0 - 2.0 * u.abs());
    if u < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

pub fn generate(spec: &SourceSpec) -> Result<SignalBuffer> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let mut samples = Vec::with_capacity(spec.n);
    match spec.kind {
        SourceKind::Laplace { scale } => {
            samples.extend((0..spec.n).map(|_| laplace_sample(&mut rng, scale)));
        }
        SourceKind::Gaussian { mean, variance } => {
            let sd = libm::sqrt(variance);
            let mut normal = BoxMuller::new();
            samples.extend((0..spec.n).map(|_| mean + sd * normal.sample(&mut rng)));
        }
        SourceKind::Ar1 {
            rho,
            innovation_variance,
        } => {
            let sd = libm::sqrt(innovation_variance);
            let stationary_sd = libm::sqrt(innovation_variance / (1.0 - rho * rho));
            let mut normal = BoxMuller::new();
            let mut prev = stationary_sd * normal.sample(&mut rng);
            samples.push(prev);
            for _ in 1..spec.n {
                prev = rho * prev + sd * normal.sample(&mut rng);
                samples.push(prev);
            }
        }
    }
    SignalBuffer::new(samples)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleFormat {
    /// Packed little-endian IEEE-754 doubles, no header.
    RawFloat64,
    /// One decimal real per line, LF or CRLF.
    TextLines,
}

pub fn parse_raw_f64(bytes: &[u8]) -> Result<SignalBuffer> {
    if bytes.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Parse {
            location: format!("byte offset {}", bytes.len() - bytes.len() % 8),
            reason: format!("trailing {} bytes do not form a float64", bytes.len() % 8),
        });
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    SignalBuffer::new(samples)
}

pub fn parse_text_lines(text: &str) -> Result<SignalBuffer> {
    let mut samples = Vec::new();
    for (idx, line) in text.split('\n').enumerate() {
        let token = line.strip_suffix('\r').unwrap_or(line).trim();
        if token.is_empty() {
            continue;
        }
        let value: f64 = token.parse().map_err(|_| Error::Parse {
            location: format!("line {}", idx + 1),
            reason: format!("malformed value {token:?}"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                location: format!("line {}", idx + 1),
                reason: format!("non-finite value {token:?}"),
            });
        }
        samples.push(value);
    }
    SignalBuffer::new(samples)
}

pub fn ingest(path: impl AsRef<Path>, format: SampleFormat) -> Result<SignalBuffer> {
    let bytes = fs::read(path)?;
    match format {
        SampleFormat::RawFloat64 => parse_raw_f64(&bytes),
        SampleFormat::TextLines => {
            let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
                location: format!("byte offset {}", e.valid_up_to()),
                reason: "invalid UTF-8".into(),
            })?;
            parse_text_lines(text)
        }
    }
}

pub fn encode_samples(samples: &[f64], format: SampleFormat) -> Vec<u8> {
    match format {
        SampleFormat::RawFloat64 => samples.iter().flat_map(|v| v.to_le_bytes()).collect(),
        SampleFormat::TextLines => {
            let mut out = Vec::with_capacity(samples.len() * 24);
            for v in samples {
                // `{:?}` round-trips f64 exactly.
                writeln!(out, "{v:?}").expect("write to Vec");
            }
            out
        }
    }
}

pub fn write_samples(path: impl AsRef<Path>, samples: &[f64], format: SampleFormat) -> Result<()> {
    fs::write(path, encode_samples(samples, format))?;
    Ok(())
}
