//! Reference rate-distortion curves: entropy-coded scalar quantization and
//! Shannon bounds for Gaussian, discretized iid, and Gaussian AR(1) sources.
//!
//! Slopes follow the annealer's convention: `beta < 0` is `dR/dD` in bits per
//! unit of squared error.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::codec::RDPoint;
use crate::error::{Error, Result};
use crate::sources::SignalBuffer;

/// A labelled curve, sorted by distortion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RDCurve {
    pub label: String,
    /// How the points were computed, with the parameters used.
    pub provenance: String,
    pub points: Vec<RDPoint>,
}

impl RDCurve {
    pub fn new(label: impl Into<String>, provenance: impl Into<String>, mut points: Vec<RDPoint>) -> Self {
        points.sort_by(|a, b| a.distortion.total_cmp(&b.distortion).then(b.rate.total_cmp(&a.rate)));
        RDCurve {
            label: label.into(),
            provenance: provenance.into(),
            points,
        }
    }

    pub fn distortion_range(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.distortion, self.points.last()?.distortion))
    }

    /// Rate at distortion `d`, linear in `D` between neighbouring points.
    /// `None` outside the curve's distortion range.
    pub fn rate_at(&self, d: f64) -> Option<f64> {
        let (lo, hi) = self.distortion_range()?;
        if !(lo..=hi).contains(&d) {
            return None;
        }
        let idx = self.points.partition_point(|p| p.distortion < d);
        let right = &self.points[idx];
        if right.distortion == d || idx == 0 {
            return Some(right.rate);
        }
        let left = &self.points[idx - 1];
        let w = (d - left.distortion) / (right.distortion - left.distortion);
        Some(left.rate + w * (right.rate - left.rate))
    }
}

/// Order-0 empirical entropy of a sequence of integers, in bits per symbol.
fn empirical_entropy(indices: &[i64]) -> f64 {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut h = 0.0;
    for run in sorted.chunk_by(|a, b| a == b) {
        let p = run.len() as f64 / n;
        h -= p * libm::log2(p);
    }
    h.max(0.0)
}

/// Rate and distortion of the uniform quantizer `round(x / q) * q` with an
/// ideal entropy coder for the indices.
pub fn ecsq_point(x: &SignalBuffer, step: f64) -> Result<RDPoint> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::param("step", format!("must be positive, got {step}")));
    }
    let mut sq = 0.0;
    let indices: Vec<i64> = x
        .samples()
        .iter()
        .map(|&v| {
            let j = (v / step).round();
            let e = v - j * step;
            sq += e * e;
            j as i64
        })
        .collect();
    Ok(RDPoint::new(
        empirical_entropy(&indices),
        sq / x.len() as f64,
        x.empirical_variance(),
    ))
}

pub fn ecsq_curve(x: &SignalBuffer, steps: &[f64]) -> Result<RDCurve> {
    let points = steps.iter().map(|&q| ecsq_point(x, q)).collect::<Result<Vec<_>>>()?;
    Ok(RDCurve::new("ECSQ", "uniform mid-tread quantizer, empirical index entropy", points))
}

/// Geometric ladder of `count` step sizes from `lo` to `hi`.
pub fn step_ladder(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let ratio = libm::log(hi / lo) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo * libm::exp(ratio * i as f64) })
        .collect()
}

/// `R(D) = log2(variance / D) / 2` for an iid Gaussian source.
pub fn gaussian_rd(variance: f64, d: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::param("variance", format!("must be positive, got {variance}")));
    }
    if !(d > 0.0 && d <= variance) {
        return Err(Error::param("distortion", format!("{d} outside (0, {variance}]")));
    }
    Ok(0.5 * libm::log2(variance / d))
}

/// A finite-support probability mass function.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSource {
    pub points: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DiscreteSource {
    /// Sample `density` at `count` equally spaced points on `[lo, hi]` and
    /// normalize.
    pub fn discretize(density: impl Fn(f64) -> f64, lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(Error::param("grid", "need at least two points on a nonempty interval"));
        }
        let h = (hi - lo) / (count - 1) as f64;
        let points: Vec<f64> = (0..count).map(|i| lo + h * i as f64).collect();
        let mut probs: Vec<f64> = points.iter().map(|&x| density(x).max(0.0)).collect();
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::param("density", "does not integrate to a positive number"));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(DiscreteSource { points, probs })
    }

    /// Laplace density with the given scale on `+-12 scale`.
    pub fn laplace(scale: f64, count: usize) -> Result<Self> {
        Self::discretize(|x| libm::exp(-x.abs() / scale), -12.0 * scale, 12.0 * scale, count)
    }

    pub fn gaussian(variance: f64, half_width: f64, count: usize) -> Result<Self> {
        Self::discretize(|x| libm::exp(-x * x / (2.0 * variance)), -half_width, half_width, count)
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.points.iter().zip(&self.probs).map(|(x, p)| p * (x - m) * (x - m)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlahutArimotoOptions {
    /// Stop when the duality gap falls below this many bits.
    pub tol: f64,
    pub max_iterations: usize,
    /// Exponent on the multiplicative update; values above one over-relax.
    pub relaxation: f64,
}

impl Default for BlahutArimotoOptions {
    fn default() -> Self {
        BlahutArimotoOptions {
            tol: 1e-4,
            max_iterations: 200_000,
            relaxation: 1.0,
        }
    }
}

/// Output of one Blahut-Arimoto run.
#[derive(Clone, Debug, PartialEq)]
pub struct BlahutArimotoSolution {
    pub rate: f64,
    pub distortion: f64,
    /// Optimal reproduction distribution over the reproduction points.
    pub output: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
}

/// Kernel entries below this are dropped and output masses are floored at
/// it, so every product stays a normal float. Subnormal arithmetic would
/// otherwise dominate the run time.
const TINY: f64 = 1e-150;

#[inline]
fn flush(v: f64) -> f64 {
    if v < TINY {
        0.0
    } else {
        v
    }
}

/// The point of slope `beta` on the rate-distortion curve of `source` with
/// reproductions restricted to `reproduction`. `start` seeds the output
/// distribution (uniform when `None`).
pub fn blahut_arimoto(
    source: &DiscreteSource,
    reproduction: &[f64],
    beta: f64,
    start: Option<&[f64]>,
    options: BlahutArimotoOptions,
) -> Result<BlahutArimotoSolution> {
    if !(beta < 0.0) || !beta.is_finite() {
        return Err(Error::param("beta", format!("must be negative, got {beta}")));
    }
    if !(options.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    if reproduction.is_empty() || reproduction.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("reproduction", "need finite reproduction points"));
    }
    let lambda = -beta * LN_2;
    let rows = source.points.len();
    let cols = reproduction.len();

    // Kernel exp(-lambda (d_ij - m_i)) with the row minimum m_i removed.
    let mut shift = vec![0.0; rows];
    let mut kernel = vec![0.0; rows * cols];
    for (i, &x) in source.points.iter().enumerate() {
        let m = reproduction.iter().map(|&y| (x - y) * (x - y)).fold(f64::INFINITY, f64::min);
        shift[i] = m;
        for (j, &y) in reproduction.iter().enumerate() {
            kernel[i * cols + j] = flush(libm::exp(-lambda * ((x - y) * (x - y) - m)));
        }
    }

    let mut q: Vec<f64> = match start {
        Some(s) if s.len() == cols => s.iter().map(|&v| v.max(1e-300)).collect(),
        _ => vec![1.0 / cols as f64; cols],
    };
    let mut z = vec![0.0; rows];
    let mut c = vec![0.0; cols];
    let mut iterations = 0;
    let gap = loop {
        for i in 0..rows {
            let row = &kernel[i * cols..(i + 1) * cols];
            let s: f64 = row.iter().zip(&q).map(|(a, b)| a * b).sum();
            z[i] = s.max(f64::MIN_POSITIVE);
        }
        c.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..rows {
            let w = source.probs[i] / z[i];
            if w == 0.0 {
                continue;
            }
            let row = &kernel[i * cols..(i + 1) * cols];
            for (cj, a) in c.iter_mut().zip(row) {
                *cj += w * a;
            }
        }
        let max_log = c.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(libm::log(v)));
        let mean_log: f64 = q
            .iter()
            .zip(&c)
            .filter(|(qj, _)| **qj > 0.0)
            .map(|(qj, cj)| qj * cj * libm::log(*cj))
            .sum();
        let gap = (max_log - mean_log) / LN_2;
        iterations += 1;
        if gap <= options.tol {
            break gap;
        }
        if iterations >= options.max_iterations {
            return Err(Error::NoConvergence { iterations, gap });
        }
        if options.relaxation == 1.0 {
            for (qj, cj) in q.iter_mut().zip(&c) {
                *qj = (*qj * cj).max(TINY);
            }
        } else {
            for (qj, cj) in q.iter_mut().zip(&c) {
                *qj = (*qj * libm::pow(*cj, options.relaxation)).max(TINY);
            }
            let total: f64 = q.iter().sum();
            q.iter_mut().for_each(|v| *v /= total);
        }
    };

    // Rate and distortion of the channel induced by the final q.
    let mut distortion = 0.0;
    let mut log_z = 0.0;
    let mut shifted = 0.0;
    for i in 0..rows {
        let p = source.probs[i];
        if p == 0.0 {
            continue;
        }
        let row = &kernel[i * cols..(i + 1) * cols];
        let x = source.points[i];
        let mut d = 0.0;
        for j in 0..cols {
            let y = reproduction[j];
            d += q[j] * row[j] * (x - y) * (x - y);
        }
        distortion += p * d / z[i];
        log_z += p * libm::log(z[i]);
        shifted += p * shift[i];
    }
    let rate = ((-lambda * (distortion - shifted) - log_z) / LN_2).max(0.0);
    Ok(BlahutArimotoSolution {
        rate,
        distortion,
        output: q,
        iterations,
        gap,
    })
}

/// Blahut-Arimoto at each slope, warm-starting from the previous solution.
/// Reproductions are the source points.
pub fn blahut_arimoto_curve(
    label: &str,
    source: &DiscreteSource,
    betas: &[f64],
    options: BlahutArimotoOptions,
) -> Result<RDCurve> {
    let variance = source.variance();
    let mut points = Vec::with_capacity(betas.len());
    let mut previous: Option<Vec<f64>> = None;
    for &beta in betas {
        let sol = blahut_arimoto(source, &source.points, beta, previous.as_deref(), options)?;
        points.push(RDPoint::new(sol.rate, sol.distortion, variance));
        previous = Some(sol.output);
    }
    Ok(RDCurve::new(
        label,
        format!(
            "Blahut-Arimoto on {} points over [{}, {}], gap tolerance {} bits",
            source.points.len(),
            source.points[0],
            source.points[source.points.len() - 1],
            options.tol
        ),
        points,
    ))
}

/// Power spectral density of `x_t = rho x_{t-1} + w_t`.
fn ar1_spectrum(rho: f64, innovation_variance: f64, omega: f64) -> f64 {
    innovation_variance / (1.0 - 2.0 * rho * libm::cos(omega) + rho * rho)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = panels + panels % 2;
    let h = (b - a) / m as f64;
    let mut sum = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

/// Frequency in `[0, pi]` where the spectrum equals `theta`, clamped to the
/// ends. The spectrum is monotone there.
fn crossing(rho: f64, innovation_variance: f64, theta: f64) -> f64 {
    if rho == 0.0 {
        return if theta >= innovation_variance { 0.0 } else { PI };
    }
    let cos = (1.0 + rho * rho - innovation_variance / theta) / (2.0 * rho);
    libm::acos(cos.clamp(-1.0, 1.0))
}

/// Distortion and rate of the water level `theta`, each side of the
/// crossing integrated separately so the integrands stay smooth.
fn water_level(rho: f64, innovation_variance: f64, theta: f64) -> (f64, f64) {
    let spec = |w: f64| ar1_spectrum(rho, innovation_variance, w);
    let w0 = crossing(rho, innovation_variance, theta);
    const PANELS: usize = 4096;
    // Over [0, pi] for rho > 0 the spectrum falls, so it exceeds theta on
    // [0, w0]; for rho < 0 it rises and exceeds theta on [w0, pi].
    let (above, below) = if rho >= 0.0 { ((0.0, w0), (w0, PI)) } else { ((w0, PI), (0.0, w0)) };
    let d = theta * (above.1 - above.0) + simpson(spec, below.0, below.1, PANELS);
    let r = simpson(|w| 0.5 * libm::log2(spec(w) / theta).max(0.0), above.0, above.1, PANELS);
    (d / PI, r / PI)
}

/// Rate-distortion function of a stationary Gaussian AR(1) process by
/// reverse water-filling over its spectrum.
pub fn ar1_gaussian_rd(rho: f64, innovation_variance: f64, d: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::param("rho", format!("|rho| must be below 1, got {rho}")));
    }
    if !(innovation_variance > 0.0) {
        return Err(Error::param("innovation_variance", "must be positive"));
    }
    let process = innovation_variance / (1.0 - rho * rho);
    if !(d > 0.0 && d <= process) {
        return Err(Error::param("distortion", format!("{d} outside (0, {process}]")));
    }
    let smax = ar1_spectrum(rho, innovation_variance, if rho >= 0.0 { 0.0 } else { PI });
    let smin = ar1_spectrum(rho, innovation_variance, if rho >= 0.0 { PI } else { 0.0 });
    if d >= process * (1.0 - 1e-15) {
        return Ok(0.0);
    }
    if d <= smin {
        // Every frequency is above the water level.
        let r = simpson(
            |w| 0.5 * libm::log2(ar1_spectrum(rho, innovation_variance, w) / d),
            0.0,
            PI,
            8192,
        );
        return Ok(r / PI);
    }
    let (mut lo, mut hi) = (smin, smax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if water_level(rho, innovation_variance, mid).0 < d {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(water_level(rho, innovation_variance, 0.5 * (lo + hi)).1.max(0.0))
}

pub fn ar1_rd_curve(rho: f64, innovation_variance: f64, distortions: &[f64]) -> Result<RDCurve> {
    let process = innovation_variance / (1.0 - rho * rho);
    let points = distortions
        .iter()
        .map(|&d| Ok(RDPoint::new(ar1_gaussian_rd(rho, innovation_variance, d)?, d, process)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RDCurve::new(
        "RD",
        format!("reverse water-filling, rho={rho}, innovation variance {innovation_variance}"),
        points,
    ))
}

pub fn gaussian_rd_curve(variance: f64, distortions: &[f64]) -> Result<RDCurve> {
    let points = distortions
        .iter()
        .map(|&d| Ok(RDPoint::new(gaussian_rd(variance, d)?, d, variance)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RDCurve::new("RD", format!("Gaussian closed form, variance {variance}"), points))
}
