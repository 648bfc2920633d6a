//! Rate-distortion sweeps: warm-started chains of increasing `|beta|`, the
//! four-schedule keep-best heuristic, multi-seed averaging, comparison
//! tables, CSV output, and SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{adaptive_energy, initial_assignment, AdaptiveConfig, AdaptiveState, DEFAULT_MU};
use crate::annealer::{AnnealConfig, Schedule};
use crate::baselines::{
    ar1_rd_curve, blahut_arimoto_curve, ecsq_point, gaussian_rd_curve, step_ladder, BlahutArimotoOptions,
    DiscreteSource, RDCurve,
};
use crate::codec::{assess, pack_adaptive, RDPoint};
use crate::error::{Error, Result};
use crate::grid::Symbol;
use crate::sources::{generate, seeded_rng, SignalBuffer, SourceKind, SourceSpec};

/// Default temperature-slope ladder; each schedule is `s = c log2 t`.
pub const DEFAULT_C_LADDER: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
/// Default start of the sweep schedules, `s(1) = c log2(1 + offset)`.
pub const DEFAULT_SCHEDULE_OFFSET: f64 = 8.0;

/// Largest depth whose count table, `M^(k+1)` cells, fits in `sqrt(n)`;
/// at least one. Deeper tables let the empirical entropy run ahead of what
/// the CTW coder can actually realize on a sequence this short.
pub fn default_depth(n: usize, alphabet: u32) -> usize {
    let half_log = 0.5 * libm::log(n as f64) / libm::log(f64::from(alphabet));
    let k = (half_log + 1e-9).floor() as usize;
    k.saturating_sub(1).max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub name: String,
    pub source: SourceKind,
    pub n: usize,
    /// Negative slopes in order of increasing magnitude.
    pub betas: Vec<f64>,
    pub alphabets: Vec<u32>,
    pub r: usize,
    /// Context depth; `None` picks [`default_depth`] per alphabet.
    pub k: Option<usize>,
    pub c_ladder: Vec<f64>,
    /// Each schedule runs `s = c log2(t + offset)`; zero reproduces the plain
    /// logarithmic schedule, whose first sweep is at infinite temperature.
    pub schedule_offset: f64,
    /// One source realization and annealing stream per seed.
    pub seeds: Vec<u64>,
    pub mu: f64,
    pub include_alphabet_penalty: bool,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        SourceSpec::new(self.source, self.n, 0).validate()?;
        if self.betas.is_empty() {
            return Err(Error::param("betas", "need at least one slope"));
        }
        if self.betas.iter().any(|b| !(*b < 0.0) || !b.is_finite()) {
            return Err(Error::param("betas", "slopes must be negative"));
        }
        if self.betas.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::param("betas", "must be ordered by strictly increasing magnitude"));
        }
        if self.alphabets.is_empty() || self.alphabets.iter().any(|&m| m < 2) {
            return Err(Error::param("alphabets", "need sizes of at least two"));
        }
        if self.c_ladder.is_empty() || self.c_ladder.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::param("c_ladder", "need positive temperature slopes"));
        }
        if self.seeds.is_empty() {
            return Err(Error::param("seeds", "need at least one seed"));
        }
        if self.r == 0 {
            return Err(Error::param("r", "need at least one super-iteration"));
        }
        if !(self.schedule_offset >= 0.0) || !self.schedule_offset.is_finite() {
            return Err(Error::param("schedule_offset", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn depth(&self, alphabet: u32) -> usize {
        self.k.unwrap_or_else(|| default_depth(self.n, alphabet))
    }

    /// Laplace source with unit scale (variance 2), 9 symbols.
    pub fn fig1() -> Self {
        SweepPlan {
            name: "fig1".into(),
            source: SourceKind::Laplace { scale: 1.0 },
            n: 15_000,
            betas: vec![-0.3, -0.4, -0.5, -0.6, -0.8, -1.0, -1.25, -1.5, -2.0, -2.5, -3.0, -4.0],
            alphabets: vec![9],
            r: 50,
            k: None,
            c_ladder: DEFAULT_C_LADDER.to_vec(),
            schedule_offset: DEFAULT_SCHEDULE_OFFSET,
            seeds: (1..=10).collect(),
            mu: DEFAULT_MU,
            include_alphabet_penalty: false,
        }
    }

    /// Gaussian AR(1) with coefficient 0.9 and unit innovations, 3 and 9
    /// symbols.
    pub fn fig2() -> Self {
        SweepPlan {
            name: "fig2".into(),
            source: SourceKind::Ar1 {
                rho: 0.9,
                innovation_variance: 1.0,
            },
            n: 15_000,
            betas: vec![-0.1, -0.15, -0.2, -0.3, -0.4, -0.6, -0.8, -1.0, -1.5, -2.0, -3.0],
            alphabets: vec![3, 9],
            r: 50,
            k: None,
            c_ladder: DEFAULT_C_LADDER.to_vec(),
            schedule_offset: DEFAULT_SCHEDULE_OFFSET,
            seeds: (1..=10).collect(),
            mu: DEFAULT_MU,
            include_alphabet_penalty: false,
        }
    }

    /// Unit-variance iid Gaussian in the same regime as [`SweepPlan::fig1`].
    pub fn gaussian() -> Self {
        SweepPlan {
            name: "gaussian".into(),
            source: SourceKind::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            betas: vec![-1.0, -1.5, -2.0, -3.0, -4.0, -6.0, -8.0, -12.0, -16.0],
            ..Self::fig1()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fig1" => Ok(Self::fig1()),
            "fig2" => Ok(Self::fig2()),
            "gaussian" => Ok(Self::gaussian()),
            other => Err(Error::param(
                "preset",
                format!("unknown preset `{other}` (expected fig1, fig2, or gaussian)"),
            )),
        }
    }
}

/// One `(seed, alphabet, beta)` outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub source: String,
    pub n: usize,
    pub k: usize,
    #[serde(rename = "M")]
    pub alphabet: u32,
    pub beta: f64,
    /// Temperature slope of the schedule that produced the kept state;
    /// empty when no schedule improved on the warm start.
    pub c_best: Option<f64>,
    pub r: usize,
    pub seed: u64,
    #[serde(rename = "net_rate_bps")]
    pub net_rate: f64,
    #[serde(rename = "gross_rate_bps")]
    pub gross_rate: f64,
    pub mse: f64,
    pub snr_db: f64,
    pub energy: f64,
    /// Energy of the warm start evaluated at this slope.
    #[serde(skip)]
    pub start_energy: f64,
    #[serde(skip)]
    pub effective_alphabet: u32,
    pub wall_s: Option<f64>,
}

impl SweepRecord {
    pub fn point(&self) -> RDPoint {
        RDPoint {
            rate: self.net_rate,
            distortion: self.mse,
            snr_db: self.snr_db,
        }
    }
}

/// Seed-averaged point for one `(alphabet, beta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub alphabet: u32,
    pub beta: f64,
    pub seeds: usize,
    /// Arithmetic means of the members' rate, distortion, and SNR.
    pub mean: RDPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub plan: SweepPlan,
    /// Sorted by alphabet, seed, then slope order.
    pub records: Vec<SweepRecord>,
    /// Points that failed, with the reason; the rest of the chain continues.
    pub failures: Vec<String>,
}

impl SweepResult {
    pub fn aggregates(&self) -> Vec<SweepAggregate> {
        let mut groups: BTreeMap<(u32, usize), Vec<&SweepRecord>> = BTreeMap::new();
        for r in &self.records {
            let idx = self.plan.betas.iter().position(|&b| b == r.beta).unwrap_or(usize::MAX);
            groups.entry((r.alphabet, idx)).or_default().push(r);
        }
        groups
            .into_values()
            .map(|members| {
                let m = members.len() as f64;
                let mean = |f: &dyn Fn(&SweepRecord) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / m;
                SweepAggregate {
                    alphabet: members[0].alphabet,
                    beta: members[0].beta,
                    seeds: members.len(),
                    mean: RDPoint {
                        rate: mean(&|r| r.net_rate),
                        distortion: mean(&|r| r.mse),
                        snr_db: mean(&|r| r.snr_db),
                    },
                }
            })
            .collect()
    }

    /// Seed-averaged curve for one alphabet size.
    pub fn curve(&self, alphabet: u32) -> RDCurve {
        let points = self
            .aggregates()
            .into_iter()
            .filter(|a| a.alphabet == alphabet)
            .map(|a| a.mean)
            .collect();
        RDCurve::new(
            format!("MCMC |Z|={alphabet}"),
            format!(
                "{} sweep, n={}, r={}, k={}, {} seeds, c ladder {:?}",
                self.plan.name,
                self.plan.n,
                self.plan.r,
                self.plan.depth(alphabet),
                self.plan.seeds.len(),
                self.plan.c_ladder
            ),
            points,
        )
    }

    /// Write the records as CSV. Wall times are written only when
    /// `timing` is set, so repeated runs produce identical files.
    pub fn write_csv<W: Write>(&self, out: W, timing: bool) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for record in &self.records {
            let mut r = record.clone();
            if !timing {
                r.wall_s = None;
            }
            writer.serialize(r).map_err(csv_error)?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Independent stream for one chain, derived from the seed and alphabet.
fn chain_seed(seed: u64, alphabet: u32) -> u64 {
    seed ^ (u64::from(alphabet)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct ChainOutput {
    records: Vec<SweepRecord>,
    failures: Vec<String>,
}

/// Best state found at one slope.
struct Candidate {
    z: Vec<Symbol>,
    energy: f64,
    c: Option<f64>,
}

/// Run the four schedules at one slope, each starting from the best state so
/// far, and keep the lowest-energy state including the start.
pub fn improve(
    x: &SignalBuffer,
    start: Vec<Symbol>,
    base: &AdaptiveConfig,
    ladder: &[f64],
    rng: &mut crate::sources::SeededRng,
) -> Result<(Vec<Symbol>, f64, f64, Option<f64>)> {
    let start_energy = adaptive_energy(x.samples(), &start, base)?;
    let mut best = Candidate {
        z: start,
        energy: start_energy,
        c: None,
    };
    for &c in ladder {
        let mut config = *base;
        config.anneal.c = c;
        let mut state = AdaptiveState::new(x, best.z.clone(), &config)?;
        state.anneal(&config.anneal, rng);
        let e = adaptive_energy(x.samples(), state.symbols(), &config)?;
        if e < best.energy {
            best = Candidate {
                z: state.into_symbols(),
                energy: e,
                c: Some(c),
            };
        }
    }
    Ok((best.z, best.energy, start_energy, best.c))
}

fn run_chain(plan: &SweepPlan, seed: u64, alphabet: u32) -> ChainOutput {
    let mut out = ChainOutput {
        records: Vec::new(),
        failures: Vec::new(),
    };
    let spec = SourceSpec::new(plan.source, plan.n, seed);
    let x = match generate(&spec) {
        Ok(x) => x,
        Err(e) => {
            out.failures.push(format!("seed {seed}: {e}"));
            return out;
        }
    };
    let k = plan.depth(alphabet);
    let mut rng = seeded_rng(chain_seed(seed, alphabet));
    let mut z = match initial_assignment(&x, alphabet) {
        Ok(z) => z,
        Err(e) => {
            out.failures.push(format!("seed {seed}, M={alphabet}: {e}"));
            return out;
        }
    };
    for &beta in &plan.betas {
        let started = Instant::now();
        let mut anneal = AnnealConfig::new(beta, 1.0, plan.r, k, seed);
        if plan.schedule_offset > 0.0 {
            anneal.schedule = Schedule::Shifted(plan.schedule_offset);
        }
        let mut config = AdaptiveConfig::new(anneal, alphabet);
        config.mu = plan.mu;
        config.include_alphabet_penalty = plan.include_alphabet_penalty;
        let step = improve(&x, z.clone(), &config, &plan.c_ladder, &mut rng).and_then(
            |(best, energy, start_energy, c)| {
                let state = AdaptiveState::new(&x, best.clone(), &config)?;
                let stream = pack_adaptive(&state.codebook(), k, &best)?;
                let report = assess(&x, &stream)?;
                Ok((best, energy, start_energy, c, report))
            },
        );
        match step {
            Ok((best, energy, start_energy, c_best, report)) => {
                out.records.push(SweepRecord {
                    source: plan.source.name().to_string(),
                    n: plan.n,
                    k,
                    alphabet,
                    beta,
                    c_best,
                    r: plan.r,
                    seed,
                    net_rate: report.point.rate,
                    gross_rate: report.gross_rate,
                    mse: report.point.distortion,
                    snr_db: report.point.snr_db,
                    energy,
                    start_energy,
                    effective_alphabet: report.effective_alphabet,
                    wall_s: Some(started.elapsed().as_secs_f64()),
                });
                z = best;
            }
            Err(e) => out
                .failures
                .push(format!("seed {seed}, M={alphabet}, beta={beta}: {e}")),
        }
    }
    out
}

/// Run every `(seed, alphabet)` chain on a pool of `jobs` threads.
pub fn run_sweep(plan: &SweepPlan, jobs: usize) -> Result<SweepResult> {
    plan.validate()?;
    let tasks: Vec<(u32, u64)> = plan
        .alphabets
        .iter()
        .flat_map(|&m| plan.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::param("jobs", e.to_string()))?;
    let outputs: Vec<ChainOutput> =
        pool.install(|| tasks.par_iter().map(|&(m, s)| run_chain(plan, s, m)).collect());
    let mut result = SweepResult {
        plan: plan.clone(),
        records: Vec::new(),
        failures: Vec::new(),
    };
    for o in outputs {
        result.records.extend(o.records);
        result.failures.extend(o.failures);
    }
    Ok(result)
}

/// How the reference curves drawn next to a sweep are computed.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceOptions {
    /// Quantizer step sizes for the ECSQ curve.
    pub ecsq_steps: Vec<f64>,
    /// Grid size of the discretized Laplace density fed to Blahut-Arimoto.
    pub laplace_grid: usize,
    pub blahut_arimoto: BlahutArimotoOptions,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            ecsq_steps: step_ladder(0.02, 40.0, 400),
            laplace_grid: 241,
            blahut_arimoto: BlahutArimotoOptions {
                tol: 1e-3,
                max_iterations: 400_000,
                relaxation: 2.0,
            },
        }
    }
}

/// ECSQ averaged over the plan's source realizations, one point per step.
pub fn ecsq_reference(plan: &SweepPlan, steps: &[f64]) -> Result<RDCurve> {
    let mut sums = vec![(0.0, 0.0); steps.len()];
    for &seed in &plan.seeds {
        let x = generate(&SourceSpec::new(plan.source, plan.n, seed))?;
        for (sum, &q) in sums.iter_mut().zip(steps) {
            let p = ecsq_point(&x, q)?;
            sum.0 += p.rate;
            sum.1 += p.distortion;
        }
    }
    let count = plan.seeds.len() as f64;
    let variance = plan.source.variance();
    let points = sums
        .iter()
        .map(|&(r, d)| RDPoint::new(r / count, d / count, variance))
        .collect();
    Ok(RDCurve::new(
        "ECSQ",
        format!("uniform mid-tread quantizer, mean over {} realizations", plan.seeds.len()),
        points,
    ))
}

/// Rate-distortion function of `source`: closed form for the Gaussian,
/// reverse water-filling for AR(1), and Blahut-Arimoto at `betas` for
/// Laplace.
pub fn oracle_reference(source: SourceKind, betas: &[f64], options: &ReferenceOptions) -> Result<RDCurve> {
    let variance = source.variance();
    let distortions: Vec<f64> = step_ladder(1e-3 * variance, variance, 200);
    match source {
        SourceKind::Gaussian { variance, .. } => gaussian_rd_curve(variance, &distortions),
        SourceKind::Ar1 {
            rho,
            innovation_variance,
        } => ar1_rd_curve(rho, innovation_variance, &distortions),
        SourceKind::Laplace { scale } => {
            let source = DiscreteSource::laplace(scale, options.laplace_grid)?;
            blahut_arimoto_curve("RD", &source, betas, options.blahut_arimoto)
        }
    }
}

/// ECSQ and the rate-distortion function for the plan's source.
pub fn reference_curves(plan: &SweepPlan, options: &ReferenceOptions) -> Result<Vec<RDCurve>> {
    plan.validate()?;
    Ok(vec![
        ecsq_reference(plan, &options.ecsq_steps)?,
        oracle_reference(plan.source, &plan.betas, options)?,
    ])
}

/// One row of a comparison between a measured point and a reference curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub curve: String,
    pub reference: String,
    pub distortion: f64,
    pub rate: f64,
    pub reference_rate: Option<f64>,
    /// `rate - reference_rate`, in bits.
    pub gap_bits: Option<f64>,
    /// `10 log10(D / D_ref)` at the point's rate, in dB.
    pub gap_db: Option<f64>,
}

/// Distortion of `curve` at `rate`, linear between neighbouring points.
fn distortion_at(curve: &RDCurve, rate: f64) -> Option<f64> {
    curve.points.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        let (hi, lo) = (a.rate.max(b.rate), a.rate.min(b.rate));
        if !(lo..=hi).contains(&rate) {
            return None;
        }
        if a.rate == b.rate {
            return Some(a.distortion);
        }
        let w = (rate - a.rate) / (b.rate - a.rate);
        Some(a.distortion + w * (b.distortion - a.distortion))
    })
}

/// Compare every point of `measured` against each reference curve.
pub fn compare(measured: &RDCurve, references: &[RDCurve]) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    for reference in references {
        for p in &measured.points {
            let reference_rate = reference.rate_at(p.distortion);
            let gap_db = distortion_at(reference, p.rate)
                .filter(|d| *d > 0.0 && p.distortion > 0.0)
                .map(|d| 10.0 * libm::log10(p.distortion / d));
            rows.push(ComparisonRow {
                curve: measured.label.clone(),
                reference: reference.label.clone(),
                distortion: p.distortion,
                rate: p.rate,
                reference_rate,
                gap_bits: reference_rate.map(|r| p.rate - r),
                gap_db,
            });
        }
    }
    rows
}

/// Render comparison rows as an aligned text table.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let fmt = |v: Option<f64>, digits: usize| match v {
        Some(v) => format!("{v:.digits$}"),
        None => "n/a".to_string(),
    };
    let mut out = format!(
        "{:<16} {:<16} {:>10} {:>10} {:>10} {:>10} {:>9}\n",
        "curve", "reference", "mse", "rate", "ref_rate", "gap_bits", "gap_db"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:<16} {:>10.5} {:>10.4} {:>10} {:>10} {:>9}",
            r.curve,
            r.reference,
            r.distortion,
            r.rate,
            fmt(r.reference_rate, 4),
            fmt(r.gap_bits, 4),
            fmt(r.gap_db, 2)
        );
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Rate (vertical) against distortion (horizontal) as an SVG document.
pub fn render_svg(title: &str, curves: &[RDCurve]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 170.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 60.0;
    let all: Vec<&RDPoint> = curves
        .iter()
        .flat_map(|c| &c.points)
        .filter(|p| p.rate.is_finite() && p.distortion.is_finite())
        .collect();
    // The distortion axis always starts at zero.
    let dmin = 0.0;
    let (mut dmax, mut rmax) = (f64::NEG_INFINITY, 0.0f64);
    for p in &all {
        dmax = dmax.max(p.distortion);
        rmax = rmax.max(p.rate);
    }
    if dmax <= dmin {
        dmax = dmin + 1.0;
    }
    if rmax <= 0.0 {
        rmax = 1.0;
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |d: f64| LEFT + (d - dmin) / (dmax - dmin) * pw;
    let sy = |r: f64| TOP + ph - r / rmax * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let d = dmin + f * (dmax - dmin);
        let r = f * rmax;
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{y1:.1}" stroke="#ccc"/><text x="{x:.1}" y="{ty:.1}" text-anchor="middle">{d:.3}</text>"##,
            x = sx(d),
            y0 = TOP,
            y1 = TOP + ph,
            ty = TOP + ph + 18.0
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#ccc"/><text x="{tx:.1}" y="{ty:.1}" text-anchor="end">{r:.2}</text>"##,
            x0 = LEFT,
            x1 = LEFT + pw,
            y = sy(r),
            tx = LEFT - 6.0,
            ty = sy(r) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">distortion (MSE)</text>"#,
        LEFT + pw / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">rate (bits/sample)</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (idx, curve) in curves.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .filter(|p| p.rate.is_finite() && p.distortion.is_finite())
            .map(|p| format!("{:.2},{:.2}", sx(p.distortion), sy(p.rate)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap();
            let _ = writeln!(svg, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
        }
        let ly = TOP + 10.0 + 18.0 * idx as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&curve.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
