//! Annealing over abstract symbols with data-adapted reproduction levels.
//!
//! The output is a symbol sequence `z` over `{0, .., M-1}`. The level of each
//! occupied symbol is the conditional mean of the inputs mapped to it, rounded
//! up onto a lattice of step `1/Delta` inside `[-gamma, gamma]`. The energy is
//!
//! ```text
//! n H_k(z) - beta n d_a(x, z) + mu log2(log2 n) |Z_e(z)|
//! ```
//!
//! where the last term is optional. Per-symbol moments `X^0, X^1, X^2` give
//! each symbol's squared-error contribution in closed form:
//! `X^2 - 2 q X^1 + q^2 X^0` with `q` the quantized level. Moving one sample
//! between two symbols touches only those two contributions.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annealer::{draw, normalized, AnnealConfig};
use crate::entropy::{ContextCountTable, Site};
use crate::error::{Error, Result};
use crate::grid::{ceil_log2, ReproductionGrid, Symbol, SymbolAlphabet};
use crate::sources::{seeded_rng, SeededRng, SignalBuffer};

/// Default bits-per-level multiplier.
pub const DEFAULT_MU: f64 = 4.0;
/// Lower bound on the bits used per transmitted level.
pub const MIN_LEVEL_BITS: u32 = 8;

/// `log2(log2 n)`; requires `n >= 4` so the result is at least one.
pub fn log_log(n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::param("n", format!("adaptive coding needs n >= 4, got {n}")));
    }
    Ok(libm::log2(libm::log2(n as f64)))
}

/// Per-symbol sums of `x^0`, `x^1`, `x^2` over the positions holding that symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    count: Vec<u64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl MomentTable {
    pub fn new(alphabet: u32) -> Self {
        let m = alphabet as usize;
        MomentTable {
            count: vec![0; m],
            sum: vec![0.0; m],
            sum_sq: vec![0.0; m],
        }
    }

    pub fn from_assignment(x: &[f64], z: &[Symbol], alphabet: u32) -> Self {
        let mut table = Self::new(alphabet);
        for (&v, &s) in x.iter().zip(z) {
            table.add(s, v);
        }
        table
    }

    #[inline]
    pub fn add(&mut self, symbol: Symbol, x: f64) {
        let a = symbol as usize;
        self.count[a] += 1;
        self.sum[a] += x;
        self.sum_sq[a] += x * x;
    }

    #[inline]
    pub fn remove(&mut self, symbol: Symbol, x: f64) {
        let a = symbol as usize;
        self.count[a] -= 1;
        if self.count[a] == 0 {
            // Drop accumulated rounding residue with the last member.
            self.sum[a] = 0.0;
            self.sum_sq[a] = 0.0;
        } else {
            self.sum[a] -= x;
            self.sum_sq[a] -= x * x;
        }
    }

    pub fn count(&self, symbol: Symbol) -> u64 {
        self.count[symbol as usize]
    }

    pub fn sum(&self, symbol: Symbol) -> f64 {
        self.sum[symbol as usize]
    }

    pub fn sum_sq(&self, symbol: Symbol) -> f64 {
        self.sum_sq[symbol as usize]
    }

    pub fn alphabet(&self) -> u32 {
        self.count.len() as u32
    }

    /// Symbols that occur at least once, in index order.
    pub fn effective_symbols(&self) -> Vec<Symbol> {
        (0..self.alphabet()).filter(|&s| self.count(s) > 0).collect()
    }

    pub fn effective_size(&self) -> usize {
        self.count.iter().filter(|&&c| c > 0).count()
    }
}

/// Uniform lattice `{j / Delta}` on `[-gamma, gamma]` addressed by `bits`-bit
/// indices. `Delta = floor((2^bits - 1) / (2 gamma))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelQuantizer {
    gamma: u32,
    bits: u32,
    delta: u64,
}

impl LevelQuantizer {
    pub fn new(gamma: u32, bits: u32) -> Result<Self> {
        if gamma == 0 {
            return Err(Error::param("gamma", "must be positive"));
        }
        if !(1..=48).contains(&bits) {
            return Err(Error::param("mu", format!("level bits {bits} outside 1..=48")));
        }
        let delta = ((1u64 << bits) - 1) / (2 * u64::from(gamma));
        if delta == 0 {
            return Err(Error::param(
                "mu",
                format!("{bits} bits cannot cover [-{gamma}, {gamma}]"),
            ));
        }
        Ok(LevelQuantizer { gamma, bits, delta })
    }

    /// Quantizer for length-`n` inputs: `gamma = ceil(log2 n)` and
    /// `bits = max(8, ceil(mu log2 log2 n))`.
    pub fn for_length(n: usize, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::param("mu", format!("must be positive, got {mu}")));
        }
        let bits = ((mu * log_log(n)?).ceil() as u32).max(MIN_LEVEL_BITS);
        Self::new(ceil_log2(n as u64), bits)
    }

    pub fn gamma(&self) -> u32 {
        self.gamma
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Lattice points per unit, so the step is `1 / delta`.
    pub fn delta(&self) -> u64 {
        self.delta
    }

    fn max_lattice(&self) -> i64 {
        (u64::from(self.gamma) * self.delta) as i64
    }

    /// Signed lattice coordinate `j` of `ceil(a Delta) / Delta`, clamped.
    pub fn lattice_index(&self, a: f64) -> i64 {
        let delta = self.delta as f64;
        let mut j = (a * delta).ceil();
        // Keep the smallest lattice value not below `a` as evaluated in f64.
        if (j - 1.0) / delta >= a {
            j -= 1.0;
        }
        let top = self.max_lattice();
        (j as i64).clamp(-top, top)
    }

    #[inline]
    pub fn quantize(&self, a: f64) -> f64 {
        self.lattice_index(a) as f64 / self.delta as f64
    }

    /// Unsigned index transmitted in the level payload.
    pub fn code(&self, a: f64) -> u64 {
        (self.lattice_index(a) + self.max_lattice()) as u64
    }

    pub fn level_from_code(&self, code: u64) -> Result<f64> {
        let j = code as i64 - self.max_lattice();
        if j > self.max_lattice() {
            return Err(Error::Decode(format!("level code {code} outside the lattice")));
        }
        Ok(j as f64 / self.delta as f64)
    }
}

/// `a*(alpha) = X^1 / X^0` for occupied symbols, `None` otherwise.
pub fn conditional_mean_levels(x: &[f64], z: &[Symbol], alphabet: u32) -> Vec<Option<f64>> {
    let table = MomentTable::from_assignment(x, z, alphabet);
    (0..alphabet)
        .map(|s| (table.count(s) > 0).then(|| table.sum(s) / table.count(s) as f64))
        .collect()
}

pub fn quantize_levels(levels: &[Option<f64>], quantizer: &LevelQuantizer) -> Vec<Option<f64>> {
    levels.iter().map(|l| l.map(|v| quantizer.quantize(v))).collect()
}

/// Closed-form squared error of one symbol class at its quantized level.
#[inline]
fn contribution(quantizer: &LevelQuantizer, count: u64, sum: f64, sum_sq: f64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let q = quantizer.quantize(sum / count as f64);
    sum_sq - 2.0 * q * sum + q * q * count as f64
}

/// The levels a decoder needs: one quantized level per occupied symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveCodebook {
    pub mu: f64,
    pub quantizer: LevelQuantizer,
    /// Indexed by symbol; `None` for symbols outside the effective alphabet.
    pub levels: Vec<Option<f64>>,
}

impl AdaptiveCodebook {
    pub fn from_moments(moments: &MomentTable, quantizer: LevelQuantizer, mu: f64) -> Self {
        let levels = (0..moments.alphabet())
            .map(|s| {
                (moments.count(s) > 0)
                    .then(|| quantizer.quantize(moments.sum(s) / moments.count(s) as f64))
            })
            .collect();
        AdaptiveCodebook {
            mu,
            quantizer,
            levels,
        }
    }

    pub fn effective_symbols(&self) -> Vec<Symbol> {
        (0..self.levels.len() as Symbol)
            .filter(|&s| self.levels[s as usize].is_some())
            .collect()
    }

    pub fn effective_size(&self) -> usize {
        self.levels.iter().filter(|l| l.is_some()).count()
    }

    pub fn reconstruct(&self, z: &[Symbol]) -> Result<Vec<f64>> {
        z.iter()
            .map(|&s| {
                self.levels
                    .get(s as usize)
                    .copied()
                    .flatten()
                    .ok_or_else(|| Error::Decode(format!("symbol {s} has no level")))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub anneal: AnnealConfig,
    /// `|Z|`.
    pub alphabet: u32,
    pub mu: f64,
    /// Charge `mu log2 log2 n` bits per occupied symbol inside the energy.
    pub include_alphabet_penalty: bool,
}

impl AdaptiveConfig {
    pub fn new(anneal: AnnealConfig, alphabet: u32) -> Self {
        AdaptiveConfig {
            anneal,
            alphabet,
            mu: DEFAULT_MU,
            include_alphabet_penalty: false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.anneal.validate()?;
        SymbolAlphabet::new(self.alphabet)?;
        LevelQuantizer::for_length(n, self.mu)?;
        Ok(())
    }
}

/// Initial assignment: nearest of `M` levels evenly spanning `[min x, max x]`,
/// or the data-independent grid when `M` equals its size.
pub fn initial_assignment(x: &SignalBuffer, alphabet: u32) -> Result<Vec<Symbol>> {
    let default = SymbolAlphabet::for_length(x.len())?;
    if alphabet == default.size() {
        let grid = ReproductionGrid::for_length(x.len())?;
        return Ok(grid.quantize(x.samples()));
    }
    let lo = x.samples().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.samples().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grid = ReproductionGrid::spanning(lo, hi, alphabet as usize)?;
    Ok(grid.quantize(x.samples()))
}

/// Sampler state for the adaptive encoder.
#[derive(Clone, Debug)]
pub struct AdaptiveState {
    x: Vec<f64>,
    z: Vec<Symbol>,
    counts: ContextCountTable,
    moments: MomentTable,
    quantizer: LevelQuantizer,
    mu: f64,
    /// Squared error of each symbol class at its current quantized level.
    contrib: Vec<f64>,
    beta: f64,
    penalty: f64,
    include_alphabet_penalty: bool,
    energy: f64,
    site: Site,
    costs: Vec<f64>,
    weights: Vec<f64>,
    order: Vec<usize>,
}

impl AdaptiveState {
    pub fn new(x: &SignalBuffer, z: Vec<Symbol>, config: &AdaptiveConfig) -> Result<Self> {
        let n = x.len();
        config.validate(n)?;
        if z.len() != n {
            return Err(Error::param("z", "length does not match input"));
        }
        let counts = ContextCountTable::build(&z, config.anneal.k, config.alphabet)?;
        let moments = MomentTable::from_assignment(x.samples(), &z, config.alphabet);
        let quantizer = LevelQuantizer::for_length(n, config.mu)?;
        let mut state = AdaptiveState {
            x: x.samples().to_vec(),
            z,
            counts,
            moments,
            quantizer,
            mu: config.mu,
            contrib: Vec::new(),
            beta: config.anneal.beta,
            penalty: config.mu * log_log(n)?,
            include_alphabet_penalty: config.include_alphabet_penalty,
            energy: 0.0,
            site: Site::default(),
            costs: Vec::with_capacity(config.alphabet as usize),
            weights: Vec::with_capacity(config.alphabet as usize),
            order: (0..n).collect(),
        };
        state.contrib = (0..config.alphabet).map(|s| state.class_error(s)).collect();
        state.energy = state.adaptive_energy();
        Ok(state)
    }

    pub fn initialized(x: &SignalBuffer, config: &AdaptiveConfig) -> Result<Self> {
        let z = initial_assignment(x, config.alphabet)?;
        Self::new(x, z, config)
    }

    fn class_error(&self, s: Symbol) -> f64 {
        contribution(
            &self.quantizer,
            self.moments.count(s),
            self.moments.sum(s),
            self.moments.sum_sq(s),
        )
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.z
    }

    pub fn into_symbols(self) -> Vec<Symbol> {
        self.z
    }

    pub fn counts(&self) -> &ContextCountTable {
        &self.counts
    }

    pub fn moments(&self) -> &MomentTable {
        &self.moments
    }

    pub fn quantizer(&self) -> &LevelQuantizer {
        &self.quantizer
    }

    pub fn alphabet(&self) -> u32 {
        self.moments.alphabet()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn codebook(&self) -> AdaptiveCodebook {
        AdaptiveCodebook::from_moments(&self.moments, self.quantizer, self.mu)
    }

    /// Per-occurrence cost charged for each effective symbol, in bits.
    pub fn alphabet_penalty(&self) -> f64 {
        self.penalty
    }

    /// `d_a(x, z)` from the moment tables.
    pub fn adaptive_distortion(&self) -> f64 {
        let total: f64 = (0..self.alphabet()).map(|s| self.class_error(s)).sum();
        total / self.x.len() as f64
    }

    /// The energy evaluated from the current tables.
    pub fn adaptive_energy(&self) -> f64 {
        let n = self.x.len() as f64;
        let mut e = self.counts.code_bits() - self.beta * n * self.adaptive_distortion();
        if self.include_alphabet_penalty {
            e += self.penalty * self.moments.effective_size() as f64;
        }
        e
    }

    /// The incrementally tracked energy.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `n [d_a(z with z_i := b) - d_a(z)]`, with both levels recomputed.
    pub fn delta_adaptive_distortion(&self, i: usize, b: Symbol) -> f64 {
        let a = self.z[i];
        if a == b {
            return 0.0;
        }
        let xi = self.x[i];
        let m = &self.moments;
        let q = &self.quantizer;
        let a_count = m.count(a) - 1;
        let a_after = if a_count == 0 {
            0.0
        } else {
            contribution(q, a_count, m.sum(a) - xi, m.sum_sq(a) - xi * xi)
        };
        let b_after = contribution(q, m.count(b) + 1, m.sum(b) + xi, m.sum_sq(b) + xi * xi);
        a_after + b_after - self.contrib[a as usize] - self.contrib[b as usize]
    }

    /// Change in `|Z_e|` if `z_i` became `b`: one of -1, 0, +1.
    pub fn delta_effective(&self, i: usize, b: Symbol) -> i32 {
        let a = self.z[i];
        if a == b {
            return 0;
        }
        let vacated = i32::from(self.moments.count(a) == 1);
        let occupied = i32::from(self.moments.count(b) == 0);
        occupied - vacated
    }

    /// Full conditional of position `i` at inverse temperature `s`.
    pub fn gibbs_conditional(&self, i: usize, s: f64) -> Vec<f64> {
        let costs: Vec<f64> = (0..self.alphabet())
            .map(|b| {
                let mut c = self.counts.delta_code_bits(&self.z, i, b)
                    - self.beta * self.delta_adaptive_distortion(i, b);
                if self.include_alphabet_penalty {
                    c += self.penalty * f64::from(self.delta_effective(i, b));
                }
                c
            })
            .collect();
        normalized(&costs, s)
    }

    /// Redraw position `i`.
    pub fn resample(&mut self, i: usize, s: f64, rng: &mut SeededRng) {
        let a = self.z[i];
        let xi = self.x[i];
        self.counts.prepare_site(&self.z, i, &mut self.site);
        self.counts.withdraw(&self.site);
        self.moments.remove(a, xi);
        let a_reduced = self.class_error(a);
        self.contrib[a as usize] = a_reduced;

        self.costs.clear();
        for b in 0..self.alphabet() {
            let m = &self.moments;
            let added = contribution(
                &self.quantizer,
                m.count(b) + 1,
                m.sum(b) + xi,
                m.sum_sq(b) + xi * xi,
            );
            let mut cost = self.counts.insertion_cost(&mut self.site, a, b)
                - self.beta * (added - self.contrib[b as usize]);
            if self.include_alphabet_penalty && m.count(b) == 0 {
                cost += self.penalty;
            }
            self.costs.push(cost);
        }
        let u: f64 = rng.random();
        let b = draw(&self.costs, s, u, &mut self.weights) as Symbol;
        self.energy += self.costs[b as usize] - self.costs[a as usize];
        self.counts.deposit(&self.site, a, b);
        self.moments.add(b, xi);
        self.contrib[b as usize] = self.class_error(b);
        self.z[i] = b;
    }

    pub fn super_iteration(&mut self, s: f64, rng: &mut SeededRng) {
        let mut order = std::mem::take(&mut self.order);
        order.shuffle(rng);
        for &i in &order {
            self.resample(i, s, rng);
        }
        self.order = order;
    }

    pub fn anneal(&mut self, config: &AnnealConfig, rng: &mut SeededRng) {
        for t in 1..=config.r {
            self.super_iteration(config.inverse_temperature(t), rng);
        }
    }
}

/// `n [H_k(z) - beta d_a(x, z)] (+ mu log2 log2 n |Z_e|)`, from scratch.
pub fn adaptive_energy(x: &[f64], z: &[Symbol], config: &AdaptiveConfig) -> Result<f64> {
    let n = x.len();
    let quantizer = LevelQuantizer::for_length(n, config.mu)?;
    let table = ContextCountTable::build(z, config.anneal.k, config.alphabet)?;
    let levels = quantize_levels(&conditional_mean_levels(x, z, config.alphabet), &quantizer);
    let sq: f64 = x
        .iter()
        .zip(z)
        .map(|(&v, &s)| (v - levels[s as usize].expect("occupied")).powi(2))
        .sum();
    let mut e = n as f64 * table.conditional_entropy() - config.anneal.beta * sq;
    if config.include_alphabet_penalty {
        let occupied = levels.iter().filter(|l| l.is_some()).count();
        e += config.mu * log_log(n)? * occupied as f64;
    }
    Ok(e)
}

/// Initialize, anneal for `r` super-iterations, and return the symbols and
/// the quantized levels of the effective alphabet.
pub fn run_algorithm2(
    x: &SignalBuffer,
    config: &AdaptiveConfig,
) -> Result<(Vec<Symbol>, AdaptiveCodebook)> {
    let mut state = AdaptiveState::initialized(x, config)?;
    let mut rng = seeded_rng(config.anneal.seed);
    state.anneal(&config.anneal, &mut rng);
    let codebook = state.codebook();
    Ok((state.into_symbols(), codebook))
}
