//! Simulated-annealing Gibbs sampling over a fixed reproduction grid.
//!
//! The energy of an output `y` is `n [H_k(y) - beta d_n(x, y)]`, measured in
//! bits. Each super-iteration visits every position once in a fresh random
//! order and redraws it from its Boltzmann conditional at inverse temperature
//! `s(t) = c log2 t`.
//!
//! Redrawing position `i` withdraws the windows covering `i` from the count
//! table. The full-sequence energy for every candidate `b` is then the energy
//! of the reduced state plus an insertion cost, so the conditional needs only
//! `O(k)` table lookups per candidate.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{ContextCountTable, Site};
use crate::error::{Error, Result};
use crate::grid::{ReproductionGrid, Symbol};
use crate::sources::{seeded_rng, SeededRng, SignalBuffer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// `s(t) = c log2 t`; the first super-iteration runs at `s = 0`.
    Logarithmic,
    /// `s(t) = c log2(t + offset)`: the same growth without the initial
    /// infinite-temperature sweep, for refining an existing solution.
    Shifted(f64),
    /// A constant inverse temperature, for sampling rather than optimizing.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    /// Slope of the rate-distortion tradeoff; must be negative.
    pub beta: f64,
    pub c: f64,
    /// Number of super-iterations.
    pub r: usize,
    /// Context depth of the entropy term.
    pub k: usize,
    pub seed: u64,
    pub schedule: Schedule,
}

impl AnnealConfig {
    pub fn new(beta: f64, c: f64, r: usize, k: usize, seed: u64) -> Self {
        AnnealConfig {
            beta,
            c,
            r,
            k,
            seed,
            schedule: Schedule::Logarithmic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta < 0.0) || !self.beta.is_finite() {
            return Err(Error::param("beta", format!("must be negative, got {}", self.beta)));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::param("c", format!("must be positive, got {}", self.c)));
        }
        if self.r == 0 {
            return Err(Error::param("r", "need at least one super-iteration"));
        }
        match self.schedule {
            Schedule::Fixed(s) if !(s >= 0.0) => {
                return Err(Error::param("schedule", format!("inverse temperature {s} < 0")));
            }
            Schedule::Shifted(offset) if !(offset >= 0.0) || !offset.is_finite() => {
                return Err(Error::param("schedule", format!("offset {offset} < 0")));
            }
            _ => {}
        }
        Ok(())
    }

    /// Inverse temperature of super-iteration `t` (one-based).
    pub fn inverse_temperature(&self, t: usize) -> f64 {
        match self.schedule {
            Schedule::Logarithmic => self.c * libm::log2(t as f64),
            Schedule::Shifted(offset) => self.c * libm::log2(t as f64 + offset),
            Schedule::Fixed(s) => s,
        }
    }
}

/// Draw an index from `p_b ∝ exp(-s cost_b)` by inverting the CDF with the
/// single uniform `u`, scanning candidates in index order.
pub(crate) fn draw(costs: &[f64], s: f64, u: f64, weights: &mut Vec<f64>) -> usize {
    boltzmann_weights(costs, s, weights);
    let total: f64 = weights.iter().sum();
    let mut target = u * total;
    let mut last_positive = 0;
    for (idx, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if target < w {
                return idx;
            }
            last_positive = idx;
        }
        target -= w;
    }
    last_positive
}

/// Unnormalized `exp(-s (cost_b - min cost))`, evaluated with max-subtraction.
pub(crate) fn boltzmann_weights(costs: &[f64], s: f64, weights: &mut Vec<f64>) {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    weights.clear();
    weights.extend(costs.iter().map(|&c| {
        if s == 0.0 {
            1.0
        } else {
            libm::exp(-s * (c - min))
        }
    }));
}

pub(crate) fn normalized(costs: &[f64], s: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(costs.len());
    boltzmann_weights(costs, s, &mut w);
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// Mean squared error between two equal-length sequences.
pub fn distortion(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::param(
            "y",
            format!("length {} does not match input length {}", y.len(), x.len()),
        ));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.len() as f64)
}

/// `n [H_k(y) - beta d_n(x, y)]`, evaluated from scratch.
pub fn energy(x: &[f64], grid: &ReproductionGrid, y: &[Symbol], k: usize, beta: f64) -> Result<f64> {
    let table = ContextCountTable::build(y, k, grid.len() as u32)?;
    let d = distortion(x, &grid.reconstruct(y))?;
    let n = x.len() as f64;
    Ok(n * table.conditional_entropy() - beta * n * d)
}

/// Sampler state for the fixed-grid encoder.
#[derive(Clone, Debug)]
pub struct GibbsState {
    x: Vec<f64>,
    levels: Vec<f64>,
    y: Vec<Symbol>,
    counts: ContextCountTable,
    beta: f64,
    energy: f64,
    site: Site,
    costs: Vec<f64>,
    weights: Vec<f64>,
    order: Vec<usize>,
}

impl GibbsState {
    pub fn new(
        x: &SignalBuffer,
        grid: &ReproductionGrid,
        y: Vec<Symbol>,
        k: usize,
        beta: f64,
    ) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::param("y", "length does not match input"));
        }
        let counts = ContextCountTable::build(&y, k, grid.len() as u32)?;
        let mut state = GibbsState {
            x: x.samples().to_vec(),
            levels: grid.levels().to_vec(),
            y,
            counts,
            beta,
            energy: 0.0,
            site: Site::default(),
            costs: Vec::with_capacity(grid.len()),
            weights: Vec::with_capacity(grid.len()),
            order: (0..x.len()).collect(),
        };
        state.energy = state.recompute_energy();
        Ok(state)
    }

    /// Start from the nearest-level quantization of `x`.
    pub fn quantized(x: &SignalBuffer, grid: &ReproductionGrid, k: usize, beta: f64) -> Result<Self> {
        Self::new(x, grid, grid.quantize(x.samples()), k, beta)
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.y
    }

    pub fn into_symbols(self) -> Vec<Symbol> {
        self.y
    }

    pub fn counts(&self) -> &ContextCountTable {
        &self.counts
    }

    pub fn reconstruction(&self) -> Vec<f64> {
        self.y.iter().map(|&s| self.levels[s as usize]).collect()
    }

    /// The incrementally tracked energy.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Energy evaluated from the current tables.
    pub fn recompute_energy(&self) -> f64 {
        let sq: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(&x, &s)| (self.levels[s as usize] - x).powi(2))
            .sum();
        self.counts.code_bits() - self.beta * sq
    }

    /// Full conditional of position `i` at inverse temperature `s`.
    pub fn gibbs_conditional(&self, i: usize, s: f64) -> Vec<f64> {
        let a = self.y[i];
        let xi = self.x[i];
        let base = (self.levels[a as usize] - xi).powi(2);
        let costs: Vec<f64> = (0..self.levels.len() as Symbol)
            .map(|b| {
                let dist = (self.levels[b as usize] - xi).powi(2) - base;
                self.counts.delta_code_bits(&self.y, i, b) - self.beta * dist
            })
            .collect();
        normalized(&costs, s)
    }

    /// Redraw position `i`.
    pub fn resample(&mut self, i: usize, s: f64, rng: &mut SeededRng) {
        let a = self.y[i];
        let xi = self.x[i];
        self.counts.prepare_site(&self.y, i, &mut self.site);
        self.counts.withdraw(&self.site);
        self.costs.clear();
        for (b, &level) in self.levels.iter().enumerate() {
            let ent = self.counts.insertion_cost(&mut self.site, a, b as Symbol);
            self.costs.push(ent - self.beta * (level - xi) * (level - xi));
        }
        let u: f64 = rng.random();
        let b = draw(&self.costs, s, u, &mut self.weights);
        self.energy += self.costs[b] - self.costs[a as usize];
        self.counts.deposit(&self.site, a, b as Symbol);
        self.y[i] = b as Symbol;
    }

    /// Visit every position once in a random permutation order.
    pub fn super_iteration(&mut self, s: f64, rng: &mut SeededRng) {
        let mut order = std::mem::take(&mut self.order);
        order.shuffle(rng);
        for &i in &order {
            self.resample(i, s, rng);
        }
        self.order = order;
    }

    /// Run the configured schedule for `config.r` super-iterations.
    pub fn anneal(&mut self, config: &AnnealConfig, rng: &mut SeededRng) {
        for t in 1..=config.r {
            self.super_iteration(config.inverse_temperature(t), rng);
        }
    }
}

/// Quantize `x` onto `grid`, then anneal. Returns the final grid indices.
pub fn run_algorithm1(
    x: &SignalBuffer,
    grid: &ReproductionGrid,
    config: &AnnealConfig,
) -> Result<Vec<Symbol>> {
    config.validate()?;
    let mut state = GibbsState::quantized(x, grid, config.k, config.beta)?;
    let mut rng = seeded_rng(config.seed);
    state.anneal(config, &mut rng);
    Ok(state.into_symbols())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn signal(v: &[f64]) -> SignalBuffer {
        SignalBuffer::new(v.to_vec()).unwrap()
    }

    fn random_signal(n: usize, seed: u64) -> SignalBuffer {
        let mut rng = seeded_rng(seed);
        signal(&(0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>())
    }

    #[test]
    fn distortion_examples() {
        assert_eq!(distortion(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(distortion(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert!(distortion(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn distortion_matches_naive_sum() {
        let mut rng = seeded_rng(3);
        let x: Vec<f64> = (0..1000).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..1000).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut naive = 0.0;
        for i in 0..x.len() {
            naive += (x[i] - y[i]) * (x[i] - y[i]);
        }
        assert!((distortion(&x, &y).unwrap() - naive / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn energy_examples() {
        // H_k = 0 (constant output), d_n = 0.5, n = 100, beta = -2 -> 100.
        let grid = ReproductionGrid::from_levels(vec![0.0, 1.0]).unwrap();
        let x: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let y = vec![0; 100];
        let d = distortion(&x, &grid.reconstruct(&y)).unwrap();
        assert_eq!(d, 1.0);
        let x_half: Vec<f64> = x.iter().map(|v| v / 2f64.sqrt()).collect();
        let e = energy(&x_half, &grid, &y, 1, -2.0).unwrap();
        assert!((e - 100.0).abs() < 1e-9);

        let grid = ReproductionGrid::for_length(16).unwrap();
        let y = vec![3, 4, 3, 5, 16, 16];
        let x = grid.reconstruct(&y);
        let h = ContextCountTable::build(&y, 1, grid.len() as u32).unwrap().conditional_entropy();
        assert!((energy(&x, &grid, &y, 1, -3.0).unwrap() - 6.0 * h).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(AnnealConfig::new(0.0, 1.0, 1, 0, 0).validate().is_err());
        assert!(AnnealConfig::new(-1.0, 0.0, 1, 0, 0).validate().is_err());
        assert!(AnnealConfig::new(-1.0, 1.0, 0, 0, 0).validate().is_err());
        let cfg = AnnealConfig::new(-1.0, 2.0, 5, 0, 0);
        cfg.validate().unwrap();
        assert_eq!(cfg.inverse_temperature(1), 0.0);
        assert_eq!(cfg.inverse_temperature(4), 4.0);
        let shifted = AnnealConfig {
            schedule: Schedule::Shifted(3.0),
            ..cfg
        };
        assert_eq!(shifted.inverse_temperature(1), 4.0);
        assert!(AnnealConfig { schedule: Schedule::Shifted(-1.0), ..cfg }.validate().is_err());
    }

    #[test]
    fn zero_temperature_conditional_is_uniform() {
        let x = random_signal(10, 1);
        let grid = ReproductionGrid::for_length(10).unwrap();
        let state = GibbsState::quantized(&x, &grid, 1, -2.0).unwrap();
        let p = state.gibbs_conditional(4, 0.0);
        for v in &p {
            assert!((v - 1.0 / grid.len() as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn cold_conditional_concentrates() {
        let x = signal(&[0.1, 0.9, 0.2, 0.8]);
        let grid = ReproductionGrid::from_levels(vec![0.0, 1.0]).unwrap();
        let state = GibbsState::quantized(&x, &grid, 0, -100.0).unwrap();
        let p = state.gibbs_conditional(0, 1e6);
        assert!(p[0] >= 1.0 - 1e-6);
    }

    #[test]
    fn conditional_matches_brute_force_boltzmann() {
        let grid = ReproductionGrid::from_levels(vec![-1.0, 0.0, 1.0]).unwrap();
        let mut rng = seeded_rng(9);
        for trial in 0..20 {
            let n = rng.random_range(3..9);
            let x = random_signal(n, trial);
            let y: Vec<Symbol> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let k = rng.random_range(0..2);
            let beta = -rng.random_range(0.2..4.0);
            let s = rng.random_range(0.0..3.0);
            let state = GibbsState::new(&x, &grid, y.clone(), k, beta).unwrap();
            let i = rng.random_range(0..n);
            let p = state.gibbs_conditional(i, s);
            let energies: Vec<f64> = (0..3)
                .map(|b| {
                    let mut v = y.clone();
                    v[i] = b;
                    energy(x.samples(), &grid, &v, k, beta).unwrap()
                })
                .collect();
            let expect = normalized(&energies, s);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in p.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tracked_energy_matches_oracle() {
        let x = random_signal(60, 4);
        let grid = ReproductionGrid::for_length(60).unwrap();
        let mut state = GibbsState::quantized(&x, &grid, 2, -3.0).unwrap();
        let mut rng = seeded_rng(4);
        for t in 1..=20 {
            state.super_iteration(0.3 * t as f64, &mut rng);
        }
        let oracle = energy(x.samples(), &grid, state.symbols(), 2, -3.0).unwrap();
        assert!((state.energy() - oracle).abs() <= 1e-6 * oracle.abs().max(1.0));
        let rebuilt = ContextCountTable::build(state.symbols(), 2, grid.len() as u32).unwrap();
        assert_eq!(state.counts().entries(), rebuilt.entries());
    }

    #[test]
    fn strict_local_minimum_is_stable() {
        // All-zero output on zero input: every single-site move raises both
        // the entropy and the distortion.
        let x = signal(&[0.0; 6]);
        let grid = ReproductionGrid::from_levels(vec![0.0, 1.0, 2.0]).unwrap();
        let mut state = GibbsState::quantized(&x, &grid, 1, -1.0).unwrap();
        for i in 0..6 {
            for b in 1..3 {
                assert!(state.counts().delta_code_bits(state.symbols(), i, b) + (b * b) as f64 > 0.0);
            }
        }
        let mut rng = seeded_rng(0);
        for _ in 0..20 {
            state.super_iteration(1e9, &mut rng);
        }
        assert_eq!(state.symbols(), &[0; 6]);
    }

    #[test]
    fn replay_is_deterministic() {
        let x = random_signal(40, 2);
        let grid = ReproductionGrid::for_length(40).unwrap();
        let cfg = AnnealConfig::new(-2.0, 1.0, 10, 1, 99);
        assert_eq!(
            run_algorithm1(&x, &grid, &cfg).unwrap(),
            run_algorithm1(&x, &grid, &cfg).unwrap()
        );
    }

    #[test]
    fn near_zero_beta_does_not_increase_entropy() {
        let grid = ReproductionGrid::from_levels(vec![-1.0, 0.0, 1.0]).unwrap();
        let mut rng = seeded_rng(12);
        let y0: Vec<Symbol> = (0..12).map(|_| rng.random_range(0..3)).collect();
        let x = signal(&grid.reconstruct(&y0));
        let h0 = ContextCountTable::build(&y0, 1, 3).unwrap().conditional_entropy();
        let wins = (0..10)
            .filter(|&seed| {
                let cfg = AnnealConfig::new(-1e-6, 2.0, 200, 1, seed);
                let y = run_algorithm1(&x, &grid, &cfg).unwrap();
                ContextCountTable::build(&y, 1, 3).unwrap().conditional_entropy() <= h0 + 1e-12
            })
            .count();
        assert!(wins >= 9, "{wins}/10");
    }

    #[test]
    fn annealing_improves_on_initial_quantization() {
        let x = random_signal(200, 8);
        let grid = ReproductionGrid::for_length(200).unwrap();
        let initial = GibbsState::quantized(&x, &grid, 1, -4.0).unwrap().energy();
        let mut finals: Vec<f64> = (0..10)
            .map(|seed| {
                let cfg = AnnealConfig::new(-4.0, 1.0, 30, 1, seed);
                let y = run_algorithm1(&x, &grid, &cfg).unwrap();
                energy(x.samples(), &grid, &y, 1, -4.0).unwrap()
            })
            .collect();
        finals.sort_by(f64::total_cmp);
        assert!(finals[5] <= initial, "median {} vs initial {initial}", finals[5]);
    }
}
