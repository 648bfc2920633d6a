//! Context counts and the `k`-depth conditional empirical entropy.
//!
//! Contexts are packed as base-`M` integers. A *pair key* packs the `k + 1`
//! symbols `z[j-k..=j]` of the window ending at `j`, most significant first;
//! its *row key* (the context alone) is `pair / M`. Only windows with a full
//! left context (`j >= k`, zero-based) are counted.
//!
//! Everything is tracked in units of total code bits, `n * H_k`, which is
//! `sum_rows T log T - sum_pairs m log m`. A single substitution touches at
//! most `k + 1` windows, so its effect is computed from those rows alone.

use std::ops::Range;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::grid::Symbol;

/// Tables with at most this many pair keys are stored densely.
const DENSE_LIMIT: u64 = 1 << 20;

#[derive(Clone, Debug)]
enum Store {
    Dense {
        pairs: Vec<u32>,
        rows: Vec<u32>,
    },
    Sparse {
        pairs: FxHashMap<u64, u32>,
        rows: FxHashMap<u64, u32>,
    },
}

impl Store {
    #[inline]
    fn pair(&self, key: u64) -> u32 {
        match self {
            Store::Dense { pairs, .. } => pairs[key as usize],
            Store::Sparse { pairs, .. } => pairs.get(&key).copied().unwrap_or(0),
        }
    }

    #[inline]
    fn row(&self, key: u64) -> u32 {
        match self {
            Store::Dense { rows, .. } => rows[key as usize],
            Store::Sparse { rows, .. } => rows.get(&key).copied().unwrap_or(0),
        }
    }

    #[inline]
    fn increment(&mut self, pair: u64, row: u64) {
        match self {
            Store::Dense { pairs, rows } => {
                pairs[pair as usize] += 1;
                rows[row as usize] += 1;
            }
            Store::Sparse { pairs, rows } => {
                *pairs.entry(pair).or_insert(0) += 1;
                *rows.entry(row).or_insert(0) += 1;
            }
        }
    }

    #[inline]
    fn decrement(&mut self, pair: u64, row: u64) {
        fn dec(map: &mut FxHashMap<u64, u32>, key: u64) {
            let slot = map.get_mut(&key).expect("decrement of absent context");
            *slot -= 1;
            if *slot == 0 {
                map.remove(&key);
            }
        }
        match self {
            Store::Dense { pairs, rows } => {
                pairs[pair as usize] -= 1;
                rows[row as usize] -= 1;
            }
            Store::Sparse { pairs, rows } => {
                dec(pairs, pair);
                dec(rows, row);
            }
        }
    }

    fn nonzero_pairs(&self) -> Vec<(u64, u32)> {
        let mut out: Vec<(u64, u32)> = match self {
            Store::Dense { pairs, .. } => pairs
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| (k as u64, c))
                .collect(),
            Store::Sparse { pairs, .. } => pairs.iter().map(|(&k, &c)| (k, c)).collect(),
        };
        out.sort_unstable();
        out
    }

    fn nonzero_rows(&self) -> Vec<(u64, u32)> {
        let mut out: Vec<(u64, u32)> = match self {
            Store::Dense { rows, .. } => rows
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| (k as u64, c))
                .collect(),
            Store::Sparse { rows, .. } => rows.iter().map(|(&k, &c)| (k, c)).collect(),
        };
        out.sort_unstable();
        out
    }
}

/// Scratch space describing the windows that cover one position.
#[derive(Clone, Debug, Default)]
pub(crate) struct Site {
    /// Pair keys of the covering windows under the current sequence.
    keys: Vec<u64>,
    /// Weight of the substituted position inside each key.
    weights: Vec<u64>,
    cand_pairs: Vec<u64>,
    cand_rows: Vec<u64>,
}

/// Counts `m_k(z, u)[a]` of every (context, symbol) window in a sequence.
#[derive(Clone, Debug)]
pub struct ContextCountTable {
    k: usize,
    alphabet: u32,
    len: usize,
    /// `M^0 ..= M^k`.
    powers: Vec<u64>,
    store: Store,
    /// `c log2 c` for `c = 0..=len`.
    xlogx: Vec<f64>,
    /// `(c+1) log2 (c+1) - c log2 c`, the cost of one more occurrence.
    step: Vec<f64>,
}

impl ContextCountTable {
    pub fn build(z: &[Symbol], k: usize, alphabet: u32) -> Result<Self> {
        if alphabet < 1 {
            return Err(Error::param("alphabet", "must be at least 1"));
        }
        if k >= z.len() {
            return Err(Error::param(
                "k",
                format!("context depth {k} must be below the sequence length {}", z.len()),
            ));
        }
        if let Some(bad) = z.iter().find(|&&s| s >= alphabet) {
            return Err(Error::param(
                "symbols",
                format!("symbol {bad} outside alphabet of size {alphabet}"),
            ));
        }
        let m = u64::from(alphabet);
        let mut powers = Vec::with_capacity(k + 1);
        let mut p = 1u64;
        powers.push(p);
        for _ in 0..k {
            p = p
                .checked_mul(m)
                .ok_or_else(|| Error::param("k", "alphabet^(k+1) overflows 64-bit context keys"))?;
            powers.push(p);
        }
        let pair_space = p
            .checked_mul(m)
            .ok_or_else(|| Error::param("k", "alphabet^(k+1) overflows 64-bit context keys"))?;
        let store = if pair_space <= DENSE_LIMIT {
            Store::Dense {
                pairs: vec![0; pair_space as usize],
                rows: vec![0; p as usize],
            }
        } else {
            Store::Sparse {
                pairs: FxHashMap::default(),
                rows: FxHashMap::default(),
            }
        };
        let xlogx: Vec<f64> = (0..=z.len() + 1)
            .map(|c| if c == 0 { 0.0 } else { c as f64 * libm::log2(c as f64) })
            .collect();
        let step = xlogx.windows(2).map(|w| w[1] - w[0]).collect();
        let mut table = ContextCountTable {
            k,
            alphabet,
            len: z.len(),
            powers,
            store,
            xlogx,
            step,
        };
        for j in k..z.len() {
            let key = table.pair_key(z, j);
            table.store.increment(key, key / m);
        }
        Ok(table)
    }

    pub fn depth(&self) -> usize {
        self.k
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Packed key of the window `z[j-k..=j]`.
    #[inline]
    fn pair_key(&self, z: &[Symbol], j: usize) -> u64 {
        let m = u64::from(self.alphabet);
        z[j - self.k..=j]
            .iter()
            .fold(0u64, |acc, &s| acc * m + u64::from(s))
    }

    /// Pack a context tuple (oldest symbol first).
    pub fn pack_context(&self, context: &[Symbol]) -> u64 {
        assert_eq!(context.len(), self.k, "context length must equal k");
        let m = u64::from(self.alphabet);
        context.iter().fold(0u64, |acc, &s| acc * m + u64::from(s))
    }

    pub fn count(&self, context: &[Symbol], symbol: Symbol) -> u32 {
        let row = self.pack_context(context);
        self.store.pair(row * u64::from(self.alphabet) + u64::from(symbol))
    }

    pub fn row_total(&self, context: &[Symbol]) -> u32 {
        self.store.row(self.pack_context(context))
    }

    /// Occupied `(packed context, symbol, count)` entries, sorted.
    pub fn entries(&self) -> Vec<(u64, Symbol, u32)> {
        let m = u64::from(self.alphabet);
        self.store
            .nonzero_pairs()
            .into_iter()
            .map(|(key, c)| (key / m, (key % m) as Symbol, c))
            .collect()
    }

    /// Occupied `(packed context, row total)` entries, sorted.
    pub fn row_totals(&self) -> Vec<(u64, u32)> {
        self.store.nonzero_rows()
    }

    /// `n * H_k(z)`: the empirical conditional codelength in bits.
    pub fn code_bits(&self) -> f64 {
        let rows: f64 = self
            .store
            .nonzero_rows()
            .iter()
            .map(|&(_, t)| self.xlogx[t as usize])
            .sum();
        let pairs: f64 = self
            .store
            .nonzero_pairs()
            .iter()
            .map(|&(_, c)| self.xlogx[c as usize])
            .sum();
        (rows - pairs).max(0.0)
    }

    /// `H_k(z)` in bits per symbol, normalized by `n` (not `n - k`).
    pub fn conditional_entropy(&self) -> f64 {
        let bound = libm::log2(f64::from(self.alphabet));
        (self.code_bits() / self.len as f64).clamp(0.0, bound)
    }

    /// Positions (zero-based) of the windows covering position `i`.
    #[inline]
    fn windows(&self, i: usize) -> Range<usize> {
        let lo = i.max(self.k);
        let hi = (i + self.k + 1).min(self.len);
        lo..hi.max(lo)
    }

    pub(crate) fn prepare_site(&self, z: &[Symbol], i: usize, site: &mut Site) {
        site.keys.clear();
        site.weights.clear();
        for j in self.windows(i) {
            site.keys.push(self.pair_key(z, j));
            site.weights.push(self.powers[j - i]);
        }
    }

    /// Remove the windows covering the prepared position.
    pub(crate) fn withdraw(&mut self, site: &Site) {
        let m = u64::from(self.alphabet);
        for &key in &site.keys {
            self.store.decrement(key, key / m);
        }
    }

    /// Re-insert the covering windows with the position set to `b` (it held
    /// `a` when the site was prepared).
    pub(crate) fn deposit(&mut self, site: &Site, a: Symbol, b: Symbol) {
        let m = u64::from(self.alphabet);
        for (&key, &w) in site.keys.iter().zip(&site.weights) {
            let key = key - u64::from(a) * w + u64::from(b) * w;
            self.store.increment(key, key / m);
        }
    }

    /// Code-bit cost of inserting the covering windows with the position set
    /// to `b`, against a table from which they have been withdrawn.
    #[inline]
    pub(crate) fn insertion_cost(&self, site: &mut Site, a: Symbol, b: Symbol) -> f64 {
        let m = u64::from(self.alphabet);
        site.cand_pairs.clear();
        site.cand_rows.clear();
        let mut cost = 0.0;
        for (&key, &w) in site.keys.iter().zip(&site.weights) {
            let pair = key - u64::from(a) * w + u64::from(b) * w;
            let row = pair / m;
            let prior_pair = site.cand_pairs.iter().filter(|&&p| p == pair).count() as u32;
            let prior_row = site.cand_rows.iter().filter(|&&r| r == row).count() as u32;
            let t = self.store.row(row) + prior_row;
            let c = self.store.pair(pair) + prior_pair;
            cost += self.step[t as usize] - self.step[c as usize];
            site.cand_pairs.push(pair);
            site.cand_rows.push(row);
        }
        cost
    }

    /// Change in `n * H_k` if `z[i]` were replaced by `b`. Does not mutate.
    pub fn delta_code_bits(&self, z: &[Symbol], i: usize, b: Symbol) -> f64 {
        let a = z[i];
        if a == b {
            return 0.0;
        }
        let m = u64::from(self.alphabet);
        let mut site = Site::default();
        self.prepare_site(z, i, &mut site);

        // Remove the old windows one at a time.
        let mut delta = 0.0;
        let old_rows: Vec<u64> = site.keys.iter().map(|&p| p / m).collect();
        for (idx, (&pair, &row)) in site.keys.iter().zip(&old_rows).enumerate() {
            let prior_pair = site.keys[..idx].iter().filter(|&&p| p == pair).count() as u32;
            let prior_row = old_rows[..idx].iter().filter(|&&r| r == row).count() as u32;
            let t = self.store.row(row) - prior_row;
            let c = self.store.pair(pair) - prior_pair;
            delta -= self.step[(t - 1) as usize] - self.step[(c - 1) as usize];
        }

        // Then add the new ones against the reduced counts.
        let mut new_pairs: Vec<u64> = Vec::with_capacity(site.keys.len());
        let mut new_rows: Vec<u64> = Vec::with_capacity(site.keys.len());
        for (&key, &w) in site.keys.iter().zip(&site.weights) {
            let pair = key - u64::from(a) * w + u64::from(b) * w;
            let row = pair / m;
            let removed_pair = site.keys.iter().filter(|&&p| p == pair).count() as u32;
            let removed_row = old_rows.iter().filter(|&&r| r == row).count() as u32;
            let prior_pair = new_pairs.iter().filter(|&&p| p == pair).count() as u32;
            let prior_row = new_rows.iter().filter(|&&r| r == row).count() as u32;
            let t = self.store.row(row) - removed_row + prior_row;
            let c = self.store.pair(pair) - removed_pair + prior_pair;
            delta += self.step[t as usize] - self.step[c as usize];
            new_pairs.push(pair);
            new_rows.push(row);
        }
        delta
    }

    /// `H_k(z with z[i] := b) - H_k(z)`.
    pub fn delta_entropy(&self, z: &[Symbol], i: usize, b: Symbol) -> f64 {
        self.delta_code_bits(z, i, b) / self.len as f64
    }

    /// Set `z[i] = b` and update the counts to match.
    pub fn apply_substitution(&mut self, z: &mut [Symbol], i: usize, b: Symbol) {
        assert!(b < self.alphabet, "symbol {b} outside alphabet");
        let a = z[i];
        if a == b {
            return;
        }
        let mut site = Site::default();
        self.prepare_site(z, i, &mut site);
        self.withdraw(&site);
        self.deposit(&site, a, b);
        z[i] = b;
    }
}
