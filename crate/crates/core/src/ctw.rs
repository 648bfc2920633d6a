//! Context tree weighting over an `M`-ary alphabet, driving the range coder.
//!
//! Each node of the context tree holds symbol counts and the ratio
//! `beta = P_e / prod_children P_w` between its own Krichevsky-Trofimov
//! estimate and the product of its children's weighted probabilities. With
//! that ratio the sequential predictive distribution is computed leaf to root:
//!
//! ```text
//! q_D(a) = KT_D(a)
//! q_d(a) = (beta_d KT_d(a) + q_{d+1}(a)) / (beta_d + 1)
//! ```
//!
//! and after coding `a`, `beta_d *= KT_d(a) / q_{d+1}(a)`. Only `+ - * /` are
//! used, so encoder and decoder agree bit for bit on every platform. The
//! estimator is `KT(a) = (count_a + 1/2) / (total + M/2)`; contexts before
//! the first symbol are padded with symbol 0.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::grid::Symbol;
use crate::rangecoder::{quantize_frequencies, RangeDecoder, RangeEncoder};

/// Bounds on `beta`; beyond them one side of the mixture is negligible.
const BETA_MAX: f64 = 1e150;
const BETA_MIN: f64 = 1e-150;

/// CTW output bytes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bitstream {
    bytes: Vec<u8>,
}

impl Bitstream {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Bitstream { bytes }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn len_bits(&self) -> u64 {
        8 * self.bytes.len() as u64
    }
}

#[derive(Clone, Debug)]
struct Node {
    counts: Vec<u32>,
    total: u32,
    beta: f64,
}

impl Node {
    fn new(m: usize) -> Self {
        Node {
            counts: vec![0; m],
            total: 0,
            beta: 1.0,
        }
    }

    #[inline]
    fn kt(&self, a: usize, half_m: f64) -> f64 {
        (f64::from(self.counts[a]) + 0.5) / (f64::from(self.total) + half_m)
    }
}

/// A sequential CTW predictor of depth `D`.
#[derive(Clone, Debug)]
pub struct CtwModel {
    depth: usize,
    alphabet: u32,
    /// Keyed by `(depth, packed context)`; the packed context lists the most
    /// recent symbol first.
    nodes: FxHashMap<(u32, u64), Node>,
    /// The last `D` symbols, most recent first.
    history: Vec<Symbol>,
    path: Vec<(u32, u64)>,
    /// `q_d` for each depth on the current path, flattened `(D+1) x M`.
    mix: Vec<f64>,
}

impl CtwModel {
    pub fn new(depth: usize, alphabet: u32) -> Result<Self> {
        if alphabet < 1 {
            return Err(Error::param("alphabet", "must be at least 1"));
        }
        let mut p: u64 = 1;
        for _ in 0..depth {
            p = p.checked_mul(u64::from(alphabet)).ok_or_else(|| {
                Error::param("depth", "alphabet^depth overflows 64-bit context keys")
            })?;
        }
        Ok(CtwModel {
            depth,
            alphabet,
            nodes: FxHashMap::default(),
            history: vec![0; depth],
            path: Vec::with_capacity(depth + 1),
            mix: vec![0.0; (depth + 1) * alphabet as usize],
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    /// Predictive distribution of the next symbol at the root.
    pub fn predict(&mut self) -> &[f64] {
        let m = self.alphabet as usize;
        let half_m = self.alphabet as f64 / 2.0;
        self.path.clear();
        let mut ctx = 0u64;
        self.path.push((0, 0));
        for d in 1..=self.depth {
            ctx = ctx * u64::from(self.alphabet) + u64::from(self.history[d - 1]);
            self.path.push((d as u32, ctx));
        }
        for &key in &self.path {
            self.nodes.entry(key).or_insert_with(|| Node::new(m));
        }
        let leaf = &self.nodes[&self.path[self.depth]];
        for a in 0..m {
            self.mix[self.depth * m + a] = leaf.kt(a, half_m);
        }
        for d in (0..self.depth).rev() {
            let node = &self.nodes[&self.path[d]];
            let beta = node.beta;
            for a in 0..m {
                let child = self.mix[(d + 1) * m + a];
                self.mix[d * m + a] = (beta * node.kt(a, half_m) + child) / (beta + 1.0);
            }
        }
        &self.mix[..m]
    }

    /// Account for the symbol that followed the last `predict`.
    pub fn update(&mut self, symbol: Symbol) {
        let m = self.alphabet as usize;
        let half_m = self.alphabet as f64 / 2.0;
        let a = symbol as usize;
        for d in 0..=self.depth {
            let child = if d < self.depth {
                Some(self.mix[(d + 1) * m + a])
            } else {
                None
            };
            let node = self.nodes.get_mut(&self.path[d]).expect("predicted path");
            if let Some(child) = child {
                let ratio = node.kt(a, half_m) / child;
                node.beta = (node.beta * ratio).clamp(BETA_MIN, BETA_MAX);
            }
            node.counts[a] += 1;
            node.total += 1;
        }
        if self.depth > 0 {
            self.history.rotate_right(1);
            self.history[0] = symbol;
        }
    }
}

fn check_symbols(z: &[Symbol], alphabet: u32) -> Result<()> {
    match z.iter().position(|&s| s >= alphabet) {
        Some(pos) => Err(Error::param(
            "symbols",
            format!("symbol {} at position {pos} outside alphabet of size {alphabet}", z[pos]),
        )),
        None => Ok(()),
    }
}

pub fn encode(z: &[Symbol], depth: usize, alphabet: u32) -> Result<Bitstream> {
    check_symbols(z, alphabet)?;
    let mut model = CtwModel::new(depth, alphabet)?;
    if z.is_empty() {
        return Ok(Bitstream::default());
    }
    let mut enc = RangeEncoder::new();
    let mut freqs = Vec::with_capacity(alphabet as usize);
    for &s in z {
        quantize_frequencies(model.predict(), &mut freqs);
        let cum: u64 = freqs[..s as usize].iter().sum();
        enc.encode(cum, freqs[s as usize]);
        model.update(s);
    }
    Ok(Bitstream::from_bytes(enc.finish()))
}

pub fn decode(bits: &Bitstream, n: usize, depth: usize, alphabet: u32) -> Result<Vec<Symbol>> {
    let mut model = CtwModel::new(depth, alphabet)?;
    if n == 0 {
        if !bits.bytes().is_empty() {
            return Err(Error::Decode("payload present for an empty sequence".into()));
        }
        return Ok(Vec::new());
    }
    let mut dec = RangeDecoder::new(bits.bytes());
    let mut freqs = Vec::with_capacity(alphabet as usize);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        quantize_frequencies(model.predict(), &mut freqs);
        let target = dec.target()?;
        let mut cum = 0u64;
        let mut symbol = 0usize;
        while cum + freqs[symbol] <= target {
            cum += freqs[symbol];
            symbol += 1;
        }
        dec.consume(cum, freqs[symbol]);
        model.update(symbol as Symbol);
        out.push(symbol as Symbol);
    }
    dec.finish()?;
    Ok(out)
}

/// `-log2` of the CTW root probability of `z`, in bits.
pub fn ideal_codelength(z: &[Symbol], depth: usize, alphabet: u32) -> Result<f64> {
    check_symbols(z, alphabet)?;
    let mut model = CtwModel::new(depth, alphabet)?;
    let mut bits = 0.0;
    for &s in z {
        let p = model.predict()[s as usize];
        bits -= libm::log2(p);
        model.update(s);
    }
    Ok(bits.max(0.0))
}
