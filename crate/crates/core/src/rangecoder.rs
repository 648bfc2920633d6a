//! 64-bit range coder over 32-bit frequency tables.
//!
//! The encoder keeps `low` and `range` as 64-bit words. A symbol with
//! cumulative frequency `cum` and frequency `freq` (out of `2^32`) maps to
//! `low += (range >> 32) * cum`, `range = (range >> 32) * freq`. An overflow of
//! `low` is a carry into bytes already written and is propagated backwards.
//! Whenever `range < 2^56` the top byte of `low` is emitted and both words
//! shift left by eight bits.
//!
//! Termination writes the fewest leading bytes `f` of a value `v` such that
//! every continuation of those bytes stays inside the final interval. The
//! decoder mirrors `low`/`range`, so it can recompute `f` and verify the exact
//! stream length: short or padded streams are rejected instead of decoding to
//! something plausible.

use crate::error::{Error, Result};

pub const FREQ_BITS: u32 = 32;
pub const FREQ_TOTAL: u64 = 1 << FREQ_BITS;
const RENORM_BELOW: u64 = 1 << 56;

/// Number of trailing bytes and the value they encode, for the final state.
fn termination(low: u64, range: u64) -> (usize, u128) {
    let lo = u128::from(low);
    let hi = lo + u128::from(range);
    for f in 1..=8usize {
        let unit = 1u128 << (64 - 8 * f);
        let v = lo.div_ceil(unit) * unit;
        if v + unit <= hi {
            return (f, v);
        }
    }
    unreachable!("an 8-byte termination always fits")
}

#[derive(Debug)]
pub struct RangeEncoder {
    low: u64,
    range: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u64::MAX,
            out: Vec::new(),
        }
    }

    fn carry(&mut self) {
        for byte in self.out.iter_mut().rev() {
            if *byte == 0xFF {
                *byte = 0;
            } else {
                *byte += 1;
                return;
            }
        }
        unreachable!("carry out of the first byte");
    }

    pub fn encode(&mut self, cum: u64, freq: u64) {
        debug_assert!(freq >= 1 && cum + freq <= FREQ_TOTAL);
        let r = self.range >> FREQ_BITS;
        let (low, overflow) = self.low.overflowing_add(r * cum);
        if overflow {
            self.carry();
        }
        self.low = low;
        self.range = r * freq;
        while self.range < RENORM_BELOW {
            self.out.push((self.low >> 56) as u8);
            self.low <<= 8;
            self.range <<= 8;
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        let (f, v) = termination(self.low, self.range);
        if v >> 64 != 0 {
            self.carry();
        }
        let v = v as u64;
        for idx in 0..f {
            self.out.push((v >> (56 - 8 * idx)) as u8);
        }
        self.out
    }
}

#[derive(Debug)]
pub struct RangeDecoder<'a> {
    bytes: &'a [u8],
    pos: usize,
    low: u64,
    range: u64,
    code: u64,
    shifted: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        let mut dec = RangeDecoder {
            bytes,
            pos: 0,
            low: 0,
            range: u64::MAX,
            code: 0,
            shifted: 0,
        };
        for _ in 0..8 {
            dec.code = (dec.code << 8) | u64::from(dec.next_byte());
        }
        dec
    }

    fn next_byte(&mut self) -> u8 {
        let b = self.bytes.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b
    }

    /// The frequency slot the next symbol falls into.
    pub fn target(&self) -> Result<u64> {
        let r = self.range >> FREQ_BITS;
        let t = self.code.wrapping_sub(self.low) / r;
        if t >= FREQ_TOTAL {
            return Err(Error::Decode("code value outside the coding interval".into()));
        }
        Ok(t)
    }

    pub fn consume(&mut self, cum: u64, freq: u64) {
        let r = self.range >> FREQ_BITS;
        self.low = self.low.wrapping_add(r * cum);
        self.range = r * freq;
        while self.range < RENORM_BELOW {
            self.low <<= 8;
            self.range <<= 8;
            self.code = (self.code << 8) | u64::from(self.next_byte());
            self.shifted += 1;
        }
    }

    /// Check that the stream ends exactly where the encoder stopped.
    pub fn finish(self) -> Result<()> {
        let (f, _) = termination(self.low, self.range);
        let expected = self.shifted + f;
        match self.bytes.len().cmp(&expected) {
            std::cmp::Ordering::Equal => Ok(()),
            std::cmp::Ordering::Less => Err(Error::Decode(format!(
                "stream truncated: {} bytes, expected {expected}",
                self.bytes.len()
            ))),
            std::cmp::Ordering::Greater => Err(Error::Decode(format!(
                "{} trailing bytes after the coded data",
                self.bytes.len() - expected
            ))),
        }
    }
}

/// Turn a probability vector into integer frequencies summing to `2^32`,
/// each at least one. The largest-probability symbol absorbs the rounding.
pub fn quantize_frequencies(probs: &[f64], freqs: &mut Vec<u64>) {
    let m = probs.len() as u64;
    let budget = FREQ_TOTAL - m;
    freqs.clear();
    let mut assigned = 0u64;
    let mut argmax = 0usize;
    for (idx, &p) in probs.iter().enumerate() {
        let extra = (p.clamp(0.0, 1.0) * budget as f64).floor() as u64;
        freqs.push(1 + extra);
        assigned += extra;
        if p > probs[argmax] {
            argmax = idx;
        }
    }
    if assigned <= budget {
        freqs[argmax] += budget - assigned;
    } else {
        let mut excess = assigned - budget;
        // Shave the excess off the largest entries, largest first.
        let mut order: Vec<usize> = (0..freqs.len()).collect();
        order.sort_by(|&a, &b| freqs[b].cmp(&freqs[a]).then(a.cmp(&b)));
        for idx in order {
            let take = excess.min(freqs[idx] - 1);
            freqs[idx] -= take;
            excess -= take;
            if excess == 0 {
                break;
            }
        }
    }
    debug_assert_eq!(freqs.iter().sum::<u64>(), FREQ_TOTAL);
}
