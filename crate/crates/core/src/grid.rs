//! Reproduction alphabets.
//!
//! [`ReproductionGrid::for_length`] builds the data-independent grid of
//! `2 gamma^2 + 1` levels spanning `[-gamma, gamma]` at step `1/gamma`, with
//! `gamma = ceil(log2 n)`. [`SymbolAlphabet`] is the abstract index set used by
//! the adaptive encoder, where levels are learned from the data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A symbol is an index into an alphabet or grid.
pub type Symbol = u32;

/// `ceil(log2 n)` for `n >= 1`, computed exactly.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReproductionGrid {
    gamma: Option<u32>,
    levels: Vec<f64>,
}

impl ReproductionGrid {
    /// The data-independent grid for inputs of length `n`.
    pub fn for_length(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", format!("grid needs n >= 2, got {n}")));
        }
        Ok(Self::with_gamma(ceil_log2(n as u64)))
    }

    pub fn with_gamma(gamma: u32) -> Self {
        assert!(gamma >= 1, "gamma must be positive");
        let g = i64::from(gamma);
        let levels = (-g * g..=g * g).map(|j| j as f64 / g as f64).collect();
        ReproductionGrid {
            gamma: Some(gamma),
            levels,
        }
    }

    /// An arbitrary grid; levels must be finite and strictly increasing.
    pub fn from_levels(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::param("levels", "grid must have at least one level"));
        }
        if levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("levels", "levels must be finite"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("levels", "levels must be strictly increasing"));
        }
        Ok(ReproductionGrid {
            gamma: None,
            levels,
        })
    }

    /// `M` evenly spaced levels from `lo` to `hi`. A degenerate span collapses
    /// to the single level `lo`.
    pub fn spanning(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::param("alphabet", "need at least one level"));
        }
        if !(hi > lo) || m == 1 {
            return Self::from_levels(vec![lo]);
        }
        let step = (hi - lo) / (m - 1) as f64;
        Self::from_levels((0..m).map(|j| lo + j as f64 * step).collect())
    }

    /// `None` for grids not built from a sequence length.
    pub fn gamma(&self) -> Option<u32> {
        self.gamma
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, symbol: Symbol) -> f64 {
        self.levels[symbol as usize]
    }

    /// Index of the nearest level. Out-of-range values clamp to the extremes
    /// and exact ties go to the smaller level.
    pub fn nearest(&self, x: f64) -> Symbol {
        let above = self.levels.partition_point(|&l| l < x);
        if above == 0 {
            return 0;
        }
        if above == self.levels.len() {
            return (self.levels.len() - 1) as Symbol;
        }
        let lo = self.levels[above - 1];
        let hi = self.levels[above];
        if x - lo <= hi - x {
            (above - 1) as Symbol
        } else {
            above as Symbol
        }
    }

    pub fn quantize(&self, x: &[f64]) -> Vec<Symbol> {
        x.iter().map(|&v| self.nearest(v)).collect()
    }

    pub fn reconstruct(&self, symbols: &[Symbol]) -> Vec<f64> {
        symbols.iter().map(|&s| self.level(s)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolAlphabet {
    size: u32,
}

impl SymbolAlphabet {
    pub fn new(size: u32) -> Result<Self> {
        if size < 2 {
            return Err(Error::param("alphabet", format!("need |Z| >= 2, got {size}")));
        }
        Ok(SymbolAlphabet { size })
    }

    /// `2 ceil(log2 n)^2 + 1`, the size of the data-independent grid.
    pub fn for_length(n: usize) -> Result<Self> {
        let g = u64::from(ceil_log2(n as u64));
        let size = 2 * g * g + 1;
        Self::new(u32::try_from(size).map_err(|_| Error::param("n", "alphabet too large"))?)
    }

    pub fn size(&self) -> u32 {
        self.size
    }
}
