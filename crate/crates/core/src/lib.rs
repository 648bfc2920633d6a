//! Universal lossy compression of real-valued sources by simulated annealing.
//!
//! A real sequence `x` is mapped to a reproduction sequence by minimizing
//!
//! ```text
//! n H_k(y) - beta n d(x, y)
//! ```
//!
//! with a Gibbs sampler whose temperature falls over time. `H_k` is the
//! conditional empirical entropy of order `k`, `d` is mean squared error, and
//! `beta < 0` trades rate for distortion. The result is losslessly coded with
//! context-tree weighting.

// `!(x > 0.0)` is how parameter checks reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod annealer;
pub mod baselines;
pub mod bench;
pub mod codec;
pub mod ctw;
pub mod entropy;
pub mod error;
pub mod grid;
pub mod rangecoder;
pub mod sources;

pub use error::{Error, Result};

/// Chapters of the guide in `book/`, compiled and run as doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/sources.md")]
    pub mod sources {}
    #[doc = include_str!("../../../book/src/energy.md")]
    pub mod energy {}
    #[doc = include_str!("../../../book/src/annealing.md")]
    pub mod annealing {}
    #[doc = include_str!("../../../book/src/adaptive.md")]
    pub mod adaptive {}
    #[doc = include_str!("../../../book/src/streams.md")]
    pub mod streams {}
    #[doc = include_str!("../../../book/src/references.md")]
    pub mod references {}
    #[doc = include_str!("../../../book/src/sweeps.md")]
    pub mod sweeps {}
}
