//! The `.mclc` container: header, quantized levels, and the CTW payload.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "MCLC" | version u16 | algorithm u8 | n u64 | k u16 | M u32
//! | effective u32 | level bits u16 | gamma u32
//! | level codes: effective * level_bits bits, MSB first, zero padded
//! | CTW payload (rest of the file)
//! ```
//!
//! The CTW context depth equals `k`. Fixed-grid streams carry no level codes;
//! the decoder rebuilds the grid from `gamma`. Adaptive streams list one code
//! per occupied symbol in increasing symbol order, so the decoder decodes the
//! symbols first and then assigns levels.

use serde::{Deserialize, Serialize};

use crate::adaptive::{adaptive_energy, AdaptiveCodebook, AdaptiveConfig, AdaptiveState, LevelQuantizer};
use crate::annealer::{distortion, energy, AnnealConfig, GibbsState};
use crate::ctw::{self, Bitstream};
use crate::error::{Error, Result};
use crate::grid::{ceil_log2, ReproductionGrid, Symbol};
use crate::sources::{seeded_rng, SignalBuffer};

pub const MAGIC: [u8; 4] = *b"MCLC";
pub const FORMAT_VERSION: u16 = 1;
/// Bytes before the level codes.
pub const HEADER_LEN: usize = 4 + 2 + 1 + 8 + 2 + 4 + 4 + 2 + 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Annealing directly over the data-independent grid.
    Fixed,
    /// Annealing over abstract symbols with conditional-mean levels.
    Adaptive,
}

impl Algorithm {
    pub fn id(self) -> u8 {
        match self {
            Algorithm::Fixed => 1,
            Algorithm::Adaptive => 2,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Algorithm::Fixed),
            2 => Ok(Algorithm::Adaptive),
            other => Err(Error::Format(format!("unknown algorithm id {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fixed => "fixed",
            Algorithm::Adaptive => "adaptive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub version: u16,
    pub algorithm: Algorithm,
    pub n: u64,
    pub k: u16,
    /// Size of the coded alphabet.
    pub alphabet: u32,
    /// Number of symbols that occur in the sequence.
    pub effective: u32,
    /// Bits per level code; zero for fixed-grid streams.
    pub level_bits: u16,
    pub gamma: u32,
}

impl StreamHeader {
    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.push(self.algorithm.id());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.alphabet.to_le_bytes());
        out.extend_from_slice(&self.effective.to_le_bytes());
        out.extend_from_slice(&self.level_bits.to_le_bytes());
        out.extend_from_slice(&self.gamma.to_le_bytes());
    }

    fn read(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || bytes[..4] != MAGIC {
            return Err(Error::Format("missing MCLC magic".into()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "header truncated: {} of {HEADER_LEN} bytes",
                bytes.len()
            )));
        }
        let mut at = 4;
        let mut take = |len: usize| {
            let field = &bytes[at..at + len];
            at += len;
            field
        };
        let version = u16::from_le_bytes(take(2).try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        let algorithm = Algorithm::from_id(take(1)[0])?;
        Ok(StreamHeader {
            version,
            algorithm,
            n: u64::from_le_bytes(take(8).try_into().unwrap()),
            k: u16::from_le_bytes(take(2).try_into().unwrap()),
            alphabet: u32::from_le_bytes(take(4).try_into().unwrap()),
            effective: u32::from_le_bytes(take(4).try_into().unwrap()),
            level_bits: u16::from_le_bytes(take(2).try_into().unwrap()),
            gamma: u32::from_le_bytes(take(4).try_into().unwrap()),
        })
    }

    fn level_payload_len(&self) -> usize {
        (self.effective as usize * self.level_bits as usize).div_ceil(8)
    }

    /// Bits a decoder needs to learn the effective alphabet size.
    pub fn cardinality_bits(&self) -> u64 {
        match self.algorithm {
            Algorithm::Fixed => 0,
            Algorithm::Adaptive => u64::from(ceil_log2(u64::from(self.alphabet) + 1)),
        }
    }
}

fn pack_bits(codes: &[u64], width: u16) -> Vec<u8> {
    let mut out = vec![0u8; (codes.len() * width as usize).div_ceil(8)];
    let mut pos = 0usize;
    for &code in codes {
        for bit in (0..width).rev() {
            if (code >> bit) & 1 == 1 {
                out[pos / 8] |= 0x80 >> (pos % 8);
            }
            pos += 1;
        }
    }
    out
}

fn unpack_bits(bytes: &[u8], count: usize, width: u16) -> Vec<u64> {
    let mut pos = 0usize;
    (0..count)
        .map(|_| {
            let mut code = 0u64;
            for _ in 0..width {
                let bit = (bytes[pos / 8] >> (7 - pos % 8)) & 1;
                code = (code << 1) | u64::from(bit);
                pos += 1;
            }
            code
        })
        .collect()
}

/// A parsed or freshly encoded container.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedStream {
    pub header: StreamHeader,
    /// Level codes of the effective symbols, in symbol order.
    pub level_codes: Vec<u64>,
    pub payload: Bitstream,
}

impl EncodedStream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.bytes().len() + 64);
        self.header.write(&mut out);
        out.extend(pack_bits(&self.level_codes, self.header.level_bits));
        out.extend_from_slice(self.payload.bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = StreamHeader::read(bytes)?;
        if header.effective > header.alphabet {
            return Err(Error::Decode(format!(
                "effective alphabet {} exceeds alphabet {}",
                header.effective, header.alphabet
            )));
        }
        if header.level_bits > 48 {
            return Err(Error::Decode(format!("level width {} too large", header.level_bits)));
        }
        if header.algorithm == Algorithm::Fixed && header.level_bits != 0 {
            return Err(Error::Decode("fixed-grid stream with level codes".into()));
        }
        let levels_end = HEADER_LEN + header.level_payload_len();
        if bytes.len() < levels_end {
            return Err(Error::Decode("level codes truncated".into()));
        }
        let level_codes = unpack_bits(
            &bytes[HEADER_LEN..levels_end],
            if header.level_bits == 0 { 0 } else { header.effective as usize },
            header.level_bits,
        );
        Ok(EncodedStream {
            header,
            level_codes,
            payload: Bitstream::from_bytes(bytes[levels_end..].to_vec()),
        })
    }

    /// Bits charged to the rate: CTW payload, level codes, and the effective
    /// alphabet size. The fixed preamble and byte padding are excluded.
    pub fn net_bits(&self) -> u64 {
        self.payload.len_bits()
            + self.level_codes.len() as u64 * u64::from(self.header.level_bits)
            + self.header.cardinality_bits()
    }

    /// Size of the whole container in bits.
    pub fn gross_bits(&self) -> u64 {
        8 * (HEADER_LEN + self.header.level_payload_len() + self.payload.bytes().len()) as u64
    }
}

/// Write the symbols of a fixed-grid run. `grid` must be a standard grid.
pub fn pack_fixed(grid: &ReproductionGrid, k: usize, z: &[Symbol]) -> Result<EncodedStream> {
    let gamma = grid
        .gamma()
        .ok_or_else(|| Error::param("grid", "only standard grids can be stored"))?;
    let alphabet = grid.len() as u32;
    let mut used = vec![false; grid.len()];
    for &s in z {
        *used
            .get_mut(s as usize)
            .ok_or_else(|| Error::param("z", format!("symbol {s} outside the grid")))? = true;
    }
    let header = StreamHeader {
        version: FORMAT_VERSION,
        algorithm: Algorithm::Fixed,
        n: z.len() as u64,
        k: depth_field(k)?,
        alphabet,
        effective: used.iter().filter(|&&u| u).count() as u32,
        level_bits: 0,
        gamma,
    };
    Ok(EncodedStream {
        header,
        level_codes: Vec::new(),
        payload: ctw::encode(z, k, alphabet)?,
    })
}

/// Write the symbols and levels of an adaptive run.
pub fn pack_adaptive(codebook: &AdaptiveCodebook, k: usize, z: &[Symbol]) -> Result<EncodedStream> {
    let alphabet = codebook.levels.len() as u32;
    let mut used = vec![false; codebook.levels.len()];
    for &s in z {
        *used
            .get_mut(s as usize)
            .ok_or_else(|| Error::param("z", format!("symbol {s} outside the alphabet")))? = true;
    }
    let mut level_codes = Vec::new();
    for (s, level) in codebook.levels.iter().enumerate() {
        match (used[s], level) {
            (true, Some(v)) => level_codes.push(codebook.quantizer.code(*v)),
            (false, None) => {}
            _ => {
                return Err(Error::param(
                    "codebook",
                    format!("symbol {s} level does not match its occupancy"),
                ))
            }
        }
    }
    let header = StreamHeader {
        version: FORMAT_VERSION,
        algorithm: Algorithm::Adaptive,
        n: z.len() as u64,
        k: depth_field(k)?,
        alphabet,
        effective: level_codes.len() as u32,
        level_bits: codebook.quantizer.bits() as u16,
        gamma: codebook.quantizer.gamma(),
    };
    Ok(EncodedStream {
        header,
        level_codes,
        payload: ctw::encode(z, k, alphabet)?,
    })
}

fn depth_field(k: usize) -> Result<u16> {
    u16::try_from(k).map_err(|_| Error::param("k", format!("{k} does not fit the header")))
}

/// Everything a decoder recovers from a stream.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodedStream {
    pub symbols: Vec<Symbol>,
    /// Level of each symbol; `None` for unused adaptive symbols.
    pub levels: Vec<Option<f64>>,
    pub reconstruction: Vec<f64>,
}

pub fn decode_symbols(stream: &EncodedStream) -> Result<DecodedStream> {
    let h = &stream.header;
    let n = usize::try_from(h.n).map_err(|_| Error::Decode("length overflows".into()))?;
    let levels: Vec<Option<f64>>;
    let symbols;
    match h.algorithm {
        Algorithm::Fixed => {
            if h.gamma == 0 || h.gamma > 1 << 15 {
                return Err(Error::Decode(format!("grid parameter {} out of range", h.gamma)));
            }
            let grid = ReproductionGrid::with_gamma(h.gamma);
            if grid.len() as u32 != h.alphabet {
                return Err(Error::Decode(format!(
                    "alphabet {} does not match the grid of size {}",
                    h.alphabet,
                    grid.len()
                )));
            }
            symbols = ctw::decode(&stream.payload, n, h.k as usize, h.alphabet)?;
            levels = grid.levels().iter().map(|&v| Some(v)).collect();
        }
        Algorithm::Adaptive => {
            let quantizer = LevelQuantizer::new(h.gamma, u32::from(h.level_bits))
                .map_err(|e| Error::Decode(e.to_string()))?;
            symbols = ctw::decode(&stream.payload, n, h.k as usize, h.alphabet)?;
            let mut used = vec![false; h.alphabet as usize];
            for &s in &symbols {
                used[s as usize] = true;
            }
            let occupied = used.iter().filter(|&&u| u).count();
            if occupied != stream.level_codes.len() {
                return Err(Error::Decode(format!(
                    "{} level codes for {occupied} occupied symbols",
                    stream.level_codes.len()
                )));
            }
            let mut codes = stream.level_codes.iter();
            levels = used
                .iter()
                .map(|&u| {
                    u.then(|| quantizer.level_from_code(*codes.next().unwrap()))
                        .transpose()
                })
                .collect::<Result<_>>()?;
        }
    }
    let reconstruction = symbols
        .iter()
        .map(|&s| levels[s as usize].expect("occupied symbols have levels"))
        .collect();
    Ok(DecodedStream {
        symbols,
        levels,
        reconstruction,
    })
}

/// Decode a stream to its reconstruction.
pub fn decode_stream(stream: &EncodedStream) -> Result<Vec<f64>> {
    Ok(decode_symbols(stream)?.reconstruction)
}

/// Rate in bits per sample, distortion as mean squared error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RDPoint {
    pub rate: f64,
    pub distortion: f64,
    pub snr_db: f64,
}

impl RDPoint {
    pub fn new(rate: f64, distortion: f64, variance: f64) -> Self {
        RDPoint {
            rate,
            distortion,
            snr_db: snr_db(variance, distortion),
        }
    }
}

pub fn snr_db(variance: f64, distortion: f64) -> f64 {
    if distortion == 0.0 {
        f64::INFINITY
    } else {
        10.0 * libm::log10(variance / distortion)
    }
}

/// Measurements taken from a stream and the input it encodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    /// Net rate, distortion, and SNR.
    pub point: RDPoint,
    pub gross_rate: f64,
    pub net_bits: u64,
    pub gross_bits: u64,
    pub effective_alphabet: u32,
}

/// Decode `stream` and measure it against `x`.
pub fn assess(x: &SignalBuffer, stream: &EncodedStream) -> Result<StreamReport> {
    let decoded = decode_symbols(stream)?;
    let d = distortion(x.samples(), &decoded.reconstruction)?;
    let n = x.len() as f64;
    Ok(StreamReport {
        point: RDPoint::new(stream.net_bits() as f64 / n, d, x.empirical_variance()),
        gross_rate: stream.gross_bits() as f64 / n,
        net_bits: stream.net_bits(),
        gross_bits: stream.gross_bits(),
        effective_alphabet: stream.header.effective,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum EncoderConfig {
    Fixed(AnnealConfig),
    Adaptive(AdaptiveConfig),
}

impl EncoderConfig {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            EncoderConfig::Fixed(_) => Algorithm::Fixed,
            EncoderConfig::Adaptive(_) => Algorithm::Adaptive,
        }
    }

    pub fn anneal(&self) -> &AnnealConfig {
        match self {
            EncoderConfig::Fixed(c) => c,
            EncoderConfig::Adaptive(c) => &c.anneal,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Encoding {
    pub stream: EncodedStream,
    pub report: StreamReport,
    /// Final annealing energy, recomputed from the output symbols.
    pub energy: f64,
    pub symbols: Vec<Symbol>,
}

/// Anneal `x` with the selected algorithm and pack the result.
pub fn encode_stream(x: &SignalBuffer, config: &EncoderConfig) -> Result<(EncodedStream, StreamReport)> {
    let encoding = encode(x, config)?;
    Ok((encoding.stream, encoding.report))
}

/// Like [`encode_stream`], also returning the symbols and final energy.
pub fn encode(x: &SignalBuffer, config: &EncoderConfig) -> Result<Encoding> {
    let (stream, symbols, final_energy) = match config {
        EncoderConfig::Fixed(anneal) => {
            anneal.validate()?;
            let grid = ReproductionGrid::for_length(x.len())?;
            let mut state = GibbsState::quantized(x, &grid, anneal.k, anneal.beta)?;
            state.anneal(anneal, &mut seeded_rng(anneal.seed));
            let z = state.into_symbols();
            let e = energy(x.samples(), &grid, &z, anneal.k, anneal.beta)?;
            (pack_fixed(&grid, anneal.k, &z)?, z, e)
        }
        EncoderConfig::Adaptive(adaptive) => {
            let mut state = AdaptiveState::initialized(x, adaptive)?;
            state.anneal(&adaptive.anneal, &mut seeded_rng(adaptive.anneal.seed));
            let codebook = state.codebook();
            let z = state.into_symbols();
            let e = adaptive_energy(x.samples(), &z, adaptive)?;
            (pack_adaptive(&codebook, adaptive.anneal.k, &z)?, z, e)
        }
    };
    let report = assess(x, &stream)?;
    Ok(Encoding {
        stream,
        report,
        energy: final_energy,
        symbols,
    })
}
