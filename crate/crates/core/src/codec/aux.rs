//! Auxiliary information and its two bit formats.
//!
//! Both formats share a 42-bit header and end with a CRC-16 over every
//! preceding bit:
//!
//! ```text
//! [s_aux:10][codec_id:4][M-1:6][H:8][delta:12][scheme:2] layer1 layer2 [pad] [crc:16]
//! ```
//!
//! `s_aux` counts every bit including padding and checksum. Zero padding may
//! be inserted before the checksum so that the stream fills a prescribed
//! length; decoders skip it.
//!
//! Codec 0 (fixed widths), per layer:
//!
//! ```text
//! [thresholds:(M-1)x16][edge:1][n_end:20]
//! [flag bytes:12][flag RLE bytes]          one flag per (t, b), b in -255..=255
//! per flagged line: [left?:1][left+14:5]? [right?:1][right+14:5]?
//! [s_clm:18][location map bits]            first layer only
//! ```
//!
//! Codec 1 (variable widths; `g(n)` is the Elias-gamma code of `n >= 1`,
//! `sg(v) = g(zz(v)+1)` with `zz` the zigzag map, and `sz(n)` is a 5-bit
//! bit length followed by `n` without its leading one):
//!
//! ```text
//! g(s0+1) g(s1-s0+1) ...                   first layer thresholds
//! sg(s0-s0') sg(s1-s1') ...                second layer, against the first
//! [edge:1] sz(n_end)
//! per class: g(count+1), then per line
//!     sg(b) for the first line, g(b-prev) after it
//!     [kind:2] 0 left only, 1 right only, 2 both
//!     sg(left-L) if left, sg(right-R) if right
//! sz(s_clm) [location map bits]            first layer only
//! ```
//!
//! `L` and `R` are the last left and right bins of the class, starting at
//! zero. C-PEE streams carry no line section in either codec. The flag RLE is [`crate::bits::rle_encode`].

use crate::bits::{crc16, rle_decode, rle_encode, unzigzag, zigzag, BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::histograms::MAX_CLASSES;
use crate::optimizer::{LineBins, SEARCH_RANGE};
use crate::predictors::PredictorPair;

/// Width of the leading length field.
pub const S_AUX_BITS: u32 = 10;
/// Largest stream the length field can describe.
pub const MAX_AUX_BITS: usize = (1 << S_AUX_BITS) - 1;
/// Header bits shared by both codecs.
pub const HEADER_BITS: usize = 10 + 4 + 6 + 8 + 12 + 2;
pub const CHECKSUM_BITS: usize = 16;

pub const CODEC_FIXED: u8 = 0;
pub const CODEC_COMPACT: u8 = 1;

const B_RANGE: i32 = 255;
const FLAGS_PER_CLASS: usize = 2 * B_RANGE as usize + 1;
const N_END_BITS: u32 = 20;
const S_CLM_BITS: u32 = 18;
const THRESHOLD_BITS: u32 = 16;
const OFFSET_BITS: u32 = 5;

/// Embedding scheme recorded in the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    /// Line-wise expansion with the given predictor pair. The MHM baseline
    /// is recorded as [`PredictorPair::RhombusRhombus`].
    Pair(PredictorPair),
    /// Fixed bins -1 and 0 on the rhombus error.
    Cpee,
}

impl SchemeId {
    fn code(self) -> u64 {
        match self {
            SchemeId::Pair(PredictorPair::RhombusMed) => 0,
            SchemeId::Pair(PredictorPair::RhombusNonlinear) => 1,
            SchemeId::Pair(PredictorPair::RhombusRhombus) => 2,
            SchemeId::Cpee => 3,
        }
    }

    fn from_code(code: u64) -> Self {
        match code {
            0 => SchemeId::Pair(PredictorPair::RhombusMed),
            1 => SchemeId::Pair(PredictorPair::RhombusNonlinear),
            2 => SchemeId::Pair(PredictorPair::RhombusRhombus),
            _ => SchemeId::Cpee,
        }
    }
}

/// Side information of one layer.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LayerAux {
    /// Non-decreasing complexity thresholds, `M - 1` of them.
    pub thresholds: Vec<u32>,
    /// Edge orientation bit of the nonlinear predictor.
    pub first_dominates: bool,
    /// One past the last processed cell index.
    pub n_end: usize,
    /// Lines that expand on at least one side, ascending in `(t, b)`.
    pub lines: Vec<LineBins>,
}

/// Everything the extractor needs besides the stego pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxInfo {
    pub scheme: SchemeId,
    /// Number of complexity classes `M`.
    pub classes: usize,
    /// Minimum line mass `H`.
    pub min_line_mass: u32,
    /// Capacity slack used by the optimizer.
    pub delta: usize,
    pub layers: [LayerAux; 2],
    /// Compressed location map.
    pub location_map: Vec<bool>,
}

impl AuxInfo {
    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Serialization(msg));
        if !(1..=MAX_CLASSES).contains(&self.classes) {
            return fail(format!("class count {} outside 1..={MAX_CLASSES}", self.classes));
        }
        for (index, layer) in self.layers.iter().enumerate() {
            if layer.thresholds.len() != self.classes - 1 {
                return fail(format!(
                    "layer {} has {} thresholds for {} classes",
                    index + 1,
                    layer.thresholds.len(),
                    self.classes
                ));
            }
            if layer.thresholds.windows(2).any(|w| w[0] > w[1]) {
                return fail(format!("layer {} thresholds decrease", index + 1));
            }
            if self.scheme == SchemeId::Cpee && !layer.lines.is_empty() {
                return fail("C-PEE stream cannot carry lines".into());
            }
            let mut prev: Option<(usize, i32)> = None;
            for line in &layer.lines {
                if line.t >= self.classes || !(-B_RANGE..=B_RANGE).contains(&line.b) {
                    return fail(format!("line ({}, {}) outside the histogram grid", line.t, line.b));
                }
                if prev.is_some_and(|p| p >= (line.t, line.b)) {
                    return fail("lines not strictly ascending in (t, b)".into());
                }
                prev = Some((line.t, line.b));
                check_bins(line).map_err(Error::Serialization)?;
            }
        }
        Ok(())
    }
}

fn check_bins(line: &LineBins) -> std::result::Result<(), String> {
    for side in [line.left, line.right].into_iter().flatten() {
        if !SEARCH_RANGE.contains(&side) {
            return Err(format!("bin {side} on line ({}, {}) outside {SEARCH_RANGE:?}", line.t, line.b));
        }
    }
    match (line.left, line.right) {
        (None, None) => Err(format!("line ({}, {}) expands nothing", line.t, line.b)),
        (Some(l), Some(r)) if l >= r => Err(format!("line ({}, {}) has left {l} >= right {r}", line.t, line.b)),
        _ => Ok(()),
    }
}

/// Serializes with the given codec, zero-padded up to `min_len` bits.
pub fn serialize_aux_with(aux: &AuxInfo, codec_id: u8, min_len: usize) -> Result<Vec<bool>> {
    let bits = encode(aux, codec_id, min_len)?;
    if bits.len() > MAX_AUX_BITS {
        return Err(Error::AuxOverflow { bits: bits.len(), limit: MAX_AUX_BITS });
    }
    Ok(bits)
}

/// Length of the shorter encoding, without the length-field limit.
pub fn encoded_len(aux: &AuxInfo) -> Result<usize> {
    let fixed = encode(aux, CODEC_FIXED, 0).map(|b| b.len());
    let compact = encode(aux, CODEC_COMPACT, 0).map(|b| b.len());
    match (fixed, compact) {
        (Ok(f), Ok(c)) => Ok(f.min(c)),
        (Ok(f), Err(_)) => Ok(f),
        (Err(_), c) => c,
    }
}

fn encode(aux: &AuxInfo, codec_id: u8, min_len: usize) -> Result<Vec<bool>> {
    aux.validate()?;
    let mut w = BitWriter::new();
    w.push(0, S_AUX_BITS, "s_aux")?;
    w.push(u64::from(codec_id), 4, "codec id")?;
    w.push(aux.classes as u64 - 1, 6, "class count")?;
    w.push(u64::from(aux.min_line_mass), 8, "minimum line mass")?;
    w.push(aux.delta as u64, 12, "delta")?;
    w.push(aux.scheme.code(), 2, "scheme")?;
    for (index, layer) in aux.layers.iter().enumerate() {
        let clm = (index == 0).then_some(aux.location_map.as_slice());
        match codec_id {
            CODEC_FIXED => write_fixed_layer(&mut w, aux, layer, clm)?,
            CODEC_COMPACT => {
                let reference = (index == 1).then_some(aux.layers[0].thresholds.as_slice());
                write_compact_layer(&mut w, aux, layer, clm, reference)?
            }
            other => return Err(Error::Serialization(format!("unknown codec id {other}"))),
        }
    }
    let mut bits = w.into_bits();
    let target = min_len.saturating_sub(CHECKSUM_BITS);
    if bits.len() < target {
        bits.resize(target, false);
    }
    let total = bits.len() + CHECKSUM_BITS;
    for k in 0..S_AUX_BITS as usize {
        // an oversized total is rejected by the caller; keep the low bits
        bits[k] = (total >> (S_AUX_BITS as usize - 1 - k)) & 1 == 1;
    }
    let crc = crc16(&bits);
    for shift in (0..16).rev() {
        bits.push((crc >> shift) & 1 == 1);
    }
    Ok(bits)
}

/// Serializes with whichever codec gives the shorter stream.
pub fn serialize_aux(aux: &AuxInfo) -> Result<Vec<bool>> {
    serialize_aux_padded(aux, 0)
}

/// Shorter of the two codecs, zero-padded up to `min_len` bits.
pub fn serialize_aux_padded(aux: &AuxInfo, min_len: usize) -> Result<Vec<bool>> {
    let fixed = serialize_aux_with(aux, CODEC_FIXED, min_len);
    let compact = serialize_aux_with(aux, CODEC_COMPACT, min_len);
    match (fixed, compact) {
        (Ok(f), Ok(c)) => Ok(if f.len() <= c.len() { f } else { c }),
        (Ok(f), Err(_)) => Ok(f),
        (Err(_), Ok(c)) => Ok(c),
        (Err(_), Err(e)) => Err(e),
    }
}

/// Reads the leading length field.
pub fn read_s_aux(bits: &[bool]) -> Result<usize> {
    Ok(BitReader::new(bits).read(S_AUX_BITS, "s_aux")? as usize)
}

/// Parses a stream of exactly `s_aux` bits and verifies its checksum.
pub fn deserialize_aux(bits: &[bool]) -> Result<AuxInfo> {
    let total = read_s_aux(bits)?;
    if total < HEADER_BITS + CHECKSUM_BITS || total > bits.len() {
        return Err(Error::Deserialization {
            offset: 0,
            reason: format!("s_aux = {total} inconsistent with a {}-bit stream", bits.len()),
        });
    }
    let bits = &bits[..total];
    let body = &bits[..total - CHECKSUM_BITS];
    let stored = BitReader::new(&bits[total - CHECKSUM_BITS..]).read(16, "checksum")? as u16;
    if crc16(body) != stored {
        return Err(Error::Corruption("auxiliary checksum mismatch".into()));
    }
    let mut r = BitReader::new(body);
    r.read(S_AUX_BITS, "s_aux")?;
    let codec_id = r.read(4, "codec id")? as u8;
    let classes = r.read(6, "class count")? as usize + 1;
    let min_line_mass = r.read(8, "minimum line mass")? as u32;
    let delta = r.read(12, "delta")? as usize;
    let scheme = SchemeId::from_code(r.read(2, "scheme")?);
    let mut location_map = Vec::new();
    let mut layers: [LayerAux; 2] = Default::default();
    for index in 0..2 {
        let clm = (index == 0).then_some(&mut location_map);
        let reference = (index == 1).then(|| layers[0].thresholds.clone());
        layers[index] = match codec_id {
            CODEC_FIXED => read_fixed_layer(&mut r, scheme, classes, clm)?,
            CODEC_COMPACT => read_compact_layer(&mut r, scheme, classes, clm, reference.as_deref())?,
            other => {
                return Err(Error::Deserialization {
                    offset: S_AUX_BITS as usize,
                    reason: format!("unknown codec id {other}"),
                })
            }
        };
    }
    if r.read_bits(r.remaining(), "padding")?.iter().any(|&b| b) {
        return Err(Error::Corruption("nonzero auxiliary padding".into()));
    }
    let aux = AuxInfo { scheme, classes, min_line_mass, delta, layers, location_map };
    aux.validate().map_err(|e| Error::Deserialization { offset: 0, reason: e.to_string() })?;
    Ok(aux)
}

fn gamma_len(n: u64) -> usize {
    2 * (63 - n.leading_zeros() as usize) + 1
}

/// Rough compact-codec cost of one active line, used by the planner before
/// the neighbouring lines are known. Bins are priced as if coded against a
/// zero reference.
pub fn line_cost_bits(left: Option<i32>, right: Option<i32>) -> usize {
    let side = |v: i32| gamma_len(zigzag(i64::from(v)) + 1);
    1 + 2 + match (left, right) {
        (Some(l), Some(r)) => side(l) + gamma_len((r - l).max(1) as u64),
        (Some(v), None) | (None, Some(v)) => side(v),
        (None, None) => 0,
    }
}

fn flag_index(t: usize, b: i32) -> usize {
    t * FLAGS_PER_CLASS + (b + B_RANGE) as usize
}

fn write_fixed_layer(
    w: &mut BitWriter,
    aux: &AuxInfo,
    layer: &LayerAux,
    clm: Option<&[bool]>,
) -> Result<()> {
    for &s in &layer.thresholds {
        w.push(u64::from(s), THRESHOLD_BITS, "threshold")?;
    }
    w.push_bit(layer.first_dominates);
    w.push(layer.n_end as u64, N_END_BITS, "n_end")?;
    if aux.scheme != SchemeId::Cpee {
        let mut flags = vec![false; aux.classes * FLAGS_PER_CLASS];
        for line in &layer.lines {
            flags[flag_index(line.t, line.b)] = true;
        }
        let rle = rle_encode(&flags);
        w.push(rle.len() as u64, 12, "flag RLE length")?;
        for byte in rle {
            w.push(u64::from(byte), 8, "flag RLE byte")?;
        }
        for line in &layer.lines {
            for side in [line.left, line.right] {
                w.push_bit(side.is_some());
                if let Some(v) = side {
                    w.push((v - SEARCH_RANGE.start()) as u64, OFFSET_BITS, "bin offset")?;
                }
            }
        }
    }
    if let Some(clm) = clm {
        w.push(clm.len() as u64, S_CLM_BITS, "s_clm")?;
        w.push_bits(clm);
    }
    Ok(())
}

fn read_fixed_layer(
    r: &mut BitReader,
    scheme: SchemeId,
    classes: usize,
    clm: Option<&mut Vec<bool>>,
) -> Result<LayerAux> {
    let mut layer = LayerAux::default();
    for _ in 1..classes {
        layer.thresholds.push(r.read(THRESHOLD_BITS, "threshold")? as u32);
    }
    layer.first_dominates = r.read_bit("edge orientation")?;
    layer.n_end = r.read(N_END_BITS, "n_end")? as usize;
    if scheme != SchemeId::Cpee {
        let offset = r.position();
        let len = r.read(12, "flag RLE length")? as usize;
        let mut bytes = Vec::with_capacity(len);
        for _ in 0..len {
            bytes.push(r.read(8, "flag RLE byte")? as u8);
        }
        let flags = rle_decode(&bytes).map_err(|e| match e {
            Error::Deserialization { offset: o, reason } => Error::Deserialization { offset: offset + 12 + o, reason },
            other => other,
        })?;
        if flags.len() != classes * FLAGS_PER_CLASS {
            return Err(Error::Deserialization {
                offset,
                reason: format!("{} flags for {classes} classes", flags.len()),
            });
        }
        for (index, _) in flags.iter().enumerate().filter(|(_, &f)| f) {
            let t = index / FLAGS_PER_CLASS;
            let b = (index % FLAGS_PER_CLASS) as i32 - B_RANGE;
            let mut sides = [None, None];
            for side in &mut sides {
                if r.read_bit("bin presence")? {
                    *side = Some(r.read(OFFSET_BITS, "bin offset")? as i32 + SEARCH_RANGE.start());
                }
            }
            layer.lines.push(checked_line(r, t, b, sides[0], sides[1])?);
        }
    }
    if let Some(clm) = clm {
        let len = r.read(S_CLM_BITS, "s_clm")? as usize;
        clm.extend_from_slice(r.read_bits(len, "location map")?);
    }
    Ok(layer)
}

fn checked_line(r: &BitReader, t: usize, b: i32, left: Option<i32>, right: Option<i32>) -> Result<LineBins> {
    let line = LineBins { t, b, left, right };
    check_bins(&line).map_err(|reason| Error::Deserialization { offset: r.position(), reason })?;
    Ok(line)
}

/// Length-prefixed unsigned integer: 5 bits of bit length, then the value
/// without its leading one.
fn push_sized(w: &mut BitWriter, value: u64, field: &str) -> Result<()> {
    let width = 64 - value.leading_zeros();
    if width > 31 {
        return Err(Error::Serialization(format!("{field} = {value} does not fit")));
    }
    w.push(u64::from(width), 5, field)?;
    if width > 1 {
        w.push(value & ((1 << (width - 1)) - 1), width - 1, field)?;
    }
    Ok(())
}

fn read_sized(r: &mut BitReader, field: &str) -> Result<u64> {
    let width = r.read(5, field)? as u32;
    Ok(match width {
        0 => 0,
        w => (1 << (w - 1)) | r.read(w - 1, field)?,
    })
}

fn push_signed(w: &mut BitWriter, value: i64, field: &str) -> Result<()> {
    w.push_gamma(zigzag(value) + 1, field)
}

fn read_signed(r: &mut BitReader, field: &str, limit: i64) -> Result<i64> {
    let offset = r.position();
    let value = unzigzag(r.read_gamma(field)? - 1);
    if value.abs() > limit {
        return Err(Error::Deserialization { offset, reason: format!("{field} = {value} out of range") });
    }
    Ok(value)
}

fn write_compact_layer(
    w: &mut BitWriter,
    aux: &AuxInfo,
    layer: &LayerAux,
    clm: Option<&[bool]>,
    reference: Option<&[u32]>,
) -> Result<()> {
    match reference {
        // the second layer's quantiles track the first layer's closely
        Some(prev) => {
            for (&s, &p) in layer.thresholds.iter().zip(prev) {
                push_signed(w, i64::from(s) - i64::from(p), "threshold")?;
            }
        }
        None => {
            let mut prev = 0u32;
            for &s in &layer.thresholds {
                w.push_gamma(u64::from(s - prev) + 1, "threshold")?;
                prev = s;
            }
        }
    }
    w.push_bit(layer.first_dominates);
    push_sized(w, layer.n_end as u64, "n_end")?;
    if aux.scheme != SchemeId::Cpee {
        for t in 0..aux.classes {
            let lines: Vec<_> = layer.lines.iter().filter(|l| l.t == t).collect();
            w.push_gamma(lines.len() as u64 + 1, "line count")?;
            let (mut prev_b, mut ref_l, mut ref_r) = (None, 0, 0);
            for line in lines {
                match prev_b {
                    None => push_signed(w, i64::from(line.b), "intercept")?,
                    Some(p) => w.push_gamma((line.b - p) as u64, "intercept step")?,
                }
                prev_b = Some(line.b);
                let kind = match (line.left, line.right) {
                    (Some(_), None) => 0,
                    (None, Some(_)) => 1,
                    (Some(_), Some(_)) => 2,
                    (None, None) => unreachable!("validated"),
                };
                w.push(kind, 2, "bin kind")?;
                if let Some(l) = line.left {
                    push_signed(w, i64::from(l - ref_l), "left bin")?;
                    ref_l = l;
                }
                if let Some(r) = line.right {
                    push_signed(w, i64::from(r - ref_r), "right bin")?;
                    ref_r = r;
                }
            }
        }
    }
    if let Some(clm) = clm {
        push_sized(w, clm.len() as u64, "s_clm")?;
        w.push_bits(clm);
    }
    Ok(())
}

fn read_compact_layer(
    r: &mut BitReader,
    scheme: SchemeId,
    classes: usize,
    clm: Option<&mut Vec<bool>>,
    reference: Option<&[u32]>,
) -> Result<LayerAux> {
    let mut layer = LayerAux::default();
    let threshold_error = |r: &BitReader| Error::Deserialization {
        offset: r.position(),
        reason: "threshold out of range".into(),
    };
    match reference {
        Some(prev) => {
            for &p in prev {
                let s = i64::from(p) + read_signed(r, "threshold", 1 << 32)?;
                layer.thresholds.push(u32::try_from(s).map_err(|_| threshold_error(r))?);
            }
        }
        None => {
            let mut prev = 0u64;
            for _ in 1..classes {
                prev += r.read_gamma("threshold")? - 1;
                layer.thresholds.push(u32::try_from(prev).map_err(|_| threshold_error(r))?);
            }
        }
    }
    layer.first_dominates = r.read_bit("edge orientation")?;
    layer.n_end = read_sized(r, "n_end")? as usize;
    if scheme != SchemeId::Cpee {
        let bound = i64::from(SEARCH_RANGE.end() - SEARCH_RANGE.start());
        for t in 0..classes {
            let offset = r.position();
            let count = r.read_gamma("line count")? - 1;
            if count > FLAGS_PER_CLASS as u64 {
                return Err(Error::Deserialization { offset, reason: format!("{count} lines in class {t}") });
            }
            let (mut prev_b, mut ref_l, mut ref_r): (Option<i32>, i32, i32) = (None, 0, 0);
            for _ in 0..count {
                let b = match prev_b {
                    None => read_signed(r, "intercept", i64::from(B_RANGE))? as i32,
                    Some(p) => {
                        let offset = r.position();
                        let step = r.read_gamma("intercept step")?;
                        if step > 2 * B_RANGE as u64 {
                            return Err(Error::Deserialization { offset, reason: "intercept step out of range".into() });
                        }
                        p + step as i32
                    }
                };
                prev_b = Some(b);
                let kind = r.read(2, "bin kind")?;
                if kind == 3 {
                    return Err(Error::Deserialization {
                        offset: r.position() - 2,
                        reason: "bin kind 3 is unassigned".into(),
                    });
                }
                let (mut left, mut right) = (None, None);
                if kind != 1 {
                    ref_l += read_signed(r, "left bin", bound)? as i32;
                    left = Some(ref_l);
                }
                if kind != 0 {
                    ref_r += read_signed(r, "right bin", bound)? as i32;
                    right = Some(ref_r);
                }
                if !(-B_RANGE..=B_RANGE).contains(&b) {
                    return Err(Error::Deserialization {
                        offset: r.position(),
                        reason: format!("intercept {b} outside the histogram grid"),
                    });
                }
                layer.lines.push(checked_line(r, t, b, left, right)?);
            }
        }
    }
    if let Some(clm) = clm {
        let len = read_sized(r, "s_clm")? as usize;
        clm.extend_from_slice(r.read_bits(len, "location map")?);
    }
    Ok(layer)
}
