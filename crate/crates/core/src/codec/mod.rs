//! Embedding and extraction pipelines for the three schemes.
//!
//! Embedding preprocesses saturated pixels, then fills the first layer with
//! the first half of the payload (odd bit included) and the second layer
//! with the rest followed by the original LSBs of the auxiliary positions.
//! The serialized [`AuxInfo`] finally overwrites those LSBs, starting with
//! the bottom row. Extraction reverses every step.

pub mod aux;
mod layer;

use crate::error::{Error, Result};
use crate::histograms::{DEFAULT_CLASSES, DEFAULT_MIN_LINE_MASS, MAX_CLASSES};
use crate::image::GrayImage;
use crate::optimizer::{Objective, DEFAULT_DELTA};
use crate::pixels::{
    aux_positions, partition_dims, postprocess_saturation, preprocess_saturation, reserved_rows_for,
    LocationMap, RESERVED_ROWS,
};
use crate::predictors::PredictorPair;

pub use aux::{deserialize_aux, serialize_aux, AuxInfo, LayerAux, SchemeId};
pub use layer::PassStats;

use layer::{Analysis, LayerModel, PlanParams};

/// Which embedding scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Fixed expansion bins -1 and 0 on the rhombus error.
    Cpee,
    /// Per-class 1D histograms of the rhombus error with optimized bins.
    Mhm,
    /// Per-class 2D double-error histograms with optimized bins per line.
    Dpeh,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Cpee, Scheme::Mhm, Scheme::Dpeh];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Cpee => "cpee",
            Scheme::Mhm => "mhm",
            Scheme::Dpeh => "dpeh",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cpee" => Ok(Scheme::Cpee),
            "mhm" => Ok(Scheme::Mhm),
            "dpeh" => Ok(Scheme::Dpeh),
            other => Err(Error::Argument(format!("unknown scheme {other:?} (cpee, mhm, dpeh)"))),
        }
    }
}

/// Default penalty per auxiliary bit of an expanding line.
pub const DEFAULT_AUX_COST: u64 = 4;

/// Escalation stops once the aux cost exceeds this.
pub const MAX_AUX_COST: u64 = 1 << 12;

/// Tunables of the optimized schemes. C-PEE ignores all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbedConfig {
    /// Complexity classes `M`, 1..=64.
    pub classes: usize,
    /// Lines lighter than this never expand; at most 255.
    pub min_line_mass: u32,
    /// Capacity slack of the optimizer table; at most 4095.
    pub delta: usize,
    /// Second predictor of the dual-predictor scheme.
    pub pair: PredictorPair,
    pub objective: Objective,
    /// Distortion charged per auxiliary bit an expanding line adds, in
    /// half-units. Zero plans bins on distortion alone.
    pub aux_cost: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            classes: DEFAULT_CLASSES,
            min_line_mass: DEFAULT_MIN_LINE_MASS,
            delta: DEFAULT_DELTA,
            pair: PredictorPair::RhombusNonlinear,
            objective: Objective::TotalDistortion,
            aux_cost: DEFAULT_AUX_COST,
        }
    }
}

impl EmbedConfig {
    fn validate(&self) -> Result<()> {
        if !(1..=MAX_CLASSES).contains(&self.classes) {
            return Err(Error::Argument(format!("class count {} outside 1..={MAX_CLASSES}", self.classes)));
        }
        if self.min_line_mass > 255 {
            return Err(Error::Argument(format!("minimum line mass {} above 255", self.min_line_mass)));
        }
        if self.delta > 4095 {
            return Err(Error::Argument(format!("delta {} above 4095", self.delta)));
        }
        Ok(())
    }
}

/// Per-layer embedding figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LayerReport {
    pub cells: usize,
    pub pass: PassStats,
    /// Capacity the optimizer planned for.
    pub ec_star: usize,
    /// Twice the planned distortion.
    pub ed2_star: u64,
    /// Extra planning rounds caused by feature drift.
    pub replans: usize,
}

/// Summary of an embedding run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedReport {
    pub scheme: Scheme,
    pub payload_bits: usize,
    pub layers: [LayerReport; 2],
    /// Length of the serialized auxiliary stream (and of the LSB backup).
    pub aux_bits: usize,
    pub reserved_rows: usize,
    /// Aux cost the plan was made with, after any escalation.
    pub aux_cost: u64,
    /// Saturated pixels recorded in the location map.
    pub saturated: usize,
}

impl EmbedReport {
    /// Bits carried by expandable pixels: payload plus LSB backup.
    pub fn realized_ec(&self) -> usize {
        self.layers.iter().map(|l| l.pass.bits).sum()
    }

    /// Planned distortion summed over both layers.
    pub fn ed_star(&self) -> f64 {
        self.layers.iter().map(|l| l.ed2_star as f64).sum::<f64>() / 2.0
    }
}

/// Marked image with its embedding summary.
#[derive(Debug, Clone)]
pub struct Stego {
    pub image: GrayImage,
    pub report: EmbedReport,
}

/// Payload and restored cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub payload: Vec<bool>,
    pub cover: GrayImage,
    pub scheme: SchemeId,
}

/// Embeds with the dual-predictor scheme.
pub fn embed(cover: &GrayImage, payload: &[bool], cfg: &EmbedConfig) -> Result<Stego> {
    embed_scheme(cover, payload, Scheme::Dpeh, cfg)
}

/// Embeds with fixed bins -1 and 0.
pub fn embed_cpee(cover: &GrayImage, payload: &[bool]) -> Result<Stego> {
    embed_scheme(cover, payload, Scheme::Cpee, &EmbedConfig::default())
}

/// Embeds with optimized bins on per-class 1D histograms.
pub fn embed_mhm(cover: &GrayImage, payload: &[bool], cfg: &EmbedConfig) -> Result<Stego> {
    embed_scheme(cover, payload, Scheme::Mhm, cfg)
}

fn analysis_for(scheme: Scheme, cfg: &EmbedConfig) -> Analysis {
    match scheme {
        Scheme::Cpee => Analysis::Fixed,
        Scheme::Mhm => Analysis::Single,
        Scheme::Dpeh => Analysis::Double(cfg.pair),
    }
}

fn scheme_id(scheme: Scheme, cfg: &EmbedConfig) -> SchemeId {
    match scheme {
        Scheme::Cpee => SchemeId::Cpee,
        Scheme::Mhm => SchemeId::Pair(PredictorPair::RhombusRhombus),
        Scheme::Dpeh => SchemeId::Pair(cfg.pair),
    }
}

/// Embeds `payload` into `cover` with the chosen scheme.
///
/// When the side information outgrows its budget, the optimized schemes
/// retry with the per-bit aux cost quadrupled until it fits, stops shrinking
/// the stream, or passes [`MAX_AUX_COST`].
pub fn embed_scheme(cover: &GrayImage, payload: &[bool], scheme: Scheme, cfg: &EmbedConfig) -> Result<Stego> {
    cfg.validate()?;
    let mut cfg = *cfg;
    let mut last_overflow = usize::MAX;
    loop {
        match embed_once(cover, payload, scheme, &cfg) {
            Err(Error::AuxOverflow { bits, .. })
                if scheme != Scheme::Cpee && cfg.aux_cost < MAX_AUX_COST && bits < last_overflow =>
            {
                last_overflow = bits;
                cfg.aux_cost = (cfg.aux_cost * 4).max(1);
            }
            other => return other,
        }
    }
}

fn embed_once(cover: &GrayImage, payload: &[bool], scheme: Scheme, cfg: &EmbedConfig) -> Result<Stego> {
    let (width, height) = (cover.width(), cover.height());
    let (pre, clm) = preprocess_saturation(cover);
    let clm_bits = clm.compressed_bits();
    let (first_bits, second_payload) = payload.split_at(payload.len().div_ceil(2));
    let analysis = analysis_for(scheme, cfg);
    let (classes, min_line_mass, delta) = match scheme {
        Scheme::Cpee => (1, 0, 0),
        _ => (cfg.classes, cfg.min_line_mass, cfg.delta),
    };
    let params = PlanParams { classes, min_line_mass, delta, objective: cfg.objective, aux_cost: cfg.aux_cost };

    let mut rows = RESERVED_ROWS;
    'rows: loop {
        let (first, second) = partition_dims(width, height, rows)?;
        let mut after_first = pre.clone();
        let out1 = layer::embed_layer(&mut after_first, &first.cells, first_bits, analysis, params)?;

        let make_aux = |layer2: LayerAux| AuxInfo {
            scheme: scheme_id(scheme, cfg),
            classes,
            min_line_mass,
            delta,
            layers: [out1.aux.clone(), layer2],
            location_map: clm_bits.clone(),
        };
        let lower = if rows > RESERVED_ROWS { (rows - 1) * width + 1 } else { 0 };
        let upper = (rows * width).min(aux::MAX_AUX_BITS);
        // first guess: the second layer costs about as much as the first
        let mut guess = aux::encoded_len(&make_aux(out1.aux.clone()))?.max(lower);

        loop {
            if guess > upper {
                if guess > aux::MAX_AUX_BITS {
                    return Err(Error::AuxOverflow { bits: guess, limit: aux::MAX_AUX_BITS });
                }
                rows = reserved_rows_for(guess, width);
                continue 'rows;
            }
            let backup: Vec<bool> = aux_positions(width, height, guess).map(|i| pre.pixels()[i] & 1 == 1).collect();
            let second_bits: Vec<bool> = second_payload.iter().chain(&backup).copied().collect();
            let mut img = after_first.clone();
            let out2 = layer::embed_layer(&mut img, &second.cells, &second_bits, analysis, params)?;
            let info = make_aux(out2.aux.clone());
            let needed = aux::encoded_len(&info)?;
            if needed > guess {
                guess = needed;
                continue;
            }
            let stream = aux::serialize_aux_padded(&info, guess)?;
            debug_assert_eq!(stream.len(), guess);
            for (index, &bit) in aux_positions(width, height, guess).zip(&stream) {
                let px = &mut img.pixels_mut()[index];
                *px = (*px & !1) | u8::from(bit);
            }
            let report = EmbedReport {
                scheme,
                payload_bits: payload.len(),
                layers: [
                    layer_report(first.len(), &out1),
                    layer_report(second.len(), &out2),
                ],
                aux_bits: guess,
                reserved_rows: rows,
                aux_cost: cfg.aux_cost,
                saturated: clm.entries().len(),
            };
            return Ok(Stego { image: img, report });
        }
    }
}

fn layer_report(cells: usize, out: &layer::LayerOutcome) -> LayerReport {
    LayerReport {
        cells,
        pass: out.stats,
        ec_star: out.ec_star,
        ed2_star: out.ed2_star,
        replans: out.replans,
    }
}

fn read_aux_len(stego: &GrayImage) -> Result<usize> {
    let (width, height) = (stego.width(), stego.height());
    let head: Vec<bool> = aux_positions(width, height, aux::S_AUX_BITS as usize)
        .map(|i| stego.pixels()[i] & 1 == 1)
        .collect();
    if head.len() < aux::S_AUX_BITS as usize {
        return Err(Error::Dimension(format!("{width}x{height} image cannot hold an auxiliary stream")));
    }
    aux::read_s_aux(&head)
}

/// Reads the auxiliary stream from the LSBs of a stego image.
pub fn read_aux(stego: &GrayImage) -> Result<AuxInfo> {
    let total = read_aux_len(stego)?;
    let stream: Vec<bool> = aux_positions(stego.width(), stego.height(), total)
        .map(|i| stego.pixels()[i] & 1 == 1)
        .collect();
    deserialize_aux(&stream).map_err(|e| match e {
        Error::Deserialization { .. } => Error::Corruption(format!("unreadable auxiliary stream: {e}")),
        other => other,
    })
}

/// Recovers the payload and the exact cover from any stego image produced
/// by [`embed_scheme`].
pub fn extract(stego: &GrayImage) -> Result<Extracted> {
    let info = read_aux(stego)?;
    let (width, height) = (stego.width(), stego.height());
    let total = read_aux_len(stego)?;
    let rows = reserved_rows_for(total, width);
    let (first, second) =
        partition_dims(width, height, rows).map_err(|e| Error::Corruption(format!("auxiliary geometry: {e}")))?;

    let mut img = stego.clone();
    let model2 = LayerModel::from_aux(info.scheme, info.classes, &info.layers[1])?;
    let mut second_bits = layer::extract_cells(&mut img, &second.cells, &model2, info.layers[1].n_end)?;
    if second_bits.len() < total {
        return Err(Error::Corruption(format!(
            "second layer yields {} bits, fewer than the {total}-bit LSB backup",
            second_bits.len()
        )));
    }
    let backup = second_bits.split_off(second_bits.len() - total);
    for (index, bit) in aux_positions(width, height, total).zip(backup) {
        let px = &mut img.pixels_mut()[index];
        *px = (*px & !1) | u8::from(bit);
    }
    let model1 = LayerModel::from_aux(info.scheme, info.classes, &info.layers[0])?;
    let mut payload = layer::extract_cells(&mut img, &first.cells, &model1, info.layers[0].n_end)?;
    if payload.len() != second_bits.len() && payload.len() != second_bits.len() + 1 {
        return Err(Error::Corruption(format!(
            "layer payloads of {} and {} bits cannot come from one split",
            payload.len(),
            second_bits.len()
        )));
    }
    payload.extend(second_bits);
    let map = LocationMap::decompress(&info.location_map, width * height)
        .map_err(|e| Error::Corruption(format!("location map: {e}")))?;
    let cover = postprocess_saturation(&img, &map)?;
    Ok(Extracted { payload, cover, scheme: info.scheme })
}

/// [`extract`] restricted to C-PEE stego images.
pub fn extract_cpee(stego: &GrayImage) -> Result<Extracted> {
    expect_scheme(extract(stego)?, |s| s == SchemeId::Cpee)
}

/// [`extract`] restricted to MHM stego images.
pub fn extract_mhm(stego: &GrayImage) -> Result<Extracted> {
    expect_scheme(extract(stego)?, |s| s == SchemeId::Pair(PredictorPair::RhombusRhombus))
}

fn expect_scheme(out: Extracted, ok: impl Fn(SchemeId) -> bool) -> Result<Extracted> {
    if ok(out.scheme) {
        Ok(out)
    } else {
        Err(Error::Argument(format!("stego image was marked with {:?}", out.scheme)))
    }
}

/// Peak signal-to-noise ratio in dB; infinite for identical images.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::Dimension(format!(
            "cannot compare {}x{} with {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let sse: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = u64::from(x.abs_diff(y));
            d * d
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / a.pixels().len() as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

/// Largest payload `scheme` accepts on `cover`, found by bisection on
/// `embed_scheme` success. Expensive: every probe is a full embedding.
pub fn max_payload(cover: &GrayImage, scheme: Scheme, cfg: &EmbedConfig) -> Result<usize> {
    let probe = |n: usize| embed_scheme(cover, &probe_bits(n), scheme, cfg).is_ok();
    if !probe(0) {
        return embed_scheme(cover, &[], scheme, cfg).map(|_| 0);
    }
    let (mut ok, mut bad) = (0usize, 64usize);
    while probe(bad) {
        ok = bad;
        bad *= 2;
        if bad > 1 << 22 {
            return Ok(ok);
        }
    }
    while bad - ok > 1 {
        let mid = ok + (bad - ok) / 2;
        if probe(mid) {
            ok = mid;
        } else {
            bad = mid;
        }
    }
    Ok(ok)
}

/// Fixed bit pattern with balanced ones and zeros.
fn probe_bits(n: usize) -> Vec<bool> {
    (0..n).map(|i| (i.wrapping_mul(0x9e37_79b9) >> 13) & 1 == 1).collect()
}
