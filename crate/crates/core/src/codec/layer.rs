//! One checkerboard layer: feature extraction, bin planning, the embedding
//! pass and its reverse.

use crate::error::{Error, Result};
use crate::histograms::{build_dpehs, build_pehs, complexity, thresholds, Complexity, Line, Thresholds};
use crate::image::GrayImage;
use crate::optimizer::{self, BinPlan, Group, LineBins, Objective, SEARCH_RANGE};
use crate::predictors::{edge_intensities, predict_rhombus, PredictionContext, PredictorPair};

use super::aux::{line_cost_bits, LayerAux, SchemeId};

/// Rounds of re-planning when features drift during the pass.
const MAX_REPLANS: usize = 16;

const B_SPAN: usize = 511;

/// Bins applied to a pixel given its class and intercept.
#[derive(Debug, Clone)]
pub(crate) enum PlanLookup {
    Fixed(Option<i32>, Option<i32>),
    Table(Vec<(Option<i32>, Option<i32>)>),
}

impl PlanLookup {
    pub(crate) fn from_lines(classes: usize, lines: &[LineBins]) -> Self {
        let mut table = vec![(None, None); classes * B_SPAN];
        for line in lines {
            table[line.t * B_SPAN + (line.b + 255) as usize] = (line.left, line.right);
        }
        PlanLookup::Table(table)
    }

    #[inline]
    fn get(&self, t: usize, b: i32) -> (Option<i32>, Option<i32>) {
        match self {
            PlanLookup::Fixed(l, r) => (*l, *r),
            PlanLookup::Table(table) => table[t * B_SPAN + (b + 255) as usize],
        }
    }
}

/// Everything needed to classify and modify a pixel of one layer.
#[derive(Debug, Clone)]
pub(crate) struct LayerModel {
    /// `None` for the single-error C-PEE mapping.
    pub pair: Option<PredictorPair>,
    pub thresholds: Thresholds,
    pub first_dominates: bool,
    pub plan: PlanLookup,
}

impl LayerModel {
    pub(crate) fn from_aux(scheme: SchemeId, classes: usize, layer: &LayerAux) -> Result<Self> {
        let thresholds = Thresholds::from_values(layer.thresholds.clone())
            .map_err(|e| Error::Corruption(e.to_string()))?;
        Ok(match scheme {
            SchemeId::Cpee => Self::cpee(),
            SchemeId::Pair(pair) => Self {
                pair: Some(pair),
                thresholds,
                first_dominates: layer.first_dominates,
                plan: PlanLookup::from_lines(classes, &layer.lines),
            },
        })
    }

    pub(crate) fn cpee() -> Self {
        Self {
            pair: None,
            thresholds: Thresholds::default(),
            first_dominates: false,
            plan: PlanLookup::Fixed(Some(-1), Some(0)),
        }
    }

    /// Class, rhombus error and intercept of the pixel at `(row, col)`.
    #[inline]
    fn features(&self, img: &GrayImage, row: usize, col: usize) -> (usize, i32, i32) {
        let ctx = PredictionContext::gather(img, row, col);
        let x = i32::from(img.get(row, col));
        let xhat = predict_rhombus(&ctx);
        match self.pair {
            None => (0, x - xhat, 0),
            Some(pair) => {
                let t = self.thresholds.classify(complexity(&ctx, xhat));
                let b = xhat - pair.second(&ctx, self.first_dominates);
                (t, x - xhat, b)
            }
        }
    }
}

/// Pixel change for error `e1` under bins `(left, right)`, and whether the
/// pixel carries a bit.
#[inline]
fn forward(e1: i32, bins: (Option<i32>, Option<i32>), bit: impl FnOnce() -> bool) -> (i32, bool) {
    if let Some(l) = bins.0 {
        if e1 == l {
            return (-i32::from(bit()), true);
        }
        if e1 < l {
            return (-1, false);
        }
    }
    if let Some(r) = bins.1 {
        if e1 == r {
            return (i32::from(bit()), true);
        }
        if e1 > r {
            return (1, false);
        }
    }
    (0, false)
}

/// Inverse of [`forward`] on a marked error: pixel change and recovered bit.
#[inline]
fn backward(e1: i32, bins: (Option<i32>, Option<i32>)) -> (i32, Option<bool>) {
    if let Some(l) = bins.0 {
        if e1 == l {
            return (0, Some(false));
        }
        if e1 == l - 1 {
            return (1, Some(true));
        }
        if e1 < l - 1 {
            return (1, None);
        }
    }
    if let Some(r) = bins.1 {
        if e1 == r {
            return (0, Some(false));
        }
        if e1 == r + 1 {
            return (-1, Some(true));
        }
        if e1 > r + 1 {
            return (-1, None);
        }
    }
    (0, None)
}

/// Counters of one embedding pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PassStats {
    /// Bits written.
    pub bits: usize,
    /// Cells processed, i.e. `n_end`.
    pub n_end: usize,
    /// Expandable pixels whose value changed (bit 1).
    pub expanded_changed: usize,
    /// Pixels moved by one without carrying a bit.
    pub shifted: usize,
}

/// Runs the embedding pass until `bits` are exhausted. Returns the stats and
/// the number of bits that did not fit.
pub(crate) fn embed_cells(
    img: &mut GrayImage,
    cells: &[(usize, usize)],
    model: &LayerModel,
    bits: &[bool],
) -> (PassStats, usize) {
    let mut stats = PassStats::default();
    if bits.is_empty() {
        return (stats, 0);
    }
    for (index, &(row, col)) in cells.iter().enumerate() {
        let (t, e1, b) = model.features(img, row, col);
        let (delta, used) = forward(e1, model.plan.get(t, b), || bits[stats.bits]);
        if used {
            stats.bits += 1;
            stats.expanded_changed += usize::from(delta != 0);
        } else if delta != 0 {
            stats.shifted += 1;
        }
        if delta != 0 {
            let x = i32::from(img.get(row, col)) + delta;
            debug_assert!((0..=255).contains(&x), "preprocessing keeps cells off the rails");
            img.set(row, col, x as u8);
        }
        if stats.bits == bits.len() {
            stats.n_end = index + 1;
            return (stats, 0);
        }
    }
    stats.n_end = cells.len();
    let missing = bits.len() - stats.bits;
    (stats, missing)
}

/// Reverse pass over the first `n_end` cells; returns the bits in embedding
/// order.
pub(crate) fn extract_cells(
    img: &mut GrayImage,
    cells: &[(usize, usize)],
    model: &LayerModel,
    n_end: usize,
) -> Result<Vec<bool>> {
    if n_end > cells.len() {
        return Err(Error::Corruption(format!("n_end {n_end} beyond {} layer cells", cells.len())));
    }
    let mut bits = Vec::new();
    for &(row, col) in cells[..n_end].iter().rev() {
        let (t, e1, b) = model.features(img, row, col);
        let (delta, bit) = backward(e1, model.plan.get(t, b));
        bits.extend(bit);
        if delta != 0 {
            let x = i32::from(img.get(row, col)) + delta;
            if !(0..=255).contains(&x) {
                return Err(Error::Corruption(format!("pixel ({row}, {col}) restores to {x}")));
            }
            img.set(row, col, x as u8);
        }
    }
    bits.reverse();
    Ok(bits)
}

/// How the bins of a layer are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Analysis {
    /// Per-class 2D histograms of the predictor pair's double errors.
    Double(PredictorPair),
    /// Per-class 1D histograms of the rhombus error.
    Single,
    /// Fixed bins -1 and 0.
    Fixed,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PlanParams {
    pub classes: usize,
    pub min_line_mass: u32,
    pub delta: usize,
    pub objective: Objective,
    /// Penalty per auxiliary bit of an active line, in half-distortion units.
    pub aux_cost: u64,
}

/// Outcome of embedding one layer.
#[derive(Debug, Clone)]
pub(crate) struct LayerOutcome {
    pub aux: LayerAux,
    pub stats: PassStats,
    pub ec_star: usize,
    pub ed2_star: u64,
    pub replans: usize,
}

/// Histogram lines of one layer against the image state `img`.
pub(crate) fn layer_lines(
    img: &GrayImage,
    cells: &[(usize, usize)],
    analysis: Analysis,
    classes: usize,
    first_dominates: bool,
) -> Result<(Thresholds, Vec<Vec<Line>>)> {
    let mut feats = Vec::with_capacity(cells.len());
    for &(row, col) in cells {
        let ctx = PredictionContext::gather(img, row, col);
        let x = i32::from(img.get(row, col));
        let xhat = predict_rhombus(&ctx);
        let e2 = match analysis {
            Analysis::Double(pair) => x - pair.second(&ctx, first_dominates),
            _ => x - xhat,
        };
        feats.push((x - xhat, e2, complexity(&ctx, xhat)));
    }
    let all: Vec<Complexity> = feats.iter().map(|f| f.2).collect();
    let th = thresholds(&all, classes)?;
    let lines = match analysis {
        Analysis::Single => build_pehs(feats.iter().map(|&(e1, _, n)| (e1, n)), &th),
        _ => build_dpehs(
            feats.iter().map(|&(e1, e2, n)| (crate::predictors::DoubleError { e1, e2 }, n)),
            &th,
        )
        .iter()
        .map(|h| h.lines())
        .collect(),
    };
    Ok((th, lines))
}

fn plan_groups(groups: &[Group], demand: usize, delta: usize, objective: Objective) -> Result<BinPlan> {
    match optimizer::dp_forward_rolling(groups, demand, delta, objective) {
        Ok(plan) => Ok(plan),
        Err(infeasible) => {
            // a single bin may exceed the slack; widen the table to every
            // reachable capacity before giving up
            let ceiling = optimizer::max_capacity(groups) as usize;
            if ceiling >= demand && ceiling > demand + delta {
                optimizer::dp_forward_rolling(groups, demand, ceiling - demand, objective).map_err(|i| {
                    Error::Capacity { requested: demand, achievable: i.max_capacity }
                })
            } else {
                Err(Error::Capacity { requested: demand, achievable: infeasible.max_capacity })
            }
        }
    }
}

/// Plans and embeds `bits` into one layer of `img`.
pub(crate) fn embed_layer(
    img: &mut GrayImage,
    cells: &[(usize, usize)],
    bits: &[bool],
    analysis: Analysis,
    params: PlanParams,
) -> Result<LayerOutcome> {
    if analysis == Analysis::Fixed {
        let model = LayerModel::cpee();
        let (stats, missing) = embed_cells(img, cells, &model, bits);
        if missing > 0 {
            return Err(Error::Capacity { requested: bits.len(), achievable: stats.bits });
        }
        return Ok(LayerOutcome {
            aux: LayerAux { n_end: stats.n_end, ..Default::default() },
            stats,
            ec_star: stats.bits,
            ed2_star: 0,
            replans: 0,
        });
    }

    let pair = match analysis {
        Analysis::Double(pair) => pair,
        _ => PredictorPair::RhombusRhombus,
    };
    let first_dominates = pair.uses_edges() && edge_intensities(img).first_dominates();
    let (th, lines) = layer_lines(img, cells, analysis, params.classes, first_dominates)?;
    let mut groups = optimizer::build_groups(&lines, params.min_line_mass, SEARCH_RANGE);
    if params.aux_cost > 0 {
        for choice in groups.iter_mut().flat_map(|g| g.choices.iter_mut()) {
            choice.ed2 += params.aux_cost * line_cost_bits(choice.left, choice.right) as u64;
        }
    }

    let start = img.clone();
    let mut demand = bits.len();
    for replans in 0..MAX_REPLANS {
        let plan = plan_groups(&groups, demand, params.delta, params.objective)?;
        let line_bins = plan.line_bins(&groups);
        let model = LayerModel {
            pair: Some(pair),
            thresholds: th.clone(),
            first_dominates,
            plan: PlanLookup::from_lines(params.classes, &line_bins),
        };
        let mut trial = start.clone();
        let (stats, missing) = embed_cells(&mut trial, cells, &model, bits);
        if missing == 0 {
            *img = trial;
            let penalty: u64 =
                line_bins.iter().map(|l| params.aux_cost * line_cost_bits(l.left, l.right) as u64).sum();
            return Ok(LayerOutcome {
                aux: LayerAux {
                    thresholds: th.values().to_vec(),
                    first_dominates,
                    n_end: stats.n_end,
                    lines: line_bins,
                },
                stats,
                ec_star: plan.ec_star,
                ed2_star: plan.ed2_star - penalty,
                replans,
            });
        }
        // features drift as earlier pixels change; ask for the shortfall
        demand = plan.ec_star.max(demand) + missing;
    }
    Err(Error::Capacity { requested: bits.len(), achievable: 0 })
}
