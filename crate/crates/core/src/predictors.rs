//! Pixel predictors and double prediction errors.
//!
//! The prediction window of a pixel `x` at `(r, c)` is the cross
//! `v1..v4` (south, east, north, west) plus nine context pixels `u1..u9`
//! reaching two rows up and two columns left:
//!
//! ```text
//!            c-2  c-1   c   c+1
//!   r-2      u9   u8   u7   u6
//!   r-1      u5   u4   v3   u3
//!   r        u2   v4    x   v2
//!   r+1      u1        v1
//! ```
//!
//! `v*`, `u1`, `u5`, `u6`, `u8` belong to the other checkerboard layer. The
//! same-layer pixels `u2`, `u3`, `u4`, `u7`, `u9` precede `x` in raster order,
//! so the embedder and the reverse-scanning extractor see identical windows.

use crate::image::GrayImage;

/// The thirteen neighbours used for prediction and complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PredictionContext {
    /// `v[0]` is v1 (south) through `v[3]` = v4 (west).
    pub v: [i32; 4],
    /// `u[0]` is u1 through `u[8]` = u9.
    pub u: [i32; 9],
}

impl PredictionContext {
    /// Reads the window around `(row, col)`; requires `2 <= row < height - 1`
    /// and `2 <= col < width - 1`.
    #[inline]
    pub fn gather(img: &GrayImage, row: usize, col: usize) -> Self {
        let w = img.width();
        let p = img.pixels();
        let at = |r: usize, c: usize| i32::from(p[r * w + c]);
        Self {
            v: [at(row + 1, col), at(row, col + 1), at(row - 1, col), at(row, col - 1)],
            u: [
                at(row + 1, col - 2),
                at(row, col - 2),
                at(row - 1, col + 1),
                at(row - 1, col - 1),
                at(row - 1, col - 2),
                at(row - 2, col + 1),
                at(row - 2, col),
                at(row - 2, col - 1),
                at(row - 2, col - 2),
            ],
        }
    }
}

/// Ceiling of the mean of the four cross neighbours.
#[inline]
pub fn predict_rhombus(ctx: &PredictionContext) -> i32 {
    (ctx.v.iter().sum::<i32>() + 3) / 4
}

/// Median edge detector on north (v3), west (v4) and north-west (u4).
#[inline]
pub fn predict_med(ctx: &PredictionContext) -> i32 {
    let (north, west, corner) = (ctx.v[2], ctx.v[3], ctx.u[3]);
    let (lo, hi) = (north.min(west), north.max(west));
    if corner >= hi {
        lo
    } else if corner <= lo {
        hi
    } else {
        (north + west - corner).clamp(0, 255)
    }
}

/// Mean directional edge strengths of an image.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeIntensities {
    /// Right-column minus left-column sum over each 3x3 window.
    pub i1: f64,
    /// Top-row minus bottom-row sum over each 3x3 window.
    pub i2: f64,
}

impl EdgeIntensities {
    /// The only bit of the intensities the nonlinear predictor consumes.
    pub fn first_dominates(&self) -> bool {
        self.i1 >= self.i2
    }
}

/// Averages the two directional differences over every pixel whose 3x3
/// window fits inside the image.
pub fn edge_intensities(img: &GrayImage) -> EdgeIntensities {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return EdgeIntensities::default();
    }
    let px = |r: usize, c: usize| i64::from(img.get(r, c));
    let (mut s1, mut s2) = (0i64, 0i64);
    for i in 1..h - 1 {
        for j in 1..w - 1 {
            s1 += px(i - 1, j + 1) + px(i, j + 1) + px(i + 1, j + 1)
                - px(i - 1, j - 1)
                - px(i, j - 1)
                - px(i + 1, j - 1);
            s2 += px(i - 1, j - 1) + px(i - 1, j) + px(i - 1, j + 1)
                - px(i + 1, j - 1)
                - px(i + 1, j)
                - px(i + 1, j + 1);
        }
    }
    let n = ((h - 2) * (w - 2)) as f64;
    EdgeIntensities { i1: s1 as f64 / n, i2: s2 as f64 / n }
}

#[inline]
fn ceil_half(sum: i32) -> i32 {
    (sum + 1) / 2
}

/// Nonlinear rhombus predictor: the six ordered cases on the cross
/// neighbours, with the rhombus mean when none applies.
///
/// `first_dominates` is `I1 >= I2` from [`edge_intensities`].
pub fn predict_nonlinear_rhombus(ctx: &PredictionContext, first_dominates: bool) -> i32 {
    let [v1, v2, v3, v4] = ctx.v;
    let value = if v1.min(v2) >= v3.max(v4) {
        ceil_half(v1.max(v2) + v3.min(v4))
    } else if v2.min(v3) >= v1.max(v4) {
        ceil_half(v2.max(v3) + v1.min(v4))
    } else if v3.min(v4) >= v1.max(v2) {
        ceil_half(v3.max(v4) + v1.min(v2))
    } else if v1.min(v4) >= v2.max(v3) {
        ceil_half(v1.max(v4) + v2.min(v3))
    } else if v1.min(v3) >= v2.max(v4) && first_dominates {
        ceil_half(v1 + v3)
    } else if v2.min(v4) >= v1.max(v3) && !first_dominates {
        ceil_half(v2 + v4)
    } else {
        predict_rhombus(ctx)
    };
    value.clamp(0, 255)
}

/// Which second predictor accompanies the rhombus mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictorPair {
    /// Rhombus mean with the median edge detector.
    RhombusMed,
    /// Rhombus mean with the nonlinear rhombus predictor.
    RhombusNonlinear,
    /// The rhombus mean twice; every error pair lies on the diagonal.
    RhombusRhombus,
}

impl PredictorPair {
    pub const ALL: [PredictorPair; 3] =
        [Self::RhombusMed, Self::RhombusNonlinear, Self::RhombusRhombus];

    pub fn second(self, ctx: &PredictionContext, first_dominates: bool) -> i32 {
        match self {
            Self::RhombusMed => predict_med(ctx),
            Self::RhombusNonlinear => predict_nonlinear_rhombus(ctx, first_dominates),
            Self::RhombusRhombus => predict_rhombus(ctx),
        }
    }

    /// Whether the second predictor reads the edge intensities.
    pub fn uses_edges(self) -> bool {
        matches!(self, Self::RhombusNonlinear)
    }
}

/// Prediction errors of one pixel under the two predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DoubleError {
    pub e1: i32,
    pub e2: i32,
}

impl DoubleError {
    /// Intercept `b` of the diagonal `e2 = e1 + b` through this pair.
    #[inline]
    pub fn intercept(&self) -> i32 {
        self.e2 - self.e1
    }
}

/// Errors of `x` given both predictions.
#[inline]
pub fn double_errors(
    x: i32,
    ctx: &PredictionContext,
    first_dominates: bool,
    pair: PredictorPair,
) -> DoubleError {
    DoubleError {
        e1: x - predict_rhombus(ctx),
        e2: x - pair.second(ctx, first_dominates),
    }
}
