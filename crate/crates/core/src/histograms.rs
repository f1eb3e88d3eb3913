//! Local complexity, quantile thresholds, and the per-class sparse 2D
//! double prediction-error histograms.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::predictors::{DoubleError, PredictionContext};

/// Default class count.
pub const DEFAULT_CLASSES: usize = 16;
/// Largest supported class count.
pub const MAX_CLASSES: usize = 64;
/// Default minimum mass of a valid line.
pub const DEFAULT_MIN_LINE_MASS: u32 = 20;

/// Sum of absolute differences around a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Complexity(pub u32);

/// 19-term complexity of a context; `xhat` is its rhombus prediction.
pub fn complexity(ctx: &PredictionContext, xhat: i32) -> Complexity {
    let [v1, v2, v3, v4] = ctx.v;
    let [u1, u2, u3, u4, u5, u6, u7, u8, u9] = ctx.u;
    let terms = [
        v1 - xhat,
        v2 - xhat,
        v3 - xhat,
        v4 - xhat,
        u3 - v3,
        v3 - u4,
        u4 - u5,
        u6 - u7,
        u7 - u8,
        u8 - u9,
        v2 - u3,
        u3 - u6,
        v3 - u7,
        v4 - u4,
        u4 - u8,
        u1 - u2,
        u2 - u5,
        u5 - u9,
        v4 - u2,
    ];
    Complexity(terms.iter().map(|d| d.unsigned_abs()).sum())
}

/// Upper bounds `s_0 <= ... <= s_{M-2}` of the complexity classes:
/// class 0 is `[0, s_0]`, class `t` is `[s_{t-1}+1, s_t]`, and the last
/// class is everything above `s_{M-2}`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Thresholds {
    s: Vec<u32>,
}

impl Thresholds {
    pub fn from_values(s: Vec<u32>) -> Result<Self> {
        if s.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Argument("thresholds must be non-decreasing".into()));
        }
        if s.len() + 1 > MAX_CLASSES {
            return Err(Error::Argument(format!("at most {MAX_CLASSES} classes")));
        }
        Ok(Self { s })
    }

    pub fn values(&self) -> &[u32] {
        &self.s
    }

    pub fn class_count(&self) -> usize {
        self.s.len() + 1
    }

    /// Index of the class containing `n`.
    #[inline]
    pub fn classify(&self, n: Complexity) -> usize {
        self.s.partition_point(|&s| s < n.0)
    }
}

/// M-quantile thresholds: `s_i` is the smallest `th` with at least
/// `(i+1)/m` of the complexities at or below it.
pub fn thresholds(all: &[Complexity], m: usize) -> Result<Thresholds> {
    if !(1..=MAX_CLASSES).contains(&m) {
        return Err(Error::Argument(format!("class count {m} outside 1..={MAX_CLASSES}")));
    }
    if all.is_empty() {
        return Err(Error::Argument("no complexities to split".into()));
    }
    let mut sorted: Vec<u32> = all.iter().map(|c| c.0).collect();
    sorted.sort_unstable();
    let n = sorted.len();
    let s = (0..m - 1)
        .map(|i| {
            // smallest count k with k * m >= (i + 1) * n
            let k = ((i + 1) * n).div_ceil(m);
            sorted[k.max(1) - 1]
        })
        .collect();
    Ok(Thresholds { s })
}

/// One diagonal `e2 = e1 + b` of a 2D histogram, as a 1D histogram over e1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub b: i32,
    /// `(e1, count)` with strictly ascending `e1` and positive counts.
    pub points: Vec<(i32, u32)>,
}

impl Line {
    pub fn mass(&self) -> u64 {
        self.points.iter().map(|&(_, c)| u64::from(c)).sum()
    }
}

/// Sparse 2D double prediction-error histogram of one complexity class.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dpeh2D {
    pub t: usize,
    bins: BTreeMap<(i32, i32), u32>,
}

impl Dpeh2D {
    pub fn new(t: usize) -> Self {
        Self { t, bins: BTreeMap::new() }
    }

    pub fn add(&mut self, e: DoubleError) {
        *self.bins.entry((e.e1, e.e2)).or_insert(0) += 1;
    }

    pub fn get(&self, e1: i32, e2: i32) -> u32 {
        self.bins.get(&(e1, e2)).copied().unwrap_or(0)
    }

    pub fn bins(&self) -> &BTreeMap<(i32, i32), u32> {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.bins.values().map(|&c| u64::from(c)).sum()
    }

    /// Regroups the bins by intercept; lines ascending in `b`, points in `e1`.
    pub fn lines(&self) -> Vec<Line> {
        let mut by_b: BTreeMap<i32, Vec<(i32, u32)>> = BTreeMap::new();
        for (&(e1, e2), &count) in &self.bins {
            by_b.entry(e2 - e1).or_default().push((e1, count));
        }
        by_b
            .into_iter()
            .map(|(b, mut points)| {
                points.sort_unstable_by_key(|&(e1, _)| e1);
                Line { b, points }
            })
            .collect()
    }

    /// CSV rows `t,e1,e2,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (&(e1, e2), &count) in &self.bins {
            let _ = writeln!(out, "{},{e1},{e2},{count}", self.t);
        }
        out
    }
}

/// One histogram per class; every sample lands in exactly one.
pub fn build_dpehs(
    samples: impl IntoIterator<Item = (DoubleError, Complexity)>,
    th: &Thresholds,
) -> Vec<Dpeh2D> {
    let mut hists: Vec<Dpeh2D> = (0..th.class_count()).map(Dpeh2D::new).collect();
    for (e, n) in samples {
        hists[th.classify(n)].add(e);
    }
    hists
}

/// Per-class 1D histograms over a single prediction error, each exposed as
/// the `b = 0` line.
pub fn build_pehs(
    samples: impl IntoIterator<Item = (i32, Complexity)>,
    th: &Thresholds,
) -> Vec<Vec<Line>> {
    let mut counts: Vec<BTreeMap<i32, u32>> = vec![BTreeMap::new(); th.class_count()];
    for (e, n) in samples {
        *counts[th.classify(n)].entry(e).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|hist| {
            if hist.is_empty() {
                Vec::new()
            } else {
                vec![Line { b: 0, points: hist.into_iter().collect() }]
            }
        })
        .collect()
}

/// Lines whose total mass reaches `hmin`, ascending in `b`.
pub fn valid_lines(lines: &[Line], hmin: u32) -> Vec<&Line> {
    lines.iter().filter(|l| l.mass() >= u64::from(hmin) && l.mass() > 0).collect()
}
