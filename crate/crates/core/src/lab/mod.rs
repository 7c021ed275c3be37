//! Intersection experiments: covering numbers of thickened intersections
//! under translation, rotation, dilation and level-set families, averaged
//! against sampling weights and compared with predicted exponents.

mod covering;
mod exceptional;
mod experiments;
mod inverse;
mod levelset;
mod sampling;

pub use covering::{covering_number, IntersectMap};
pub use exceptional::{exceptional_set_dim, ExceptionalReport};
pub use experiments::{
    default_t_grid, dilation_experiment, rotation_experiment, translation_experiment,
    RotationSource,
};
pub use inverse::{inverse_experiment, unit_directions, InverseParams, InverseReport};
pub use levelset::{level_set_experiment, maximal_experiment};
pub use sampling::{draw_rotations, draw_x_samples, XSample, XSource};

use crate::fit::{fit_line, DecayFit};
use crate::grid::{Cell, GridError, Point};
use crate::mapspec::MapError;
use crate::measure::MeasureError;
use crate::predict::Thresholds;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LabError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("sets live on incompatible grids")]
    IncompatibleGrids,
    #[error("scale ladder is empty or exceeds the grid resolution")]
    BadLadder,
    #[error("need at least 64 samples, got {0}")]
    TooFewSamples(usize),
    #[error("dilation grid value {0} outside [1, 2]")]
    BadDilationRange(f64),
    #[error("rotation averaging needs dimension >= 2")]
    RotationNeedsPlane,
    #[error("level-set family is degenerate (min |det| = {0:.3e})")]
    DegenerateFamily(f64),
    #[error("expected {need} sampling measures, got {got}")]
    WrongMeasureCount { need: usize, got: usize },
    #[error("no samples supplied")]
    NoSamples,
    #[error("x grid must carry at least 4 dyadic levels, got {0}")]
    XGridTooCoarse(u32),
}

/// Transformation parameters of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleParams {
    pub index: usize,
    pub x: Point,
    /// Cell of the x-sampling grid when sampling is grid-based.
    pub x_cell: Option<Cell>,
    pub x2: Option<Point>,
    /// Index into the experiment's rotation list.
    pub rotation: Option<usize>,
    pub t: Option<f64>,
}

impl SampleParams {
    pub fn at(index: usize, x: Point) -> SampleParams {
        SampleParams { index, x, x_cell: None, x2: None, rotation: None, t: None }
    }
}

/// Covering counts of one sample across the scale ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringRecord {
    pub params: SampleParams,
    /// `(level j, count at scale 2^-j)`.
    pub counts: Vec<(u32, u64)>,
    /// Per-sample slope over the ladder, when enough scales are populated.
    pub gamma: Option<f64>,
    /// Averaging weight.
    pub weight: f64,
}

impl CoveringRecord {
    pub(crate) fn finish(params: SampleParams, counts: Vec<(u32, u64)>, weight: f64) -> Self {
        let gamma = per_sample_slope(&counts);
        CoveringRecord { params, counts, gamma, weight }
    }
}

/// Slope of `log2 N` against `j` over the populated part of the ladder.
pub fn per_sample_slope(counts: &[(u32, u64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = counts
        .iter()
        .filter(|&&(_, n)| n > 0)
        .map(|&(j, n)| (j as f64, (n as f64).log2()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let span = pts.last().unwrap().0 - pts[0].0;
    if span < 2.0 {
        return None;
    }
    fit_line(&pts).ok().map(|f| f.slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    BoundRespected,
    BoundViolated,
    /// The hypothesis failed or the fit is empty, so the bound makes no
    /// claim; reported for the record.
    Informational,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::BoundRespected => "bound-respected",
            Verdict::BoundViolated => "bound-violated",
            Verdict::Informational => "informational",
        }
    }
}

/// Outcome of one experiment: raw records, weighted averages per scale, the
/// fitted slope, the predicted thresholds and the verdict.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<CoveringRecord>,
    pub averaged: Vec<(u32, f64)>,
    pub fit: Option<DecayFit>,
    pub threshold: Thresholds,
    /// Absolute slope tolerance used by the verdict.
    pub margin: f64,
    pub verdict: Verdict,
    /// Weight fraction of samples whose per-sample slope exceeds the
    /// predicted intersection exponent by more than the margin.
    pub exceptional_fraction: f64,
}

impl ExperimentResult {
    pub(crate) fn assemble(
        records: Vec<CoveringRecord>,
        ladder: &[u32],
        threshold: Thresholds,
        margin: f64,
    ) -> ExperimentResult {
        let (averaged, fit, verdict, exceptional_fraction) =
            evaluate(&records, ladder, &threshold, margin);
        ExperimentResult { records, averaged, fit, threshold, margin, verdict, exceptional_fraction }
    }

    /// Recomputes the derived fields from the records alone; the stored
    /// verdict must always match.
    pub fn recompute_verdict(&self, ladder: &[u32]) -> Verdict {
        evaluate(&self.records, ladder, &self.threshold, self.margin).2
    }

    pub fn ladder(&self) -> Vec<u32> {
        self.records
            .first()
            .map(|r| r.counts.iter().map(|&(j, _)| j).collect())
            .unwrap_or_default()
    }
}

fn evaluate(
    records: &[CoveringRecord],
    ladder: &[u32],
    threshold: &Thresholds,
    margin: f64,
) -> (Vec<(u32, f64)>, Option<DecayFit>, Verdict, f64) {
    let total_weight: f64 = records.iter().map(|r| r.weight).sum();
    let mut averaged = Vec::with_capacity(ladder.len());
    for (pos, &j) in ladder.iter().enumerate() {
        let mut acc = 0.0;
        for r in records {
            if let Some(&(jj, n)) = r.counts.get(pos) {
                debug_assert_eq!(jj, j);
                acc += r.weight * n as f64;
            }
        }
        averaged.push((j, if total_weight > 0.0 { acc / total_weight } else { 0.0 }));
    }
    let pts: Vec<(f64, f64)> = averaged
        .iter()
        .filter(|&&(_, v)| v > 0.0)
        .map(|&(j, v)| (j as f64, v.log2()))
        .collect();
    let fit = if pts.len() >= 2 { fit_line(&pts).ok() } else { None };
    let predicted = threshold.intersection_dim;
    let verdict = match (&fit, predicted) {
        (Some(f), Some(p)) => {
            if !threshold.hypothesis_ok {
                Verdict::Informational
            } else if f.slope <= p + margin {
                Verdict::BoundRespected
            } else {
                Verdict::BoundViolated
            }
        }
        _ => Verdict::Informational,
    };
    let exceptional_fraction = match predicted {
        Some(p) => {
            let excess: f64 = records
                .iter()
                .filter(|r| r.gamma.map(|g| g > p + margin).unwrap_or(false))
                .map(|r| r.weight)
                .sum();
            if total_weight > 0.0 {
                excess / total_weight
            } else {
                0.0
            }
        }
        None => 0.0,
    };
    (averaged, fit, verdict, exceptional_fraction)
}

/// Common experiment knobs.
#[derive(Debug, Clone)]
pub struct ExperimentParams {
    /// Scale levels `j`, ascending; counts run at scale `2^-j`.
    pub ladder: Vec<u32>,
    pub n_samples: usize,
    pub seed: u64,
    /// Slope tolerance; quantization of conservative rasterization costs
    /// about `1/k` in fitted slopes at the resolutions used here.
    pub margin: f64,
}

impl ExperimentParams {
    pub fn new(ladder: Vec<u32>, n_samples: usize, seed: u64) -> ExperimentParams {
        ExperimentParams { ladder, n_samples, seed, margin: 0.15 }
    }
}

pub(crate) fn validate_ladder(ladder: &[u32], k: u32) -> Result<(), LabError> {
    if ladder.is_empty() || ladder.iter().any(|&j| j > k) {
        return Err(LabError::BadLadder);
    }
    if ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::BadLadder);
    }
    Ok(())
}
