//! Dimension of the exceptional translation set: the x-cells whose
//! per-sample slope exceeds the predicted exponent, box-counted on the
//! sampling grid.

use super::{ExperimentResult, LabError};
use crate::dimension::minkowski_dim;
use crate::fit::DecayFit;
use crate::grid::{CellSet, GridSpec};

#[derive(Debug, Clone)]
pub struct ExceptionalReport {
    /// Exceptional x-cells on the sampling grid.
    pub cells: CellSet,
    /// Weight fraction of exceeding samples.
    pub fraction: f64,
    /// Box-count fit of the exceptional set; `None` when empty or too sparse
    /// to fit.
    pub fit: Option<DecayFit>,
    pub empty: bool,
    pub threshold: f64,
    pub margin: f64,
}

/// Collects x-cells where the per-sample slope exceeds
/// `threshold + margin` and box-counts them across the grid's levels. The
/// experiment must have sampled on a dyadic x grid of resolution `kx >= 4`.
pub fn exceptional_set_dim(
    result: &ExperimentResult,
    kx: u32,
    margin: f64,
    box_side: u32,
    d: usize,
) -> Result<ExceptionalReport, LabError> {
    if kx < 4 {
        return Err(LabError::XGridTooCoarse(kx));
    }
    let threshold = result
        .threshold
        .intersection_dim
        .ok_or(LabError::NoSamples)?;
    let grid = GridSpec::new(d, kx, box_side).map_err(LabError::Grid)?;
    let mut cells = Vec::new();
    let mut excess_weight = 0.0;
    let mut total_weight = 0.0;
    for r in &result.records {
        total_weight += r.weight;
        let Some(cell) = r.params.x_cell else {
            return Err(LabError::NoSamples);
        };
        if r.gamma.map(|g| g > threshold + margin).unwrap_or(false) {
            cells.push(cell);
            excess_weight += r.weight;
        }
    }
    let cells = CellSet::new(grid, cells).map_err(LabError::Grid)?;
    let empty = cells.is_empty();
    let fit = if empty {
        None
    } else {
        let levels: Vec<u32> = (0..=kx).collect();
        minkowski_dim(&cells, &levels).ok()
    };
    Ok(ExceptionalReport {
        cells,
        fraction: if total_weight > 0.0 { excess_weight / total_weight } else { 0.0 },
        fit,
        empty,
        threshold,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::Construction;
    use crate::diffeo::Diffeo;
    use crate::grid::GridSpec;
    use crate::lab::experiments::translation_experiment;
    use crate::lab::sampling::XSource;
    use crate::lab::ExperimentParams;
    use crate::predict::{predict, BoundInputs, BoundKind};

    #[test]
    fn transversal_segments_have_empty_exceptional_set() {
        // a vertical segment against a horizontal one: every translate
        // crosses in a point, no sample exceeds the predicted exponent
        let g = GridSpec::new(2, 8, 1).unwrap();
        let vertical = CellSet::new(g, (0..256u32).map(|i| [128, i, 0]).collect()).unwrap();
        let horizontal = CellSet::new(g, (0..256u32).map(|i| [i, 128, 0]).collect()).unwrap();
        let mut inputs = BoundInputs { d: 2, ..Default::default() };
        inputs.s_a = Some(1.0);
        inputs.s_b = Some(1.0);
        let thr = predict(BoundKind::Translation, &inputs).unwrap();
        let params = ExperimentParams::new((4..=8).collect(), 0, 3);
        let src = XSource::DyadicGrid { kx: 4, jitter: true };
        let r =
            translation_experiment(&vertical, &horizontal, &Diffeo::Identity, &src, &params, thr)
                .unwrap();
        let report = exceptional_set_dim(&r, 4, 0.3, 1, 2).unwrap();
        // empty up to endpoint artifacts: at most a pointlike set of
        // dimension zero
        assert!(report.fraction <= 1.0 / 64.0, "fraction = {}", report.fraction);
        match &report.fit {
            None => assert!(report.empty),
            Some(fit) => assert!(fit.slope < 0.3, "slope = {}", fit.slope),
        }
    }

    #[test]
    fn requires_grid_sampling() {
        let g = GridSpec::new(2, 8, 1).unwrap();
        let a = Construction::Box.build(&g).unwrap();
        let mut inputs = BoundInputs { d: 2, ..Default::default() };
        inputs.s_a = Some(2.0);
        inputs.s_b = Some(2.0);
        let thr = predict(BoundKind::Translation, &inputs).unwrap();
        let params = ExperimentParams::new((4..=8).collect(), 0, 3);
        let src = XSource::TentGrid { per_axis: 8, lo: [0.0; 3], hi: [1.0, 1.0, 0.0] };
        let r = translation_experiment(&a, &a, &Diffeo::Identity, &src, &params, thr).unwrap();
        assert!(exceptional_set_dim(&r, 4, 0.15, 1, 2).is_err());
    }
}
