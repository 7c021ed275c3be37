//! The transform experiments: translated, rotated and dilated copies of one
//! set intersected with another, averaged over seeded samples.
//!
//! All three share one counting core and one sample stream, so a dilation
//! grid of `{1}` and an explicit identity rotation reproduce the translation
//! records bit for bit under the same seed.

use super::covering::CoverEngine;
use super::sampling::{draw_rotations, draw_x_samples, XSource};
use super::{CoveringRecord, ExperimentParams, ExperimentResult, LabError, SampleParams};
use crate::diffeo::Diffeo;
use crate::grid::CellSet;
use crate::predict::Thresholds;
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

/// Salt for the rotation stream so it never perturbs the translation stream.
const ROTATION_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// How rotations are supplied.
#[derive(Debug, Clone)]
pub enum RotationSource {
    /// Seeded invariant sampling of the orthogonal group.
    Haar { count: usize },
    /// Explicit list (the identity-only consistency case lives here).
    Explicit(Vec<Matrix3<f64>>),
}

struct WorkItem {
    params: SampleParams,
    linear: Matrix3<f64>,
    offset: Vector3<f64>,
    weight: f64,
}

fn run_items(
    engine: &CoverEngine,
    items: Vec<WorkItem>,
    ladder: &[u32],
    threshold: Thresholds,
    margin: f64,
) -> ExperimentResult {
    let records: Vec<CoveringRecord> = items
        .par_iter()
        .map(|item| {
            let counts: Vec<(u32, u64)> = engine
                .levels
                .iter()
                .map(|lvl| (lvl.j, engine.count_affine(lvl, &item.linear, &item.offset)))
                .collect();
            CoveringRecord::finish(item.params.clone(), counts, item.weight)
        })
        .collect();
    ExperimentResult::assemble(records, ladder, threshold, margin)
}

/// Average covering counts of `A ∩ (s(x) - B)` over translation samples.
pub fn translation_experiment(
    a: &CellSet,
    b: &CellSet,
    s_map: &Diffeo,
    src: &XSource,
    params: &ExperimentParams,
    threshold: Thresholds,
) -> Result<ExperimentResult, LabError> {
    let engine = CoverEngine::new(a, Some(b), &params.ladder)?;
    let samples = draw_x_samples(src, a.grid(), params.n_samples, params.seed)?;
    let items: Vec<WorkItem> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let target = s_map.apply(s.x);
            let mut p = SampleParams::at(i, s.x);
            p.x_cell = s.cell;
            WorkItem {
                params: p,
                linear: -Matrix3::identity(),
                offset: Vector3::new(target[0], target[1], target[2]),
                weight: s.weight,
            }
        })
        .collect();
    Ok(run_items(&engine, items, &params.ladder, threshold, params.margin))
}

/// Average covering counts of `A ∩ (x - gB)` over rotations and translation
/// samples jointly.
pub fn rotation_experiment(
    a: &CellSet,
    b: &CellSet,
    rotations: &RotationSource,
    src: &XSource,
    params: &ExperimentParams,
    threshold: Thresholds,
) -> Result<ExperimentResult, LabError> {
    let engine = CoverEngine::new(a, Some(b), &params.ladder)?;
    let samples = draw_x_samples(src, a.grid(), params.n_samples, params.seed)?;
    let gs = match rotations {
        RotationSource::Haar { count } => {
            draw_rotations(a.grid().d(), *count, params.seed ^ ROTATION_SALT)?
        }
        RotationSource::Explicit(gs) => gs.clone(),
    };
    if gs.is_empty() {
        return Err(LabError::NoSamples);
    }
    let g_weight = 1.0 / gs.len() as f64;
    let mut items = Vec::with_capacity(gs.len() * samples.len());
    for (r, g) in gs.iter().enumerate() {
        for (i, s) in samples.iter().enumerate() {
            let mut p = SampleParams::at(r * samples.len() + i, s.x);
            p.x_cell = s.cell;
            p.rotation = Some(r);
            items.push(WorkItem {
                params: p,
                linear: -g,
                offset: Vector3::new(s.x[0], s.x[1], s.x[2]),
                weight: s.weight * g_weight,
            });
        }
    }
    Ok(run_items(&engine, items, &params.ladder, threshold, params.margin))
}

/// Average covering counts of `A ∩ (x - tB)` over a dilation grid and
/// translation samples jointly. Grid values must lie in `[1, 2]`.
pub fn dilation_experiment(
    a: &CellSet,
    b: &CellSet,
    t_grid: &[f64],
    src: &XSource,
    params: &ExperimentParams,
    threshold: Thresholds,
) -> Result<ExperimentResult, LabError> {
    if t_grid.is_empty() {
        return Err(LabError::NoSamples);
    }
    for &t in t_grid {
        if !(1.0..=2.0).contains(&t) {
            return Err(LabError::BadDilationRange(t));
        }
    }
    let engine = CoverEngine::new(a, Some(b), &params.ladder)?;
    let samples = draw_x_samples(src, a.grid(), params.n_samples, params.seed)?;
    let t_weight = 1.0 / t_grid.len() as f64;
    let mut items = Vec::with_capacity(t_grid.len() * samples.len());
    for (r, &t) in t_grid.iter().enumerate() {
        for (i, s) in samples.iter().enumerate() {
            let mut p = SampleParams::at(r * samples.len() + i, s.x);
            p.x_cell = s.cell;
            p.t = Some(t);
            items.push(WorkItem {
                params: p,
                linear: Matrix3::identity() * -t,
                offset: Vector3::new(s.x[0], s.x[1], s.x[2]),
                weight: s.weight * t_weight,
            });
        }
    }
    Ok(run_items(&engine, items, &params.ladder, threshold, params.margin))
}

/// Evenly spaced dilation grid on `[1, 2]`.
pub fn default_t_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| 1.0 + i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{cantor_set, product_set, Construction};
    use crate::grid::GridSpec;
    use crate::lab::Verdict;
    use crate::predict::{predict, BoundInputs, BoundKind};

    fn full_box_inputs(d: usize) -> Thresholds {
        let mut i = BoundInputs { d, ..Default::default() };
        i.s_a = Some(d as f64);
        i.s_b = Some(d as f64);
        predict(BoundKind::Translation, &i).unwrap()
    }

    #[test]
    fn full_boxes_slope_is_dimension() {
        let g = GridSpec::new(2, 10, 1).unwrap();
        let a = Construction::Box.build(&g).unwrap();
        let params = ExperimentParams::new((6..=10).collect(), 0, 11);
        let src = XSource::TentGrid { per_axis: 10, lo: [0.0; 3], hi: [1.0, 1.0, 0.0] };
        let r = translation_experiment(&a, &a, &Diffeo::Identity, &src, &params, full_box_inputs(2))
            .unwrap();
        let slope = r.fit.as_ref().unwrap().slope;
        assert!((slope - 2.0).abs() <= 0.05, "slope = {slope}");
        assert_eq!(r.verdict, Verdict::BoundRespected);
    }

    #[test]
    fn consistency_identity_rotation_and_unit_dilation() {
        let g1 = GridSpec::new(1, 10, 1).unwrap();
        let c = cantor_set(2, 5, &g1).unwrap();
        let interval = Construction::Interval.build(&g1).unwrap();
        let a = product_set(&[&interval, &c]).unwrap();
        let b = product_set(&[&c, &interval]).unwrap();
        let params = ExperimentParams::new((5..=10).collect(), 64, 23);
        let thr = full_box_inputs(2);
        let src = XSource::TentGrid { per_axis: 8, lo: [0.0; 3], hi: [1.0, 1.0, 0.0] };
        let tr = translation_experiment(&a, &b, &Diffeo::Identity, &src, &params, thr.clone()).unwrap();
        let rot = rotation_experiment(
            &a,
            &b,
            &RotationSource::Explicit(vec![Matrix3::identity()]),
            &src,
            &params,
            thr.clone(),
        )
        .unwrap();
        let dil = dilation_experiment(&a, &b, &[1.0], &src, &params, thr).unwrap();
        for (r1, r2) in tr.records.iter().zip(&rot.records) {
            assert_eq!(r1.params.x, r2.params.x);
            assert_eq!(r1.counts, r2.counts);
        }
        for (r1, r2) in tr.records.iter().zip(&dil.records) {
            assert_eq!(r1.params.x, r2.params.x);
            assert_eq!(r1.counts, r2.counts);
        }
    }

    #[test]
    fn dilation_range_enforced() {
        let g = GridSpec::new(2, 6, 1).unwrap();
        let a = Construction::Box.build(&g).unwrap();
        let params = ExperimentParams::new((3..=6).collect(), 0, 1);
        let src = XSource::TentGrid { per_axis: 8, lo: [0.0; 3], hi: [1.0, 1.0, 0.0] };
        assert!(matches!(
            dilation_experiment(&a, &a, &[0.5], &src, &params, full_box_inputs(2)),
            Err(LabError::BadDilationRange(_))
        ));
    }

    #[test]
    fn verdict_recomputes_from_records() {
        let g = GridSpec::new(2, 8, 1).unwrap();
        let a = Construction::Box.build(&g).unwrap();
        let params = ExperimentParams::new((4..=8).collect(), 0, 5);
        let src = XSource::TentGrid { per_axis: 8, lo: [0.0; 3], hi: [1.0, 1.0, 0.0] };
        let r = translation_experiment(&a, &a, &Diffeo::Identity, &src, &params, full_box_inputs(2))
            .unwrap();
        assert_eq!(r.verdict, r.recompute_verdict(&params.ladder));
    }
}
