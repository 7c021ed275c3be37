//! Level-set experiments: covering counts of `{ y in A : phi_l(x^l, y) = t_l }`
//! realized at scale `2^-j` as the thickened slice
//! `{ y in A^eps : |phi_l(x^l, y) - t_l| <= eps }`, for one or two equations,
//! plus the maximal variant taking a supremum over a dilation grid.

use super::covering::CoverEngine;
use super::sampling::{draw_x_samples, XSource};
use super::{CoveringRecord, ExperimentParams, ExperimentResult, LabError, SampleParams};
use crate::grid::{CellSet, Point};
use crate::mapspec::{check_fibration, phong_stein_det, LevelValues, MapSpec};
use crate::measure::DiscreteMeasure;
use crate::predict::Thresholds;
use rayon::prelude::*;

/// Salt separating the second measure's sample stream.
const SECOND_STREAM_SALT: u64 = 0x517c_c1b7_2722_0a95;
/// Curvature certificates below this floor abort the experiment.
const DET_FLOOR: f64 = 1e-6;

fn curvature_gate(spec: &MapSpec, d: usize, levels: &[f64], seed: u64) -> Result<(), LabError> {
    for (phi, &t) in spec.maps.iter().zip(levels) {
        let min_det = phong_stein_det(phi, d, t, 0.02, 64, seed)?;
        if min_det < DET_FLOOR {
            return Err(LabError::DegenerateFamily(min_det));
        }
    }
    if spec.maps.len() == 2 {
        let phis = [spec.maps[0].clone(), spec.maps[1].clone()];
        let m = check_fibration(&phis, d, [levels[0], levels[1]], 0.02, 64, seed)?;
        if m < DET_FLOOR {
            return Err(LabError::DegenerateFamily(m));
        }
    }
    Ok(())
}

/// Sorted values of `phi(x, center)` over the thickened cells of one level;
/// each level count is then two binary searches.
fn sorted_values(
    engine: &CoverEngine,
    level_idx: usize,
    phi: &crate::mapspec::PhiFamily,
    d: usize,
    x: Point,
) -> Vec<f64> {
    let lvl = &engine.levels[level_idx];
    let mut vals: Vec<f64> = lvl
        .a_cells
        .iter()
        .map(|&c| phi.eval(d, x, lvl.grid.center(c)))
        .collect();
    vals.sort_unstable_by(f64::total_cmp);
    vals
}

fn band_count(sorted: &[f64], t: f64, eps: f64) -> u64 {
    let lo = sorted.partition_point(|&v| v < t - eps);
    let hi = sorted.partition_point(|&v| v <= t + eps);
    (hi - lo) as u64
}

/// Covering counts of level-set slices through `A`, one or two equations.
/// With two equations the two translation parameters are drawn from the two
/// measures independently and the slice is the joint band.
pub fn level_set_experiment(
    a: &CellSet,
    spec: &MapSpec,
    mus: &[&DiscreteMeasure],
    params: &ExperimentParams,
    threshold: Thresholds,
) -> Result<ExperimentResult, LabError> {
    let d = a.grid().d();
    let m = spec.m_equations();
    if mus.len() != m {
        return Err(LabError::WrongMeasureCount { need: m, got: mus.len() });
    }
    let levels: Vec<f64> = match (&spec.level, m) {
        (LevelValues::Scalar(t), 1) => vec![*t],
        (LevelValues::Pair(t1, t2), 2) => vec![*t1, *t2],
        _ => return Err(LabError::WrongMeasureCount { need: m, got: mus.len() }),
    };
    curvature_gate(spec, d, &levels, params.seed)?;
    let engine = CoverEngine::new(a, None, &params.ladder)?;
    let xs1 = draw_x_samples(
        &XSource::FromMeasure { mu: mus[0], jitter: true },
        a.grid(),
        params.n_samples,
        params.seed,
    )?;
    let xs2 = if m == 2 {
        Some(draw_x_samples(
            &XSource::FromMeasure { mu: mus[1], jitter: true },
            a.grid(),
            params.n_samples,
            params.seed ^ SECOND_STREAM_SALT,
        )?)
    } else {
        None
    };
    let items: Vec<(SampleParams, Point, Option<Point>, f64)> = xs1
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut p = SampleParams::at(i, s.x);
            p.x_cell = s.cell;
            let x2 = xs2.as_ref().map(|v| v[i].x);
            p.x2 = x2;
            (p, s.x, x2, s.weight)
        })
        .collect();
    let records: Vec<CoveringRecord> = items
        .par_iter()
        .map(|(p, x1, x2, w)| {
            let counts: Vec<(u32, u64)> = (0..engine.levels.len())
                .map(|li| {
                    let lvl = &engine.levels[li];
                    let eps = lvl.eps;
                    let n = match m {
                        1 => {
                            let vals = sorted_values(&engine, li, &spec.maps[0], d, *x1);
                            band_count(&vals, levels[0], eps)
                        }
                        _ => {
                            let x2 = x2.expect("two-equation sample");
                            engine.count_where(lvl, |y| {
                                (spec.maps[0].eval(d, *x1, y) - levels[0]).abs() <= eps
                                    && (spec.maps[1].eval(d, x2, y) - levels[1]).abs() <= eps
                            })
                        }
                    };
                    (lvl.j, n)
                })
                .collect();
            CoveringRecord::finish(p.clone(), counts, *w)
        })
        .collect();
    Ok(ExperimentResult::assemble(records, &params.ladder, threshold, params.margin))
}

/// Maximal variant: per sample the count at each scale is the supremum over
/// the dilation grid before averaging.
pub fn maximal_experiment(
    a: &CellSet,
    spec: &MapSpec,
    mu: &DiscreteMeasure,
    t_grid: &[f64],
    params: &ExperimentParams,
    threshold: Thresholds,
) -> Result<ExperimentResult, LabError> {
    let d = a.grid().d();
    if spec.m_equations() != 1 {
        return Err(LabError::WrongMeasureCount { need: 1, got: spec.m_equations() });
    }
    if t_grid.is_empty() {
        return Err(LabError::NoSamples);
    }
    for &t in t_grid {
        if !(1.0..=2.0).contains(&t) {
            return Err(LabError::BadDilationRange(t));
        }
    }
    curvature_gate(spec, d, &[t_grid[0]], params.seed)?;
    let engine = CoverEngine::new(a, None, &params.ladder)?;
    let xs = draw_x_samples(
        &XSource::FromMeasure { mu, jitter: true },
        a.grid(),
        params.n_samples,
        params.seed,
    )?;
    let records: Vec<CoveringRecord> = xs
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut p = SampleParams::at(i, s.x);
            p.x_cell = s.cell;
            let counts: Vec<(u32, u64)> = (0..engine.levels.len())
                .map(|li| {
                    let lvl = &engine.levels[li];
                    let vals = sorted_values(&engine, li, &spec.maps[0], d, s.x);
                    let best = t_grid
                        .iter()
                        .map(|&t| band_count(&vals, t, lvl.eps))
                        .max()
                        .unwrap_or(0);
                    (lvl.j, best)
                })
                .collect();
            CoveringRecord::finish(p, counts, s.weight)
        })
        .collect();
    Ok(ExperimentResult::assemble(records, &params.ladder, threshold, params.margin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::Construction;
    use crate::grid::GridSpec;
    use crate::mapspec::PhiFamily;
    use crate::predict::{predict, BoundInputs, BoundKind};

    fn box_measure(g: &GridSpec) -> DiscreteMeasure {
        DiscreteMeasure::uniform(CellSet::full(*g).unwrap(), "box").unwrap()
    }

    #[test]
    fn hyperplane_slice_of_the_full_square() {
        // slices x . y = 1/2 of the full square are segments for most x:
        // slope near 1
        let g = GridSpec::new(2, 10, 1).unwrap();
        let a = Construction::Box.build(&g).unwrap();
        let mu = box_measure(&g);
        let spec = MapSpec::single(PhiFamily::DotProduct, 0.5);
        let mut inputs = BoundInputs { d: 2, ..Default::default() };
        inputs.s_a = Some(2.0);
        inputs.alpha = Some(2.0);
        let thr = predict(BoundKind::LevelSet, &inputs).unwrap();
        let params = ExperimentParams::new((5..=10).collect(), 128, 7);
        let r = level_set_experiment(&a, &spec, &[&mu], &params, thr).unwrap();
        let slope = r.fit.as_ref().unwrap().slope;
        assert!((slope - 1.0).abs() <= 0.2, "slope = {slope}");
    }

    #[test]
    fn two_spheres_slice_of_the_full_cube() {
        // spheres of radius one around two opposite corner regions cut a
        // circle out of the cube
        let g = GridSpec::new(3, 7, 1).unwrap();
        let a = Construction::Box.build(&g).unwrap();
        let corner = |lo: [u32; 3]| {
            let cells: Vec<_> = (0..32u32)
                .flat_map(|x| (0..32u32).flat_map(move |y| (0..32u32).map(move |z| [x, y, z])))
                .map(|c| [c[0] + lo[0], c[1] + lo[1], c[2] + lo[2]])
                .collect();
            DiscreteMeasure::uniform(CellSet::new(g, cells).unwrap(), "corner").unwrap()
        };
        let mu1 = corner([0, 0, 0]);
        let mu2 = corner([96, 0, 0]);
        let spec = MapSpec::pair(PhiFamily::Distance, PhiFamily::Distance, [1.0, 1.0]);
        let mut inputs = BoundInputs { d: 3, ..Default::default() };
        inputs.s_a = Some(3.0);
        inputs.alpha = Some(3.0);
        inputs.alpha2 = Some(3.0);
        let thr = predict(BoundKind::TwoSurface, &inputs).unwrap();
        let params = ExperimentParams::new((3..=7).collect(), 64, 9);
        let r = level_set_experiment(&a, &spec, &[&mu1, &mu2], &params, thr).unwrap();
        let slope = r.fit.as_ref().unwrap().slope;
        assert!((slope - 1.0).abs() <= 0.35, "slope = {slope}");
    }

    #[test]
    fn pair_constraint_degenerates_when_parameters_coincide() {
        // same equation, same level, same translation parameter: the joint
        // band is exactly the single band at every scale
        let g = GridSpec::new(2, 9, 1).unwrap();
        let a = Construction::Box.build(&g).unwrap();
        let ladder: Vec<u32> = (4..=9).collect();
        let engine = CoverEngine::new(&a, None, &ladder).unwrap();
        let phi = PhiFamily::Distance;
        let (x, t) = ([0.83, 0.31, 0.0], 0.9);
        for li in 0..engine.levels.len() {
            let lvl = &engine.levels[li];
            let vals = sorted_values(&engine, li, &phi, 2, x);
            let single = band_count(&vals, t, lvl.eps);
            let joint = lvl
                .a_cells
                .iter()
                .filter(|&&c| {
                    let y = lvl.grid.center(c);
                    (phi.eval(2, x, y) - t).abs() <= lvl.eps
                        && (phi.eval(2, x, y) - t).abs() <= lvl.eps
                })
                .count() as u64;
            assert_eq!(single, joint, "level {}", lvl.j);
        }
    }

    #[test]
    fn maximal_with_single_t_matches_level_set() {
        let g = GridSpec::new(2, 9, 1).unwrap();
        let a = Construction::Box.build(&g).unwrap();
        let mu = box_measure(&g);
        let spec = MapSpec::single(PhiFamily::Distance, 1.0);
        let mut inputs = BoundInputs { d: 2, ..Default::default() };
        inputs.s_a = Some(2.0);
        inputs.alpha = Some(2.0);
        let thr_l = predict(BoundKind::LevelSet, &inputs).unwrap();
        let thr_m = predict(BoundKind::MaximalLevelSet, &inputs).unwrap();
        let params = ExperimentParams::new((4..=9).collect(), 64, 21);
        let single = level_set_experiment(&a, &spec, &[&mu], &params, thr_l).unwrap();
        let maximal = maximal_experiment(&a, &spec, &mu, &[1.0], &params, thr_m).unwrap();
        for (r1, r2) in single.records.iter().zip(&maximal.records) {
            assert_eq!(r1.counts, r2.counts);
        }
    }

    #[test]
    fn wrong_measure_count_rejected() {
        let g = GridSpec::new(2, 8, 1).unwrap();
        let a = Construction::Box.build(&g).unwrap();
        let mu = box_measure(&g);
        let spec = MapSpec::pair(PhiFamily::Distance, PhiFamily::Distance, [1.0, 1.0]);
        let mut inputs = BoundInputs { d: 2, ..Default::default() };
        inputs.s_a = Some(2.0);
        inputs.alpha = Some(2.0);
        inputs.alpha2 = Some(2.0);
        let thr = predict(BoundKind::TwoSurface, &inputs).unwrap();
        let params = ExperimentParams::new((4..=8).collect(), 64, 3);
        assert!(matches!(
            level_set_experiment(&a, &spec, &[&mu], &params, thr),
            Err(LabError::WrongMeasureCount { need: 2, got: 1 })
        ));
    }
}
