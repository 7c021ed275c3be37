//! Seeded sampling of translation parameters and orthogonal maps. Sample
//! lists are always generated serially from the seed so results never depend
//! on worker count.

use super::LabError;
use crate::grid::{Cell, GridSpec, Point};
use crate::measure::DiscreteMeasure;
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// One translation sample with its averaging weight.
#[derive(Debug, Clone, PartialEq)]
pub struct XSample {
    pub x: Point,
    pub weight: f64,
    /// Cell on the sampling grid, when grid-based.
    pub cell: Option<Cell>,
}

/// Where translation samples come from.
#[derive(Debug, Clone)]
pub enum XSource<'a> {
    /// Tent-profile quadrature on a regular grid over `[lo, hi]`: the weight
    /// is the normalized product of per-axis tents, a concrete normalized
    /// bump profile.
    TentGrid { per_axis: usize, lo: Point, hi: Point },
    /// Uniform weights at the cell centers of a dyadic grid over the box
    /// (resolution `kx`), jittered inside the cell when asked; this is the
    /// mode exceptional-set box counting needs.
    DyadicGrid { kx: u32, jitter: bool },
    /// Draw from a measure by weight, jittered inside the support cell.
    FromMeasure { mu: &'a DiscreteMeasure, jitter: bool },
}

/// Generates the sample list. `n_samples` applies to `FromMeasure`; the grid
/// sources have their count fixed by the grid itself.
pub fn draw_x_samples(
    src: &XSource,
    grid: &GridSpec,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<XSample>, LabError> {
    let d = grid.d();
    match src {
        XSource::TentGrid { per_axis, lo, hi } => {
            if per_axis.pow(d as u32) < 64 {
                return Err(LabError::TooFewSamples(per_axis.pow(d as u32)));
            }
            let m = *per_axis;
            let mut out = Vec::with_capacity(m.pow(d as u32));
            let lim = |i: usize| if i < d { m } else { 1 };
            let mut total = 0.0;
            for iz in 0..lim(2) {
                for iy in 0..lim(1) {
                    for ix in 0..lim(0) {
                        let idx = [ix, iy, iz];
                        let mut x = [0.0; 3];
                        let mut w = 1.0;
                        for a in 0..d {
                            let frac = (idx[a] as f64 + 0.5) / m as f64;
                            x[a] = lo[a] + frac * (hi[a] - lo[a]);
                            w *= 1.0 - (2.0 * frac - 1.0).abs();
                        }
                        total += w;
                        out.push(XSample { x, weight: w, cell: None });
                    }
                }
            }
            for s in &mut out {
                s.weight /= total;
            }
            Ok(out)
        }
        XSource::DyadicGrid { kx, jitter } => {
            if *kx < 4 {
                return Err(LabError::XGridTooCoarse(*kx));
            }
            let xgrid = GridSpec::new(d, *kx, grid.box_side()).map_err(LabError::Grid)?;
            let side = xgrid.cells_per_axis() as u32;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let eps = xgrid.epsilon();
            let lim = |i: usize| if i < d { side } else { 1 };
            let count = (side as usize).pow(d as u32);
            let w = 1.0 / count as f64;
            let mut out = Vec::with_capacity(count);
            for iz in 0..lim(2) {
                for iy in 0..lim(1) {
                    for ix in 0..lim(0) {
                        let cell = [ix, iy, iz];
                        let mut x = xgrid.center(cell);
                        if *jitter {
                            for a in 0..d {
                                x[a] += (rng.random::<f64>() - 0.5) * eps;
                            }
                        }
                        out.push(XSample { x, weight: w, cell: Some(cell) });
                    }
                }
            }
            Ok(out)
        }
        XSource::FromMeasure { mu, jitter } => {
            if n_samples < 64 {
                return Err(LabError::TooFewSamples(n_samples));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // cumulative weights for inversion sampling
            let mut cdf = Vec::with_capacity(mu.weights().len());
            let mut acc = 0.0;
            for &w in mu.weights() {
                acc += w;
                cdf.push(acc);
            }
            let eps = mu.grid().epsilon();
            let w = 1.0 / n_samples as f64;
            let mut out = Vec::with_capacity(n_samples);
            for _ in 0..n_samples {
                let u = rng.random::<f64>() * acc;
                let idx = cdf.partition_point(|&v| v < u).min(cdf.len() - 1);
                let mut x = mu.grid().center(mu.support().cells()[idx]);
                if *jitter {
                    for a in 0..d {
                        x[a] += (rng.random::<f64>() - 0.5) * eps;
                    }
                }
                out.push(XSample { x, weight: w, cell: None });
            }
            Ok(out)
        }
    }
}

/// Seeded orthogonal matrices distributed by the invariant measure: uniform
/// angle in the plane, uniform unit quaternion in space, and in both cases a
/// reflection with probability one half so the full orthogonal group is
/// covered.
pub fn draw_rotations(d: usize, n: usize, seed: u64) -> Result<Vec<Matrix3<f64>>, LabError> {
    if d < 2 {
        return Err(LabError::RotationNeedsPlane);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut g = if d == 2 {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let (s, c) = theta.sin_cos();
            Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
        } else {
            let q: [f64; 4] = {
                let mut v = [0.0; 4];
                for slot in &mut v {
                    *slot = StandardNormal.sample(&mut rng);
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                [v[0] / norm, v[1] / norm, v[2] / norm, v[3] / norm]
            };
            quaternion_matrix(q)
        };
        if rng.random::<f64>() < 0.5 {
            // flip one axis: determinant -1
            for r in 0..3 {
                g[(r, d - 1)] = -g[(r, d - 1)];
            }
        }
        out.push(g);
    }
    Ok(out)
}

fn quaternion_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellSet;

    #[test]
    fn tent_weights_normalized_and_peaked() {
        let g = GridSpec::new(2, 6, 1).unwrap();
        let src = XSource::TentGrid { per_axis: 9, lo: [0.0; 3], hi: [1.0, 1.0, 0.0] };
        let samples = draw_x_samples(&src, &g, 0, 1).unwrap();
        let total: f64 = samples.iter().map(|s| s.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let center = samples.iter().max_by(|a, b| a.weight.total_cmp(&b.weight)).unwrap();
        assert!((center.x[0] - 0.5).abs() < 0.06 && (center.x[1] - 0.5).abs() < 0.06);
    }

    #[test]
    fn measure_sampling_is_seed_stable() {
        let g = GridSpec::new(2, 5, 1).unwrap();
        let mu = DiscreteMeasure::uniform(CellSet::full(g).unwrap(), "u").unwrap();
        let src = XSource::FromMeasure { mu: &mu, jitter: true };
        let a = draw_x_samples(&src, &g, 64, 9).unwrap();
        let b = draw_x_samples(&src, &g, 64, 9).unwrap();
        assert_eq!(a, b);
        let c = draw_x_samples(&src, &g, 64, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rotations_are_orthogonal_and_balanced() {
        for d in [2usize, 3] {
            let gs = draw_rotations(d, 4096, 3).unwrap();
            let mut mean = [0.0f64; 3];
            let mut second = [0.0f64; 3];
            let mut dets = 0i64;
            for g in &gs {
                let gtg = g.transpose() * g;
                for i in 0..3 {
                    for j in 0..3 {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((gtg[(i, j)] - want).abs() < 1e-9);
                    }
                }
                let det = g.determinant();
                assert!((det.abs() - 1.0).abs() < 1e-9);
                dets += det.signum() as i64;
                let e1 = g * nalgebra::Vector3::new(1.0, 0.0, 0.0);
                for i in 0..d {
                    mean[i] += e1[i];
                    second[i] += e1[i] * e1[i];
                }
            }
            // invariance pushes the first moment to zero and splits the
            // second moment evenly across axes
            for i in 0..d {
                assert!((mean[i] / 4096.0).abs() < 0.05, "axis {i}");
                assert!((second[i] / 4096.0 - 1.0 / d as f64).abs() < 0.05, "axis {i}");
            }
            // reflections appear about half the time
            assert!(dets.abs() < 400, "det balance {dets}");
        }
    }

    #[test]
    fn dyadic_grid_covers_cells() {
        let g = GridSpec::new(2, 8, 1).unwrap();
        let src = XSource::DyadicGrid { kx: 4, jitter: false };
        let samples = draw_x_samples(&src, &g, 0, 1).unwrap();
        assert_eq!(samples.len(), 256);
        assert!(samples.iter().all(|s| s.cell.is_some()));
        assert!(matches!(
            draw_x_samples(&XSource::DyadicGrid { kx: 3, jitter: false }, &g, 0, 1),
            Err(LabError::XGridTooCoarse(3))
        ));
    }
}
