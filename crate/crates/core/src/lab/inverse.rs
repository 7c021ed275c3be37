//! Inverse bound: if every sampled parameter admits a level whose slice of
//! `E` is at least `gamma`-dimensional, the dimension of `E` itself is
//! bounded below by `d * gamma / (d - 1)`. The experiment scans a level grid
//! per sample, takes the best slice slope as the witness level, and checks
//! the resulting bound against the measured box dimension of `E`.

use super::covering::CoverEngine;
use super::{per_sample_slope, LabError};
use crate::dimension::minkowski_dim;
use crate::fit::DecayFit;
use crate::grid::{CellSet, Point};
use crate::mapspec::PhiFamily;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct InverseParams {
    pub ladder: Vec<u32>,
    /// Candidate levels; zero is excluded by construction.
    pub t_grid: Vec<f64>,
    pub seed: u64,
    /// Slack in the bound comparison.
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct InverseReport {
    /// Largest slice dimension achieved uniformly: `min_x max_t slope`.
    pub gamma_uniform: f64,
    /// The parameter achieving the minimum.
    pub witness_x: Point,
    pub witness_t: f64,
    pub minkowski: DecayFit,
    /// `d * gamma / (d - 1)`.
    pub lower_bound: f64,
    /// Whether the bound stays below the measured dimension plus margin.
    pub satisfied: bool,
    /// `(x, best slope, best t)` per sample.
    pub per_x: Vec<(Point, f64, f64)>,
}

/// Unit directions for the pairing family where the parameter is a normal
/// vector.
pub fn unit_directions(d: usize, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n + d);
    for i in 0..d {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        out.push(v);
    }
    while out.len() < n + d {
        let mut v = [0.0; 3];
        let mut norm2 = 0.0;
        for slot in v.iter_mut().take(d) {
            *slot = rng.random::<f64>() * 2.0 - 1.0;
            norm2 += *slot * *slot;
        }
        if norm2 < 1e-4 || norm2 > 1.0 {
            continue;
        }
        let norm = norm2.sqrt();
        for slot in v.iter_mut().take(d) {
            *slot /= norm;
        }
        out.push(v);
    }
    out
}

pub fn inverse_experiment(
    e: &CellSet,
    phi: &PhiFamily,
    xs: &[Point],
    params: &InverseParams,
) -> Result<InverseReport, LabError> {
    if xs.is_empty() || params.t_grid.is_empty() {
        return Err(LabError::NoSamples);
    }
    if params.t_grid.iter().any(|t| t.abs() < 1e-9) {
        return Err(LabError::NoSamples);
    }
    let d = e.grid().d();
    let engine = CoverEngine::new(e, None, &params.ladder)?;
    let per_x: Vec<(Point, f64, f64)> = xs
        .par_iter()
        .map(|&x| {
            let mut best = (0.0f64, params.t_grid[0]);
            // sorted slice values once per level, then every t is two
            // binary searches
            let sorted: Vec<Vec<f64>> = engine
                .levels
                .iter()
                .map(|lvl| {
                    let mut vals: Vec<f64> = lvl
                        .a_cells
                        .iter()
                        .map(|&c| phi.eval(d, x, lvl.grid.center(c)))
                        .collect();
                    vals.sort_unstable_by(f64::total_cmp);
                    vals
                })
                .collect();
            for &t in &params.t_grid {
                let counts: Vec<(u32, u64)> = engine
                    .levels
                    .iter()
                    .zip(&sorted)
                    .map(|(lvl, vals)| {
                        let lo = vals.partition_point(|&v| v < t - lvl.eps);
                        let hi = vals.partition_point(|&v| v <= t + lvl.eps);
                        (lvl.j, (hi - lo) as u64)
                    })
                    .collect();
                if let Some(slope) = per_sample_slope(&counts) {
                    if slope > best.0 {
                        best = (slope, t);
                    }
                }
            }
            (x, best.0, best.1)
        })
        .collect();
    let (witness_x, gamma_uniform, witness_t) = per_x
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|&(x, g, t)| (x, g, t))
        .expect("nonempty samples");
    let minkowski = minkowski_dim(e, &params.ladder).map_err(|_| LabError::BadLadder)?;
    let lower_bound = d as f64 * gamma_uniform / (d as f64 - 1.0);
    let satisfied = lower_bound <= minkowski.slope + params.margin;
    Ok(InverseReport {
        gamma_uniform,
        witness_x,
        witness_t,
        minkowski,
        lower_bound,
        satisfied,
        per_x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::Construction;
    use crate::grid::GridSpec;

    fn t_grid() -> Vec<f64> {
        // symmetric about zero so directions with negative components still
        // find a level crossing the box
        let mut ts: Vec<f64> = (1..=24).map(|i| 0.05 + i as f64 / 16.0).collect();
        let negs: Vec<f64> = ts.iter().map(|t| -t).collect();
        ts.extend(negs);
        ts
    }

    #[test]
    fn full_square_is_tight_for_hyperplanes() {
        // every direction admits a line meeting the square in dimension 1,
        // so the bound reaches 2 and matches the dimension exactly
        let g = GridSpec::new(2, 9, 1).unwrap();
        let e = Construction::Box.build(&g).unwrap();
        let params = InverseParams {
            ladder: (4..=9).collect(),
            t_grid: t_grid(),
            seed: 3,
            margin: 0.1,
        };
        let xs = unit_directions(2, 32, 5);
        let r = inverse_experiment(&e, &PhiFamily::DotProduct, &xs, &params).unwrap();
        assert!(r.gamma_uniform > 0.85, "gamma = {}", r.gamma_uniform);
        assert!(r.satisfied, "bound {} vs dim {}", r.lower_bound, r.minkowski.slope);
    }

    #[test]
    fn circle_slices_are_pointlike() {
        // lines never contain arcs: gamma collapses and the bound is
        // trivially satisfied
        let g = GridSpec::new(2, 9, 1).unwrap();
        let e = Construction::Surface(crate::construct::SurfaceKind::Sphere)
            .build(&g)
            .unwrap();
        let params = InverseParams {
            ladder: (4..=9).collect(),
            t_grid: t_grid(),
            seed: 3,
            margin: 0.1,
        };
        let xs = unit_directions(2, 32, 5);
        let r = inverse_experiment(&e, &PhiFamily::DotProduct, &xs, &params).unwrap();
        assert!(r.gamma_uniform < 0.5, "gamma = {}", r.gamma_uniform);
        assert!(r.satisfied);
    }

    #[test]
    fn zero_level_rejected() {
        let g = GridSpec::new(2, 8, 1).unwrap();
        let e = Construction::Box.build(&g).unwrap();
        let params = InverseParams {
            ladder: (4..=8).collect(),
            t_grid: vec![0.0, 0.5],
            seed: 1,
            margin: 0.1,
        };
        assert!(inverse_experiment(&e, &PhiFamily::DotProduct, &[[1.0, 0.0, 0.0]], &params).is_err());
    }
}
