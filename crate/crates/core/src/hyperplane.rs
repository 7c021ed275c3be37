//! Hyperplane slab exponent: for each radius `delta`, the supremum over
//! directions of the mass in the slab `{ y : |(y - origin) . w| <= delta }`,
//! fitted on a log-log ladder. The fitted slope estimates `s_B - h` where `h`
//! bounds the dimension of hyperplane slices.

use crate::fit::{fit_line_spanning, DecayFit, FitError};
use crate::grid::Point;
use crate::measure::DiscreteMeasure;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HyperplaneError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("need at least 32 directions, got {0}")]
    TooFewDirections(usize),
    #[error("slab radius {delta} below the 2*epsilon floor {floor}")]
    ScaleTooFine { delta: f64, floor: f64 },
    #[error("radius ladder spans {got:.2} octaves, need at least 3")]
    TooFewOctaves { got: f64 },
}

/// Per-delta worst direction and the fitted exponent.
#[derive(Debug, Clone)]
pub struct SlabProfile {
    pub fit: DecayFit,
    /// `(delta, sup mass, argmax direction)` per radius.
    pub per_delta: Vec<(f64, f64, [f64; 3])>,
}

/// Measures `sup_w mu{ y : |(y - origin) . w| <= delta }` over seeded unit
/// directions plus the coordinate axes. The origin defaults to the box
/// center; pass the structural center of the measure (slabs pivot on it).
pub fn hyperplane_exponent(
    mu: &DiscreteMeasure,
    n_directions: usize,
    deltas: &[f64],
    origin: Option<Point>,
    seed: u64,
) -> Result<SlabProfile, HyperplaneError> {
    if n_directions < 32 {
        return Err(HyperplaneError::TooFewDirections(n_directions));
    }
    let floor = 2.0 * mu.grid().epsilon();
    for &delta in deltas {
        if delta < floor {
            return Err(HyperplaneError::ScaleTooFine { delta, floor });
        }
    }
    let span = octave_span(deltas);
    if span + 1e-12 < 3.0 {
        return Err(HyperplaneError::TooFewOctaves { got: span });
    }
    let d = mu.grid().d();
    let origin = origin.unwrap_or_else(|| mu.grid().box_center());
    let mut dirs = Vec::with_capacity(n_directions + d);
    for i in 0..d {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        dirs.push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while dirs.len() < n_directions + d {
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
        dirs.push(v);
    }
    // one sorted projection pass per direction, then every radius is a
    // binary search into the prefix masses
    let mut tables: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(dirs.len());
    for &w in &dirs {
        let mut proj: Vec<(f64, f64)> = mu
            .support()
            .cells()
            .iter()
            .zip(mu.weights())
            .map(|(c, &wt)| {
                let p = mu.grid().center(*c);
                let dot: f64 = (0..d).map(|i| (p[i] - origin[i]) * w[i]).sum();
                (dot.abs(), wt)
            })
            .collect();
        proj.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut keys = Vec::with_capacity(proj.len());
        let mut mass = Vec::with_capacity(proj.len());
        let mut acc = 0.0;
        for (dot, wt) in proj {
            acc += wt;
            keys.push(dot);
            mass.push(acc);
        }
        tables.push((keys, mass));
    }
    let mut per_delta = Vec::with_capacity(deltas.len());
    let mut pts = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut sup = 0.0;
        let mut arg = dirs[0];
        for (i, (keys, mass)) in tables.iter().enumerate() {
            let idx = keys.partition_point(|&v| v <= delta);
            let m = if idx == 0 { 0.0 } else { mass[idx - 1] };
            if m > sup {
                sup = m;
                arg = dirs[i];
            }
        }
        per_delta.push((delta, sup, arg));
        if sup > 0.0 {
            pts.push((delta.log2(), sup.log2()));
        }
    }
    let fit = fit_line_spanning(&pts, 3.0)?;
    Ok(SlabProfile { fit, per_delta })
}

fn octave_span(deltas: &[f64]) -> f64 {
    let (lo, hi) = deltas
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if lo <= 0.0 {
        return 0.0;
    }
    (hi / lo).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{surface_measure, SurfaceKind};
    use crate::grid::{CellSet, GridSpec};
    use crate::measure::dyadic_radii;

    #[test]
    fn circle_about_its_center_has_unit_slope() {
        let g = GridSpec::new(2, 10, 1).unwrap();
        let mu = surface_measure(SurfaceKind::Sphere, &g).unwrap();
        let deltas = dyadic_radii(4, 8);
        let profile = hyperplane_exponent(&mu, 32, &deltas, None, 3).unwrap();
        assert!(
            (profile.fit.slope - 1.0).abs() < 0.15,
            "slope = {}",
            profile.fit.slope
        );
    }

    #[test]
    fn segment_contained_in_hyperplane_has_flat_slope() {
        let g = GridSpec::new(2, 8, 1).unwrap();
        let cells: Vec<_> = (0..256u32).map(|i| [i, 0, 0]).collect();
        let mu = DiscreteMeasure::uniform(CellSet::new(g, cells).unwrap(), "segment").unwrap();
        // pivot on the segment itself: the axis slab swallows all the mass
        let deltas = dyadic_radii(3, 6);
        let profile = hyperplane_exponent(&mu, 32, &deltas, Some([0.5, 0.5 / 256.0, 0.0]), 3).unwrap();
        assert!(profile.fit.slope.abs() < 0.05, "slope = {}", profile.fit.slope);
        let top = profile.per_delta.last().unwrap();
        assert!((top.1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn direction_and_ladder_preconditions() {
        let g = GridSpec::new(2, 8, 1).unwrap();
        let mu = surface_measure(SurfaceKind::Sphere, &g).unwrap();
        let deltas = dyadic_radii(4, 6);
        assert!(matches!(
            hyperplane_exponent(&mu, 8, &deltas, None, 3),
            Err(HyperplaneError::TooFewDirections(8))
        ));
        assert!(matches!(
            hyperplane_exponent(&mu, 32, &[0.25, 0.2], None, 3),
            Err(HyperplaneError::TooFewOctaves { .. })
        ));
        assert!(matches!(
            hyperplane_exponent(&mu, 32, &[0.001, 0.25], None, 3),
            Err(HyperplaneError::ScaleTooFine { .. })
        ));
    }
}
