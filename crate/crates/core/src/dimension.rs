//! Box counting and the upper Minkowski dimension estimate it feeds.

use crate::fit::{fit_line_spanning, DecayFit, FitError};
use crate::grid::{CellSet, GridError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DimensionError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("set is empty at level {0}")]
    EmptyAtLevel(u32),
}

/// Number of side `2^-j` dyadic cells meeting the set, exact by coordinate
/// shifting.
pub fn box_count(a: &CellSet, j: u32) -> Result<u64, DimensionError> {
    if j > a.grid().k() {
        return Err(GridError::BadLevel { level: j, k: a.grid().k() }.into());
    }
    if a.is_empty() {
        return Ok(0);
    }
    Ok(a.coarsen(j)?.len() as u64)
}

/// Least-squares slope of `log2 N(j)` against `j` over the supplied levels.
/// The levels must span at least four octaves; they need not be contiguous,
/// so constructions with a natural scale stride can be fitted on it.
pub fn minkowski_dim(a: &CellSet, levels: &[u32]) -> Result<DecayFit, DimensionError> {
    let mut pts = Vec::with_capacity(levels.len());
    for &j in levels {
        let n = box_count(a, j)?;
        if n == 0 {
            return Err(DimensionError::EmptyAtLevel(j));
        }
        pts.push((j as f64, (n as f64).log2()));
    }
    Ok(fit_line_spanning(&pts, 4.0)?)
}

/// Contiguous level ladder `lo..=hi`.
pub fn level_range(lo: u32, hi: u32) -> Vec<u32> {
    (lo..=hi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use approx::assert_relative_eq;

    #[test]
    fn full_square_counts() {
        let g = GridSpec::new(2, 6, 1).unwrap();
        let a = CellSet::full(g).unwrap();
        assert_eq!(box_count(&a, 4).unwrap(), 256);
        assert_eq!(box_count(&a, 0).unwrap(), 1);
        assert_eq!(box_count(&CellSet::empty(g), 3).unwrap(), 0);
    }

    #[test]
    fn full_square_dimension_two() {
        let g = GridSpec::new(2, 8, 1).unwrap();
        let a = CellSet::full(g).unwrap();
        let fit = minkowski_dim(&a, &level_range(0, 8)).unwrap();
        assert_relative_eq!(fit.slope, 2.0, epsilon = 1e-9);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn level_above_resolution_rejected() {
        let g = GridSpec::new(1, 4, 1).unwrap();
        let a = CellSet::full(g).unwrap();
        assert!(box_count(&a, 5).is_err());
    }

    #[test]
    fn span_enforced() {
        let g = GridSpec::new(1, 8, 1).unwrap();
        let a = CellSet::full(g).unwrap();
        assert!(minkowski_dim(&a, &level_range(3, 5)).is_err());
    }
}
