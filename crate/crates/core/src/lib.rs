//! Sparse dyadic-grid geometry at desk scale: compact sets in `[0,L]^d`
//! (`d <= 3`) stored as sorted cell lists, finite measures on them, and the
//! estimators and experiments built on top: box-counting dimension, Riesz
//! energies (spatial and frequency side), Fourier decay exponents,
//! hyperplane slab exponents, covering numbers of intersections under
//! translation / rotation / dilation / level-set families, and exact lattice
//! proximity counting.

pub mod construct;
pub mod diffeo;
pub mod dimension;
pub mod dioph;
pub mod energy;
pub mod fit;
pub mod fourier;
pub mod grid;
pub mod hyperplane;
pub mod lab;
pub mod mapspec;
pub mod measure;
pub mod predict;

pub use diffeo::Diffeo;
pub use fit::DecayFit;
pub use grid::{Cell, CellSet, GridSpec, Point, Transform};
pub use measure::{AhlforsReport, DiscreteMeasure};

// re-exported so callers can build rotation matrices without pinning their
// own copy of the linear-algebra crate
pub use nalgebra;

/// Caps the rayon worker count for all parallel loops in this crate.
///
/// Call once at startup, before any estimator runs. Returns an error string
/// when a global pool was already installed.
pub fn set_worker_threads(n: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}
