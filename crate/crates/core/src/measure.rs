//! Finite measures on sparse cell sets: normalized weight vectors with ball
//! mass queries and a regularity checker that hunts for the smallest constant
//! making two-sided mass bounds hold across scales.

use crate::grid::{Cell, CellSet, GridSpec, Point};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

const NORMALIZATION_TOL: f64 = 1e-9;

/// Centers used by the regularity check are capped at this count; larger
/// supports are subsampled with a seeded shuffle.
pub const MAX_REGULARITY_CENTERS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("support is empty")]
    EmptySupport,
    #[error("weight count {got} does not match support size {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("weight {0} is not strictly positive")]
    NonPositiveWeight(usize),
    #[error("weights sum to {0}, expected 1 within 1e-9")]
    NotNormalized(f64),
    #[error("radius {delta} is below the 2*epsilon quantization floor {floor}")]
    ScaleTooFine { delta: f64, floor: f64 },
    #[error("empty radius range")]
    EmptyRange,
}

/// Nonnegative weights over a cell set, summing to one.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    support: CellSet,
    weights: Vec<f64>,
    label: String,
}

impl DiscreteMeasure {
    pub fn new(support: CellSet, weights: Vec<f64>, label: impl Into<String>) -> Result<Self, MeasureError> {
        if support.is_empty() {
            return Err(MeasureError::EmptySupport);
        }
        if weights.len() != support.len() {
            return Err(MeasureError::LengthMismatch { got: weights.len(), want: support.len() });
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0) {
                return Err(MeasureError::NonPositiveWeight(i));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(MeasureError::NotNormalized(total));
        }
        Ok(DiscreteMeasure { support, weights, label: label.into() })
    }

    /// Equal weight `1/|A|` on every cell.
    pub fn uniform(support: CellSet, label: impl Into<String>) -> Result<Self, MeasureError> {
        if support.is_empty() {
            return Err(MeasureError::EmptySupport);
        }
        let w = 1.0 / support.len() as f64;
        let weights = vec![w; support.len()];
        Ok(DiscreteMeasure { support, weights, label: label.into() })
    }

    /// Normalizes raw nonnegative weights to total mass one.
    pub fn from_raw(support: CellSet, raw: Vec<f64>, label: impl Into<String>) -> Result<Self, MeasureError> {
        if support.is_empty() {
            return Err(MeasureError::EmptySupport);
        }
        if raw.len() != support.len() {
            return Err(MeasureError::LengthMismatch { got: raw.len(), want: support.len() });
        }
        for (i, &w) in raw.iter().enumerate() {
            if !(w > 0.0) {
                return Err(MeasureError::NonPositiveWeight(i));
            }
        }
        let total: f64 = raw.iter().sum();
        let weights = raw.into_iter().map(|w| w / total).collect();
        Ok(DiscreteMeasure { support, weights, label: label.into() })
    }

    pub fn support(&self) -> &CellSet {
        &self.support
    }

    pub fn grid(&self) -> &GridSpec {
        self.support.grid()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mass of the Euclidean ball `B(x, delta)`, summing weights of cells
    /// whose centers fall inside. Radii under `2 * epsilon` are refused since
    /// grid quantization dominates there.
    pub fn ball_mass(&self, x: Point, delta: f64) -> Result<f64, MeasureError> {
        let floor = 2.0 * self.grid().epsilon();
        if delta < floor {
            return Err(MeasureError::ScaleTooFine { delta, floor });
        }
        let d = self.grid().d();
        let r2 = delta * delta;
        let mut mass = 0.0;
        for (c, w) in self.support.cells().iter().zip(&self.weights) {
            let p = self.grid().center(*c);
            let mut dist2 = 0.0;
            for i in 0..d {
                let e = p[i] - x[i];
                dist2 += e * e;
            }
            if dist2 <= r2 {
                mass += w;
            }
        }
        Ok(mass)
    }

    /// Two-sided regularity scan: over sampled centers and the supplied radii,
    /// finds the smallest `C` with `C^-1 delta^s <= mass <= C delta^s`.
    pub fn ad_regularity_check(
        &self,
        s: f64,
        deltas: &[f64],
        c_max: f64,
        seed: u64,
    ) -> Result<AhlforsReport, MeasureError> {
        if deltas.is_empty() {
            return Err(MeasureError::EmptyRange);
        }
        let floor = 2.0 * self.grid().epsilon();
        for &delta in deltas {
            if delta < floor {
                return Err(MeasureError::ScaleTooFine { delta, floor });
            }
        }
        let centers = self.sample_centers(seed);
        let index = BucketIndex::build(self);
        let mut per_scale = Vec::with_capacity(deltas.len());
        let mut c_best = 1.0f64;
        for &delta in deltas {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            let ds = delta.powf(s);
            for &c in &centers {
                let x = self.grid().center(c);
                let mass = index.ball_mass(self, x, delta);
                let ratio = mass / ds;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
            c_best = c_best.max(hi).max(1.0 / lo);
            per_scale.push(ScaleRatios { delta, worst_low: lo, worst_high: hi });
        }
        Ok(AhlforsReport { s, c_best, per_scale, pass: c_best <= c_max, n_centers: centers.len() })
    }

    fn sample_centers(&self, seed: u64) -> Vec<Cell> {
        let cells = self.support.cells();
        if cells.len() <= MAX_REGULARITY_CENTERS {
            return cells.to_vec();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = cells.to_vec();
        picked.shuffle(&mut rng);
        picked.truncate(MAX_REGULARITY_CENTERS);
        picked.sort_unstable();
        picked
    }
}

/// Worst mass/`delta^s` ratios seen at one radius.
#[derive(Debug, Clone)]
pub struct ScaleRatios {
    pub delta: f64,
    pub worst_low: f64,
    pub worst_high: f64,
}

/// Outcome of the regularity scan at exponent `s`.
#[derive(Debug, Clone)]
pub struct AhlforsReport {
    pub s: f64,
    pub c_best: f64,
    pub per_scale: Vec<ScaleRatios>,
    pub pass: bool,
    pub n_centers: usize,
}

/// Coarse spatial buckets so repeated ball queries touch only nearby cells.
struct BucketIndex {
    side: f64,
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl BucketIndex {
    fn build(m: &DiscreteMeasure) -> BucketIndex {
        // bucket side of 16 cells balances bucket count against scan width
        let side = 16.0 * m.grid().epsilon();
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, &c) in m.support.cells().iter().enumerate() {
            let p = m.grid().center(c);
            buckets.entry(Self::key(p, side, m.grid().d())).or_default().push(i as u32);
        }
        BucketIndex { side, buckets }
    }

    fn key(p: Point, side: f64, d: usize) -> [i64; 3] {
        let mut k = [0i64; 3];
        for i in 0..d {
            k[i] = (p[i] / side).floor() as i64;
        }
        k
    }

    fn ball_mass(&self, m: &DiscreteMeasure, x: Point, delta: f64) -> f64 {
        let d = m.grid().d();
        let r2 = delta * delta;
        let reach = (delta / self.side).ceil() as i64 + 1;
        let center = Self::key(x, self.side, d);
        let lim = |i: usize| if i < d { reach } else { 0 };
        let mut mass = 0.0;
        for dz in -lim(2)..=lim(2) {
            for dy in -lim(1)..=lim(1) {
                for dx in -lim(0)..=lim(0) {
                    let key = [center[0] + dx, center[1] + dy, center[2] + dz];
                    let Some(ids) = self.buckets.get(&key) else { continue };
                    for &i in ids {
                        let p = m.grid().center(m.support.cells()[i as usize]);
                        let mut dist2 = 0.0;
                        for a in 0..d {
                            let e = p[a] - x[a];
                            dist2 += e * e;
                        }
                        if dist2 <= r2 {
                            mass += m.weights[i as usize];
                        }
                    }
                }
            }
        }
        mass
    }
}

/// Dyadic radius ladder `2^-j` for `j` in `lo..=hi` (descending radii).
pub fn dyadic_radii(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|j| (-(j as f64)).exp2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use approx::assert_relative_eq;

    fn unit_interval(k: u32) -> CellSet {
        let g = GridSpec::new(1, k, 1).unwrap();
        CellSet::full(g).unwrap()
    }

    #[test]
    fn uniform_weights() {
        let g = GridSpec::new(2, 1, 1).unwrap();
        let a = CellSet::full(g).unwrap();
        let m = DiscreteMeasure::uniform(a, "quad").unwrap();
        assert_eq!(m.weights(), &[0.25; 4]);
        let g1 = GridSpec::new(1, 0, 1).unwrap();
        let one = DiscreteMeasure::uniform(CellSet::full(g1).unwrap(), "pt").unwrap();
        assert_eq!(one.weights(), &[1.0]);
        let g4 = GridSpec::new(2, 4, 1).unwrap();
        let m = DiscreteMeasure::uniform(CellSet::full(g4).unwrap(), "sq").unwrap();
        assert_relative_eq!(m.weights()[0], 1.0 / 256.0);
    }

    #[test]
    fn uniform_rejects_empty() {
        let g = GridSpec::new(2, 3, 1).unwrap();
        assert_eq!(
            DiscreteMeasure::uniform(CellSet::empty(g), "e").unwrap_err(),
            MeasureError::EmptySupport
        );
    }

    #[test]
    fn ball_mass_proportional_on_interval() {
        let m = DiscreteMeasure::uniform(unit_interval(8), "u").unwrap();
        let got = m.ball_mass([0.5, 0.0, 0.0], 0.25).unwrap();
        assert!((got - 0.5).abs() <= 1.0 / 256.0 + 1e-12, "got {got}");
    }

    #[test]
    fn ball_mass_total_beyond_diameter() {
        let m = DiscreteMeasure::uniform(unit_interval(6), "u").unwrap();
        let got = m.ball_mass([0.3, 0.0, 0.0], 2.0).unwrap();
        assert_relative_eq!(got, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ball_mass_rejects_fine_scale() {
        let m = DiscreteMeasure::uniform(unit_interval(6), "u").unwrap();
        assert!(matches!(
            m.ball_mass([0.5, 0.0, 0.0], 0.001),
            Err(MeasureError::ScaleTooFine { .. })
        ));
    }

    #[test]
    fn regularity_uniform_square_right_exponent() {
        let g = GridSpec::new(2, 6, 1).unwrap();
        let m = DiscreteMeasure::uniform(CellSet::full(g).unwrap(), "sq").unwrap();
        let deltas = dyadic_radii(1, 5);
        let report = m.ad_regularity_check(2.0, &deltas, 8.0, 7).unwrap();
        assert!(report.pass, "C_best = {}", report.c_best);
        assert!(report.c_best <= 8.0);
    }

    #[test]
    fn regularity_wrong_exponent_blows_up() {
        let g = GridSpec::new(2, 8, 1).unwrap();
        let m = DiscreteMeasure::uniform(CellSet::full(g).unwrap(), "sq").unwrap();
        // six octaves of delta at exponent one force the ratio mass/delta
        // through a factor 2^6
        let deltas = dyadic_radii(1, 7);
        let report = m.ad_regularity_check(1.0, &deltas, 32.0, 7).unwrap();
        assert!(!report.pass, "C_best = {}", report.c_best);
        assert!(report.c_best > 32.0);
    }

    #[test]
    fn bucket_index_matches_direct_scan() {
        let g = GridSpec::new(2, 5, 1).unwrap();
        let cells: Vec<_> = (0..32u32).map(|i| [i, (i * 7) % 32, 0]).collect();
        let m = DiscreteMeasure::uniform(CellSet::new(g, cells).unwrap(), "s").unwrap();
        let index = BucketIndex::build(&m);
        for (x, delta) in [([0.3, 0.6, 0.0], 0.2), ([0.9, 0.1, 0.0], 0.5)] {
            let direct = m.ball_mass(x, delta).unwrap();
            let fast = index.ball_mass(&m, x, delta);
            assert_relative_eq!(direct, fast, epsilon = 1e-12);
        }
    }
}
