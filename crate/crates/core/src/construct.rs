//! Built-in set and measure generators: dyadic Cantor families and their
//! products, thickened lattices, anisotropic lattice clouds, and implicit
//! surfaces carrying first-order area weights.

use crate::grid::{Cell, CellSet, GridError, GridSpec, Point};
use crate::measure::{DiscreteMeasure, MeasureError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConstructError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("grid too coarse: k = {k} but the construction needs k >= {need}")]
    GridTooCoarse { k: u32, need: u32 },
    #[error("dissection ratio exponent must be >= 1")]
    BadRatio,
    #[error("box side {0} too small, need at least 2")]
    BoxTooSmall(u32),
    #[error("product factors must be one-dimensional sets on matching grids")]
    BadFactors,
    #[error("lattice size q must be >= 2, got {0}")]
    BadLatticeSize(u32),
    #[error("exponent s = {s} outside (0, {d})")]
    BadExponent { s: f64, d: usize },
    #[error("resolution must satisfy epsilon <= rho/4 (rho = {rho:.3e}, epsilon = {eps:.3e})")]
    NeighborhoodTooThin { rho: f64, eps: f64 },
    #[error("superellipsoid degree must be even and >= 2, got {0}")]
    BadSuperellipsoidDegree(u32),
    #[error("surfaces need dimension 2 or 3, got {0}")]
    BadSurfaceDimension(usize),
}

/// Generation-`n` dyadic Cantor set on `[0,1]`: each step keeps the first
/// and last subinterval of ratio `2^-p`. Exact on the grid when `k >= n*p`;
/// the intended dimension is `1/p`.
pub fn cantor_set(p: u32, n: u32, grid: &GridSpec) -> Result<CellSet, ConstructError> {
    if p == 0 {
        return Err(ConstructError::BadRatio);
    }
    if grid.k() < n * p {
        return Err(ConstructError::GridTooCoarse { k: grid.k(), need: n * p });
    }
    let mut intervals: Vec<(u64, u64)> = vec![(0, 1u64 << grid.k())];
    for _ in 0..n {
        let mut next = Vec::with_capacity(intervals.len() * 2);
        for (start, len) in intervals {
            let child = len >> p;
            next.push((start, child));
            next.push((start + len - child, child));
        }
        intervals = next;
    }
    let mut cells = Vec::new();
    for (start, len) in intervals {
        for c in start..start + len {
            cells.push([c as u32, 0, 0]);
        }
    }
    Ok(CellSet::new(*grid, cells)?)
}

/// Union of the Cantor set and its translate by one: doubles the cell count
/// and keeps the dimension. Needs a box of side at least two.
pub fn f_alpha(p: u32, n: u32, grid: &GridSpec) -> Result<CellSet, ConstructError> {
    if grid.box_side() < 2 {
        return Err(ConstructError::BoxTooSmall(grid.box_side()));
    }
    let base = cantor_set(p, n, grid)?;
    let shift = 1u32 << grid.k();
    let mut cells = base.cells().to_vec();
    cells.extend(base.cells().iter().map(|c| [c[0] + shift, 0, 0]));
    Ok(CellSet::new(*grid, cells)?)
}

/// Cartesian product of one-dimensional sets sharing a grid; factor `i`
/// becomes axis `i`.
pub fn product_set(factors: &[&CellSet]) -> Result<CellSet, ConstructError> {
    if factors.is_empty() || factors.len() > 3 {
        return Err(ConstructError::BadFactors);
    }
    let f0 = factors[0].grid();
    if f0.d() != 1 {
        return Err(ConstructError::BadFactors);
    }
    for f in factors {
        let g = f.grid();
        if g.d() != 1 || g.k() != f0.k() || g.box_side() != f0.box_side() {
            return Err(ConstructError::BadFactors);
        }
    }
    let grid = GridSpec::new(factors.len(), f0.k(), f0.box_side())?;
    let unit = [[0u32, 0, 0]];
    let axis = |i: usize| -> &[Cell] {
        if i < factors.len() {
            factors[i].cells()
        } else {
            &unit
        }
    };
    let mut cells =
        Vec::with_capacity(factors.iter().map(|f| f.len()).product::<usize>());
    for z in axis(2) {
        for y in axis(1) {
            for x in axis(0) {
                cells.push([x[0], y[0], z[0]]);
            }
        }
    }
    Ok(CellSet::new(grid, cells)?)
}

fn thickening_radius(q: u32, s: f64, grid: &GridSpec) -> Result<(f64, i64), ConstructError> {
    let d = grid.d();
    if q < 2 {
        return Err(ConstructError::BadLatticeSize(q));
    }
    if !(s > 0.0 && s <= d as f64) {
        return Err(ConstructError::BadExponent { s, d });
    }
    let rho = (q as f64).powf(-(d as f64) / s);
    let eps = grid.epsilon();
    if eps > rho / 4.0 {
        return Err(ConstructError::NeighborhoodTooThin { rho, eps });
    }
    Ok((rho, (rho / eps).round() as i64))
}

fn thicken_points(points: &[Point], r_cells: i64, grid: &GridSpec) -> Result<CellSet, ConstructError> {
    let d = grid.d();
    let n = grid.cells_per_axis() as i64;
    let mut cells = Vec::new();
    for &p in points {
        let Some(center) = grid.cell_of(p) else { continue };
        let mut ranges = [(0i64, 0i64); 3];
        let mut ok = true;
        for i in 0..d {
            let lo = (center[i] as i64 - r_cells).max(0);
            let hi = (center[i] as i64 + r_cells).min(n - 1);
            if lo > hi {
                ok = false;
                break;
            }
            ranges[i] = (lo, hi);
        }
        if !ok {
            continue;
        }
        let rr = |i: usize| if i < d { ranges[i] } else { (0, 0) };
        let (z0, z1) = rr(2);
        let (y0, y1) = rr(1);
        let (x0, x1) = rr(0);
        for z in z0..=z1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    cells.push([x as u32, y as u32, z as u32]);
                }
            }
        }
    }
    Ok(CellSet::new(*grid, cells)?)
}

/// Chebyshev balls of radius `q^{-d/s}` around the scaled lattice
/// `q^-1 (Z^d ∩ [0,q]^d)`, realized as integer-radius cell boxes around the
/// cell containing each lattice point.
pub fn lattice_thickening(q: u32, s: f64, grid: &GridSpec) -> Result<CellSet, ConstructError> {
    let (_, r_cells) = thickening_radius(q, s, grid)?;
    let d = grid.d();
    let mut points = Vec::new();
    let lim = |i: usize| if i < d { q } else { 0 };
    for c in 0..=lim(2) {
        for b in 0..=lim(1) {
            for a in 0..=lim(0) {
                points.push([a as f64 / q as f64, b as f64 / q as f64, c as f64 / q as f64]);
            }
        }
    }
    thicken_points(&points, r_cells, grid)
}

/// Per-axis index extents of the anisotropic lattice cloud before scaling:
/// `floor(q^{d/(d+1)})` on the first `d-1` axes, `floor(q^{2d/(d+1)})` on the
/// last.
pub fn anisotropic_extents(q: u32, d: usize) -> [u64; 3] {
    let qf = q as f64;
    let a = qf.powf(d as f64 / (d as f64 + 1.0)).floor() as u64;
    let b = qf.powf(2.0 * d as f64 / (d as f64 + 1.0)).floor() as u64;
    let mut e = [0u64; 3];
    for i in 0..d - 1 {
        e[i] = a;
    }
    e[d - 1] = b;
    e
}

/// The `q^{-d/s}`-neighborhood of the anisotropically truncated scaled
/// lattice, clipped to the box. Returns the set together with the number of
/// lattice centers before clipping.
pub fn paraboloid_lattice(q: u32, s: f64, grid: &GridSpec) -> Result<(CellSet, u64), ConstructError> {
    let d = grid.d();
    if d < 2 {
        return Err(ConstructError::BadSurfaceDimension(d));
    }
    let (_, r_cells) = thickening_radius(q, s, grid)?;
    let ext = anisotropic_extents(q, d);
    let n_centers: u64 = (0..d).map(|i| ext[i] + 1).product();
    let mut points = Vec::new();
    let lim = |i: usize| if i < d { ext[i] } else { 0 };
    for c in 0..=lim(2) {
        for b in 0..=lim(1) {
            for a in 0..=lim(0) {
                points.push([a as f64 / q as f64, b as f64 / q as f64, c as f64 / q as f64]);
            }
        }
    }
    Ok((thicken_points(&points, r_cells, grid)?, n_centers))
}

/// Implicit surfaces rasterized by a corner sign change of the defining
/// function, weighted by first-order area elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceKind {
    /// `|x - c| = 1/2` about the box center.
    Sphere,
    /// Graph `x_d = x_1^2 + ... + x_{d-1}^2` clipped to `[0,1]^d`.
    ParaboloidGraph,
    /// `||x - c||_m = 1/2` about the box center, `m` even.
    Superellipsoid(u32),
    /// Flat patch `x_d = 1/2 + eps/2`, aligned with cell centers so a single
    /// layer rasterizes.
    HyperplanePatch,
}

impl SurfaceKind {
    fn validate(&self, grid: &GridSpec) -> Result<(), ConstructError> {
        if grid.d() < 2 {
            return Err(ConstructError::BadSurfaceDimension(grid.d()));
        }
        if let SurfaceKind::Superellipsoid(m) = self {
            if *m < 2 || m % 2 != 0 {
                return Err(ConstructError::BadSuperellipsoidDegree(*m));
            }
        }
        Ok(())
    }

    /// Defining function; the surface is its zero set.
    fn f(&self, grid: &GridSpec, p: Point) -> f64 {
        let c = grid.box_center();
        match self {
            // the sphere shares the superellipsoid formula at m = 2 so the
            // two coincide cell for cell
            SurfaceKind::Sphere => SurfaceKind::Superellipsoid(2).f(grid, p),
            SurfaceKind::Superellipsoid(m) => {
                let mf = *m as f64;
                let mut s = 0.0;
                for i in 0..grid.d() {
                    s += (p[i] - c[i]).abs().powf(mf);
                }
                s.powf(1.0 / mf) - 0.5
            }
            SurfaceKind::ParaboloidGraph => {
                let d = grid.d();
                let mut s = 0.0;
                for i in 0..d - 1 {
                    s += p[i] * p[i];
                }
                p[d - 1] - s
            }
            SurfaceKind::HyperplanePatch => {
                let d = grid.d();
                p[d - 1] - (0.5 + 0.5 * grid.epsilon())
            }
        }
    }

    /// True when the point is inside the region where the surface is kept;
    /// the paraboloid graph is clipped to the unit box.
    fn in_patch(&self, grid: &GridSpec, p: Point) -> bool {
        match self {
            SurfaceKind::ParaboloidGraph => (0..grid.d()).all(|i| (0.0..=1.0).contains(&p[i])),
            _ => true,
        }
    }

    fn gradient(&self, grid: &GridSpec, p: Point) -> Point {
        let h = grid.epsilon() * 0.25;
        let mut g = [0.0; 3];
        for i in 0..grid.d() {
            let mut hi = p;
            let mut lo = p;
            hi[i] += h;
            lo[i] -= h;
            g[i] = (self.f(grid, hi) - self.f(grid, lo)) / (2.0 * h);
        }
        g
    }

    pub fn label(&self) -> String {
        match self {
            SurfaceKind::Sphere => "sphere".into(),
            SurfaceKind::ParaboloidGraph => "paraboloid-graph".into(),
            SurfaceKind::Superellipsoid(m) => format!("superellipsoid-m{m}"),
            SurfaceKind::HyperplanePatch => "hyperplane-patch".into(),
        }
    }
}

/// Cells whose corners straddle the zero level of the defining function.
pub fn surface_set(kind: SurfaceKind, grid: &GridSpec) -> Result<CellSet, ConstructError> {
    kind.validate(grid)?;
    let d = grid.d();
    let eps = grid.epsilon();
    let n = grid.cells_per_axis();
    // walk a bounding region: surfaces here live inside [0, max(1, L)] anyway
    let mut cells = Vec::new();
    let lim = |i: usize| if i < d { n } else { 1 };
    let corners = 1u32 << d;
    for z in 0..lim(2) {
        for y in 0..lim(1) {
            for x in 0..lim(0) {
                let cell = [x as u32, y as u32, z as u32];
                let base = grid.center(cell);
                if !kind.in_patch(grid, base) {
                    continue;
                }
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for mask in 0..corners {
                    let mut p = base;
                    for i in 0..d {
                        p[i] += if mask & (1 << i) != 0 { eps * 0.5 } else { -eps * 0.5 };
                    }
                    let v = kind.f(grid, p);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if lo <= 0.0 && hi >= 0.0 {
                    cells.push(cell);
                }
            }
        }
    }
    Ok(CellSet::new(*grid, cells)?)
}

/// Surface cells weighted by a first-order area element: the gradient
/// magnitude over its largest component estimates the patch area per cell
/// footprint, which is all the comparability the estimators need.
pub fn surface_measure(kind: SurfaceKind, grid: &GridSpec) -> Result<DiscreteMeasure, ConstructError> {
    let set = surface_set(kind, grid)?;
    let mut raw = Vec::with_capacity(set.len());
    for &cell in set.cells() {
        let p = grid.center(cell);
        let g = kind.gradient(grid, p);
        let norm = (0..grid.d()).map(|i| g[i] * g[i]).sum::<f64>().sqrt();
        let largest = (0..grid.d()).map(|i| g[i].abs()).fold(0.0, f64::max);
        let w = if largest > 0.0 { norm / largest } else { 1.0 };
        raw.push(w);
    }
    Ok(DiscreteMeasure::from_raw(set, raw, kind.label())?)
}

/// Descriptor naming a built-in construction; `build` realizes it on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Construction {
    Cantor { p: u32, n: u32 },
    CantorUnion { p: u32, n: u32 },
    Product { factors: Vec<Construction> },
    LatticeThickening { q: u32, s: f64 },
    ParaboloidLattice { q: u32, s: f64 },
    Surface(SurfaceKind),
    Box,
    Interval,
}

impl Construction {
    /// Analytically intended dimension for a realization in dimension `d`.
    pub fn design_dimension(&self, d: usize) -> f64 {
        match self {
            Construction::Cantor { p, .. } | Construction::CantorUnion { p, .. } => 1.0 / *p as f64,
            Construction::Product { factors } => {
                factors.iter().map(|f| f.design_dimension(1)).sum()
            }
            Construction::LatticeThickening { s, .. } => *s,
            Construction::ParaboloidLattice { s, .. } => *s,
            Construction::Surface(_) => d as f64 - 1.0,
            Construction::Box => d as f64,
            Construction::Interval => 1.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Construction::Cantor { p, n } => format!("cantor-p{p}-n{n}"),
            Construction::CantorUnion { p, n } => format!("cantor-union-p{p}-n{n}"),
            Construction::Product { factors } => {
                let parts: Vec<String> = factors.iter().map(|f| f.label()).collect();
                format!("product({})", parts.join("x"))
            }
            Construction::LatticeThickening { q, s } => format!("lattice-q{q}-s{s}"),
            Construction::ParaboloidLattice { q, s } => format!("paraboloid-lattice-q{q}-s{s}"),
            Construction::Surface(kind) => kind.label(),
            Construction::Box => "box".into(),
            Construction::Interval => "interval".into(),
        }
    }

    pub fn build(&self, grid: &GridSpec) -> Result<CellSet, ConstructError> {
        match self {
            Construction::Cantor { p, n } => cantor_set(*p, *n, grid),
            Construction::CantorUnion { p, n } => f_alpha(*p, *n, grid),
            Construction::Product { factors } => {
                let sub = GridSpec::new(1, grid.k(), grid.box_side())?;
                let built: Vec<CellSet> = factors
                    .iter()
                    .map(|f| f.build(&sub))
                    .collect::<Result<_, _>>()?;
                let refs: Vec<&CellSet> = built.iter().collect();
                product_set(&refs)
            }
            Construction::LatticeThickening { q, s } => lattice_thickening(*q, *s, grid),
            Construction::ParaboloidLattice { q, s } => {
                Ok(paraboloid_lattice(*q, *s, grid)?.0)
            }
            Construction::Surface(kind) => surface_set(*kind, grid),
            Construction::Box => Ok(CellSet::full(*grid)?),
            Construction::Interval => {
                if grid.d() != 1 {
                    return Err(ConstructError::BadFactors);
                }
                // the unit interval regardless of box side
                let cells = (0..1u32 << grid.k()).map(|c| [c, 0, 0]).collect();
                Ok(CellSet::new(*grid, cells)?)
            }
        }
    }

    /// Uniform measure on the built set, except surfaces which carry area
    /// weights.
    pub fn build_measure(&self, grid: &GridSpec) -> Result<DiscreteMeasure, ConstructError> {
        match self {
            Construction::Surface(kind) => surface_measure(*kind, grid),
            _ => Ok(DiscreteMeasure::uniform(self.build(grid)?, self.label())?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimension::box_count;

    #[test]
    fn cantor_quarter_depth_three() {
        let g = GridSpec::new(1, 6, 1).unwrap();
        let a = cantor_set(2, 3, &g).unwrap();
        assert_eq!(a.len(), 8);
    }

    #[test]
    fn cantor_half_is_full_interval() {
        let g = GridSpec::new(1, 5, 1).unwrap();
        let a = cantor_set(1, 4, &g).unwrap();
        assert_eq!(a.len(), 32);
    }

    #[test]
    fn cantor_counts_are_powers_of_two() {
        let g = GridSpec::new(1, 12, 1).unwrap();
        let a = cantor_set(2, 6, &g).unwrap();
        for i in 0..=6u32 {
            assert_eq!(box_count(&a, 2 * i).unwrap(), 1 << i, "at level {}", 2 * i);
        }
    }

    #[test]
    fn cantor_rejects_coarse_grid() {
        let g = GridSpec::new(1, 5, 1).unwrap();
        assert!(matches!(cantor_set(2, 3, &g), Err(ConstructError::GridTooCoarse { .. })));
    }

    #[test]
    fn union_doubles_and_needs_wide_box() {
        let g = GridSpec::new(1, 6, 2).unwrap();
        let c = cantor_set(2, 3, &g).unwrap();
        let f = f_alpha(2, 3, &g).unwrap();
        assert_eq!(f.len(), 2 * c.len());
        let g1 = GridSpec::new(1, 6, 1).unwrap();
        assert!(matches!(f_alpha(2, 3, &g1), Err(ConstructError::BoxTooSmall(1))));
        // depth zero is [0,1] together with [1,2]
        let f0 = f_alpha(2, 0, &g).unwrap();
        assert_eq!(f0.len(), 2 << 6);
    }

    #[test]
    fn product_count_factorizes() {
        let g = GridSpec::new(1, 6, 1).unwrap();
        let interval = Construction::Interval.build(&g).unwrap();
        let cantor = cantor_set(1, 3, &g).unwrap();
        let prod = product_set(&[&interval, &cantor]).unwrap();
        assert_eq!(prod.len(), interval.len() * cantor.len());
        for j in [0u32, 2, 4, 6] {
            let lhs = box_count(&prod, j).unwrap();
            let rhs = box_count(&interval, j).unwrap() * box_count(&cantor, j).unwrap();
            assert_eq!(lhs, rhs, "at level {j}");
        }
    }

    #[test]
    fn product_dimension_sums() {
        let c = Construction::Cantor { p: 2, n: 4 };
        let prod = Construction::Product { factors: vec![c.clone(), c] };
        assert_eq!(prod.design_dimension(2), 1.0);
    }

    #[test]
    fn lattice_runs_one_dimensional() {
        // q = 4, s = 1/2: radius 1/16 around {0, 1/4, 1/2, 3/4, 1}
        let g = GridSpec::new(1, 6, 1).unwrap();
        let a = lattice_thickening(4, 0.5, &g).unwrap();
        // interior runs are 2*(2^k/16)+1 = 9 cells, boundary runs clip to 5
        assert_eq!(a.len(), 3 * 9 + 2 * 5);
    }

    #[test]
    fn lattice_covers_box_at_s_equals_d() {
        let g = GridSpec::new(1, 4, 1).unwrap();
        let a = lattice_thickening(2, 1.0, &g).unwrap();
        assert_eq!(a.len(), 16);
        let g2 = GridSpec::new(2, 4, 1).unwrap();
        let a2 = lattice_thickening(2, 2.0, &g2).unwrap();
        assert_eq!(a2.len(), 256);
    }

    #[test]
    fn lattice_rejects_thin_neighborhood() {
        let g = GridSpec::new(2, 4, 1).unwrap();
        assert!(matches!(
            lattice_thickening(16, 1.0, &g),
            Err(ConstructError::NeighborhoodTooThin { .. })
        ));
    }

    #[test]
    fn anisotropic_extent_arithmetic() {
        let e = anisotropic_extents(16, 2);
        assert_eq!(e[0], 6); // floor(16^(2/3))
        assert_eq!(e[1], 40); // floor(16^(4/3))
        let g = GridSpec::new(2, 10, 1).unwrap();
        let (_, centers) = paraboloid_lattice(16, 1.2, &g).unwrap();
        assert_eq!(centers, 7 * 41);
    }

    #[test]
    fn sphere_count_tracks_circumference() {
        let g = GridSpec::new(2, 8, 1).unwrap();
        let circle = surface_set(SurfaceKind::Sphere, &g).unwrap();
        let n = circle.len() as f64;
        let anchor = 4.0 * 256.0;
        assert!(n >= anchor * 0.8 && n <= anchor * 1.2, "count {n}");
    }

    #[test]
    fn superellipsoid_two_matches_sphere() {
        let g = GridSpec::new(2, 7, 1).unwrap();
        let a = surface_set(SurfaceKind::Sphere, &g).unwrap();
        let b = surface_set(SurfaceKind::Superellipsoid(2), &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn surface_measure_normalized() {
        let g = GridSpec::new(2, 6, 1).unwrap();
        let m = surface_measure(SurfaceKind::ParaboloidGraph, &g).unwrap();
        assert!((m.total() - 1.0).abs() < 1e-12);
        assert!(matches!(
            surface_measure(SurfaceKind::Superellipsoid(3), &g),
            Err(ConstructError::BadSuperellipsoidDegree(3))
        ));
    }

    #[test]
    fn hyperplane_patch_single_layer() {
        let g = GridSpec::new(2, 5, 1).unwrap();
        let a = surface_set(SurfaceKind::HyperplanePatch, &g).unwrap();
        assert_eq!(a.len(), 32);
    }
}
