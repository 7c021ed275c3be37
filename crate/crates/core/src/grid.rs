//! Dyadic grids over `[0, L]^d` and sparse cell sets on them.
//!
//! A grid at resolution exponent `k` has cells of side `2^-k`; the box side
//! `L` must be a power of two so every box edge is a whole number of cells.
//! Sets are stored as sorted, deduplicated lists of integer cell coordinates.
//! All neighborhood operations use Chebyshev (max-coordinate) balls, which
//! are exact integer morphology on the grid.

use crate::diffeo::Diffeo;
use nalgebra::{Matrix3, Vector3};
use std::io::{self, BufRead, BufWriter, Read, Write};
use thiserror::Error;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// A point of `R^3`; coordinates past the grid dimension are zero.
pub type Point = [f64; 3];

/// Integer cell coordinates; coordinates past the grid dimension are zero.
pub type Cell = [u32; 3];

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("dimension {0} unsupported (1..=3)")]
    BadDimension(usize),
    #[error("box side {0} is not a power of two")]
    BadBoxSide(u32),
    #[error("grid too fine: {0} cells per axis exceeds the index budget")]
    TooFine(u64),
    #[error("cell {0:?} outside the grid")]
    OutOfBounds(Cell),
    #[error("grids are incompatible (dimension, resolution or box differ)")]
    Incompatible,
    #[error("coarsening level {level} exceeds resolution {k}")]
    BadLevel { level: u32, k: u32 },
    #[error("matrix is not orthogonal within 1e-9")]
    NotOrthogonal,
    #[error("dilation factor must be positive, got {0}")]
    BadDilation(f64),
    #[error("affine linear part is singular")]
    SingularAffine,
    #[error("diffeomorphism jacobian vanishes on the box")]
    DegenerateDiffeo,
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("malformed cell-set file: {0}")]
    Parse(String),
}

impl From<io::Error> for GridError {
    fn from(e: io::Error) -> Self {
        GridError::Io(e.to_string())
    }
}

/// Grid geometry: ambient dimension, resolution exponent and box side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    d: usize,
    k: u32,
    box_side: u32,
}

impl GridSpec {
    /// Builds a grid over `[0, box_side]^d` with cells of side `2^-k`.
    pub fn new(d: usize, k: u32, box_side: u32) -> Result<Self, GridError> {
        if d == 0 || d > MAX_DIM {
            return Err(GridError::BadDimension(d));
        }
        if box_side == 0 || !box_side.is_power_of_two() {
            return Err(GridError::BadBoxSide(box_side));
        }
        let per_axis = (box_side as u64) << k;
        // keep cell indices comfortably inside u32 and products inside i64
        if k > 30 || per_axis > 1 << 30 {
            return Err(GridError::TooFine(per_axis));
        }
        Ok(GridSpec { d, k, box_side })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn box_side(&self) -> u32 {
        self.box_side
    }

    /// Cell side length, the one scale parameter every operation shares.
    pub fn epsilon(&self) -> f64 {
        (-(self.k as f64)).exp2()
    }

    /// Number of addressable cells along each axis.
    pub fn cells_per_axis(&self) -> u64 {
        (self.box_side as u64) << self.k
    }

    /// The same box at a coarser resolution `j <= k`.
    pub fn coarsened(&self, j: u32) -> Result<GridSpec, GridError> {
        if j > self.k {
            return Err(GridError::BadLevel { level: j, k: self.k });
        }
        Ok(GridSpec { d: self.d, k: j, box_side: self.box_side })
    }

    pub fn compatible(&self, other: &GridSpec) -> bool {
        self == other
    }

    /// Center of a cell in absolute coordinates.
    pub fn center(&self, c: Cell) -> Point {
        let eps = self.epsilon();
        let mut p = [0.0; 3];
        for i in 0..self.d {
            p[i] = (c[i] as f64 + 0.5) * eps;
        }
        p
    }

    /// Center of the box.
    pub fn box_center(&self) -> Point {
        let mut p = [0.0; 3];
        for i in 0..self.d {
            p[i] = self.box_side as f64 * 0.5;
        }
        p
    }

    fn in_bounds(&self, c: Cell) -> bool {
        let n = self.cells_per_axis();
        (0..self.d).all(|i| (c[i] as u64) < n) && (self.d..MAX_DIM).all(|i| c[i] == 0)
    }

    /// Cell containing a point, or `None` outside the box. Points exactly on
    /// the far face are assigned to the last cell.
    pub fn cell_of(&self, p: Point) -> Option<Cell> {
        let n = self.cells_per_axis() as i64;
        let scale = (self.k as f64).exp2();
        let mut c = [0u32; 3];
        for i in 0..self.d {
            let idx = (p[i] * scale).floor() as i64;
            let idx = if idx == n && p[i] * scale == n as f64 { n - 1 } else { idx };
            if idx < 0 || idx >= n {
                return None;
            }
            c[i] = idx as u32;
        }
        Some(c)
    }
}

/// Inclusive index range of the cells whose half-open span `[i, i+1)` meets
/// the interval `[lo, hi]` in units of cells. `hi` landing exactly on a cell
/// boundary does not spill into the next cell.
pub(crate) fn cell_range(lo: f64, hi: f64, n: i64) -> Option<(i64, i64)> {
    debug_assert!(lo <= hi);
    let a = lo.floor() as i64;
    let f = hi.floor();
    let b = if f == hi { f as i64 - 1 } else { f as i64 };
    let b = b.max(a);
    if b < 0 || a >= n {
        return None;
    }
    Some((a.max(0), b.min(n - 1)))
}

/// A transformation applicable to a cell set.
#[derive(Debug, Clone)]
pub enum Transform {
    /// Translation by a vector.
    Translate(Point),
    /// Orthogonal map applied about the box center (so rigid motions of
    /// subsets of the box stay near the box).
    Rotate(Matrix3<f64>),
    /// Scaling about the origin by `t > 0`.
    Dilate(f64),
    /// A built-in diffeomorphism applied in absolute coordinates.
    Map(Diffeo),
}

/// A sparse set of grid cells; the realized set is the union of the closed
/// cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSet {
    grid: GridSpec,
    cells: Vec<Cell>,
}

impl CellSet {
    /// Sorts, deduplicates and bounds-checks the cell list.
    pub fn new(grid: GridSpec, mut cells: Vec<Cell>) -> Result<Self, GridError> {
        for &c in &cells {
            if !grid.in_bounds(c) {
                return Err(GridError::OutOfBounds(c));
            }
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(CellSet { grid, cells })
    }

    pub fn empty(grid: GridSpec) -> Self {
        CellSet { grid, cells: Vec::new() }
    }

    /// Every cell of the grid. Refused above `2^27` cells.
    pub fn full(grid: GridSpec) -> Result<Self, GridError> {
        let n = grid.cells_per_axis();
        let total = n.pow(grid.d() as u32);
        if total > 1 << 27 {
            return Err(GridError::TooFine(total));
        }
        let mut cells = Vec::with_capacity(total as usize);
        let nd = |i: usize| if i < grid.d() { n } else { 1 };
        for z in 0..nd(2) {
            for y in 0..nd(1) {
                for x in 0..nd(0) {
                    cells.push([x as u32, y as u32, z as u32]);
                }
            }
        }
        cells.sort_unstable();
        Ok(CellSet { grid, cells })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.cells.binary_search(&c).is_ok()
    }

    /// Axis-aligned bounding box in cell indices, `None` when empty.
    pub fn bounding_box(&self) -> Option<(Cell, Cell)> {
        if self.cells.is_empty() {
            return None;
        }
        let mut lo = [u32::MAX; 3];
        let mut hi = [0u32; 3];
        for c in &self.cells {
            for i in 0..MAX_DIM {
                lo[i] = lo[i].min(c[i]);
                hi[i] = hi[i].max(c[i]);
            }
        }
        Some((lo, hi))
    }

    /// Diagonal of the bounding box of cell centers; an upper proxy for the
    /// diameter of the realized set.
    pub fn diameter(&self) -> f64 {
        match self.bounding_box() {
            None => 0.0,
            Some((lo, hi)) => {
                let eps = self.grid.epsilon();
                let mut s = 0.0;
                for i in 0..self.grid.d() {
                    let e = (hi[i] - lo[i]) as f64 * eps;
                    s += e * e;
                }
                s.sqrt()
            }
        }
    }

    /// Chebyshev dilation by `r` cells, clipped to the grid. Monotone:
    /// the input is always contained in the output.
    pub fn dilate(&self, r: u32) -> CellSet {
        if r == 0 || self.cells.is_empty() {
            return self.clone();
        }
        let d = self.grid.d();
        let n = self.grid.cells_per_axis() as i64;
        let r = r as i64;
        // merge shifted copies offset by offset to keep memory linear
        let mut acc: Vec<Cell> = Vec::new();
        let mut offsets: Vec<[i64; 3]> = Vec::new();
        let range = |i: usize| if i < d { (-r, r) } else { (0, 0) };
        let (z0, z1) = range(2);
        let (y0, y1) = range(1);
        let (x0, x1) = range(0);
        for dz in z0..=z1 {
            for dy in y0..=y1 {
                for dx in x0..=x1 {
                    offsets.push([dx, dy, dz]);
                }
            }
        }
        for off in offsets {
            let mut shifted: Vec<Cell> = Vec::with_capacity(self.cells.len());
            for &c in &self.cells {
                let mut out = [0u32; 3];
                let mut ok = true;
                for i in 0..MAX_DIM {
                    let v = c[i] as i64 + off[i];
                    if v < 0 || v >= n {
                        ok = false;
                        break;
                    }
                    out[i] = v as u32;
                }
                if ok {
                    shifted.push(out);
                }
            }
            acc = merge_sorted(&acc, &shifted);
        }
        CellSet { grid: self.grid, cells: acc }
    }

    /// The set seen at a coarser level `j`: distinct parent cells.
    pub fn coarsen(&self, j: u32) -> Result<CellSet, GridError> {
        let grid = self.grid.coarsened(j)?;
        let shift = self.grid.k - j;
        if shift == 0 {
            return Ok(self.clone());
        }
        let mut cells: Vec<Cell> = Vec::with_capacity(self.cells.len());
        for &c in &self.cells {
            cells.push([c[0] >> shift, c[1] >> shift, c[2] >> shift]);
        }
        // shifting coordinates does not preserve the lexicographic order of
        // tuples, so re-sort before deduplicating
        cells.sort_unstable();
        cells.dedup();
        Ok(CellSet { grid, cells })
    }

    /// Conservative rasterization of the image: every point of the realized
    /// set maps into the output union, which may overshoot by about one cell
    /// layer. Output is clipped to the target grid silently.
    pub fn transform(&self, t: &Transform, out: &GridSpec) -> Result<CellSet, GridError> {
        if out.d != self.grid.d {
            return Err(GridError::Incompatible);
        }
        let affine = match t {
            Transform::Translate(z) => {
                Some((Matrix3::identity(), Vector3::new(z[0], z[1], z[2])))
            }
            Transform::Rotate(g) => {
                check_orthogonal(g, self.grid.d)?;
                // conjugate by the box center so the box maps over itself
                let c = self.grid.box_center();
                let c = Vector3::new(c[0], c[1], c[2]);
                Some((*g, c - g * c))
            }
            Transform::Dilate(t) => {
                if !(*t > 0.0) {
                    return Err(GridError::BadDilation(*t));
                }
                Some((Matrix3::identity() * *t, Vector3::zeros()))
            }
            Transform::Map(f) => match f {
                Diffeo::Identity => Some((Matrix3::identity(), Vector3::zeros())),
                Diffeo::Affine { linear, offset } => {
                    if linear.determinant().abs() < 1e-12 {
                        return Err(GridError::SingularAffine);
                    }
                    Some((*linear, *offset))
                }
                Diffeo::Polynomial { .. } => None,
            },
        };
        let mut cells: Vec<Cell> = Vec::new();
        match affine {
            Some((m, b)) => {
                rasterize_affine(self, &m, &b, out, &mut cells);
            }
            None => {
                let f = match t {
                    Transform::Map(f) => f,
                    _ => unreachable!(),
                };
                if !f.jacobian_nonvanishing(&self.grid) {
                    return Err(GridError::DegenerateDiffeo);
                }
                rasterize_nonlinear(self, f, out, &mut cells);
            }
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(CellSet { grid: *out, cells })
    }

    /// Text format: header `d k L count`, then one cell per line.
    pub fn write_text<W: Write>(&self, w: W) -> Result<(), GridError> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{} {} {} {}", self.grid.d, self.grid.k, self.grid.box_side, self.cells.len())?;
        for c in &self.cells {
            match self.grid.d {
                1 => writeln!(w, "{}", c[0])?,
                2 => writeln!(w, "{} {}", c[0], c[1])?,
                _ => writeln!(w, "{} {} {}", c[0], c[1], c[2])?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: Read>(r: R) -> Result<CellSet, GridError> {
        let mut lines = io::BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| GridError::Parse("empty file".into()))??;
        let head: Vec<u64> = header
            .split_whitespace()
            .map(|t| t.parse::<u64>().map_err(|e| GridError::Parse(format!("header: {e}"))))
            .collect::<Result<_, _>>()?;
        if head.len() != 4 {
            return Err(GridError::Parse("header must be `d k L count`".into()));
        }
        let grid = GridSpec::new(head[0] as usize, head[1] as u32, head[2] as u32)?;
        let count = head[3] as usize;
        let mut cells = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut c = [0u32; 3];
            let mut parts = line.split_whitespace();
            for slot in c.iter_mut().take(grid.d) {
                let tok = parts
                    .next()
                    .ok_or_else(|| GridError::Parse(format!("line {}: too few coordinates", i + 2)))?;
                *slot = tok
                    .parse()
                    .map_err(|e| GridError::Parse(format!("line {}: {e}", i + 2)))?;
            }
            if parts.next().is_some() {
                return Err(GridError::Parse(format!("line {}: too many coordinates", i + 2)));
            }
            cells.push(c);
        }
        if cells.len() != count {
            return Err(GridError::Parse(format!(
                "header promised {count} cells, found {}",
                cells.len()
            )));
        }
        CellSet::new(grid, cells)
    }

    /// Binary format: `d k L count` as little-endian u32, then `d` u32
    /// coordinates per cell. Round-trips exactly.
    pub fn write_binary<W: Write>(&self, w: W) -> Result<(), GridError> {
        let mut w = BufWriter::new(w);
        for v in [self.grid.d as u32, self.grid.k, self.grid.box_side, self.cells.len() as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for c in &self.cells {
            for coord in c.iter().take(self.grid.d) {
                w.write_all(&coord.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<CellSet, GridError> {
        let read_u32 = |r: &mut R| -> Result<u32, GridError> {
            let mut buf = [0u8; 4];
            r.read_exact(&mut buf)?;
            Ok(u32::from_le_bytes(buf))
        };
        let d = read_u32(&mut r)? as usize;
        let k = read_u32(&mut r)?;
        let box_side = read_u32(&mut r)?;
        let count = read_u32(&mut r)? as usize;
        let grid = GridSpec::new(d, k, box_side)?;
        let mut cells = Vec::with_capacity(count);
        for _ in 0..count {
            let mut c = [0u32; 3];
            for slot in c.iter_mut().take(d) {
                *slot = read_u32(&mut r)?;
            }
            cells.push(c);
        }
        CellSet::new(grid, cells)
    }
}

fn check_orthogonal(g: &Matrix3<f64>, d: usize) -> Result<(), GridError> {
    let gtg = g.transpose() * g;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            // outside the active dimension the matrix must be the identity
            if i >= d || j >= d {
                if (g[(i, j)] - want).abs() > 1e-9 {
                    return Err(GridError::NotOrthogonal);
                }
            }
            if (gtg[(i, j)] - want).abs() > 1e-9 {
                return Err(GridError::NotOrthogonal);
            }
        }
    }
    Ok(())
}

/// Affine images of cells are covered exactly by the bounding box of the
/// image parallelepiped: per output axis the half-extent is
/// `sum_j |M_ij| * eps/2` around the mapped center.
fn rasterize_affine(
    set: &CellSet,
    m: &Matrix3<f64>,
    b: &Vector3<f64>,
    out: &GridSpec,
    cells: &mut Vec<Cell>,
) {
    let d = set.grid.d;
    let half = set.grid.epsilon() * 0.5;
    let scale = (out.k as f64).exp2();
    let n = out.cells_per_axis() as i64;
    let mut ext = [0.0f64; 3];
    for i in 0..d {
        ext[i] = (0..d).map(|j| m[(i, j)].abs()).sum::<f64>() * half;
    }
    for &c in &set.cells {
        let p = set.grid.center(c);
        let q = m * Vector3::new(p[0], p[1], p[2]) + b;
        let mut ranges = [(0i64, 0i64); 3];
        let mut ok = true;
        for i in 0..d {
            match cell_range((q[i] - ext[i]) * scale, (q[i] + ext[i]) * scale, n) {
                Some(r) => ranges[i] = r,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            push_box(&ranges, d, cells);
        }
    }
}

/// Nonlinear maps sample the cell corners and center, take the bounding box
/// and add a one-cell shell for curvature.
fn rasterize_nonlinear(set: &CellSet, f: &Diffeo, out: &GridSpec, cells: &mut Vec<Cell>) {
    let d = set.grid.d;
    let eps = set.grid.epsilon();
    let scale = (out.k as f64).exp2();
    let n = out.cells_per_axis() as i64;
    for &c in &set.cells {
        let p0 = set.grid.center(c);
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let corners = 1usize << d;
        for mask in 0..=corners {
            let mut p = p0;
            if mask < corners {
                for i in 0..d {
                    p[i] += if mask & (1 << i) != 0 { eps * 0.5 } else { -eps * 0.5 };
                }
            }
            let q = f.apply(p);
            for i in 0..d {
                lo[i] = lo[i].min(q[i]);
                hi[i] = hi[i].max(q[i]);
            }
        }
        let mut ranges = [(0i64, 0i64); 3];
        let mut ok = true;
        for i in 0..d {
            match cell_range(lo[i] * scale - 1.0, hi[i] * scale + 1.0, n) {
                Some(r) => ranges[i] = r,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            push_box(&ranges, d, cells);
        }
    }
}

fn push_box(ranges: &[(i64, i64); 3], d: usize, cells: &mut Vec<Cell>) {
    let r = |i: usize| if i < d { ranges[i] } else { (0, 0) };
    let (z0, z1) = r(2);
    let (y0, y1) = r(1);
    let (x0, x1) = r(0);
    for z in z0..=z1 {
        for y in y0..=y1 {
            for x in x0..=x1 {
                cells.push([x as u32, y as u32, z as u32]);
            }
        }
    }
}

fn merge_sorted(a: &[Cell], b: &[Cell]) -> Vec<Cell> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn grid2(k: u32) -> GridSpec {
        GridSpec::new(2, k, 1).unwrap()
    }

    #[test]
    fn make_grid_validates() {
        let g = grid2(4);
        assert_eq!(g.cells_per_axis(), 16);
        assert_eq!(g.epsilon(), 1.0 / 16.0);
        let g1 = GridSpec::new(1, 0, 1).unwrap();
        assert_eq!(g1.cells_per_axis(), 1);
        let g3 = GridSpec::new(3, 10, 1).unwrap();
        assert_eq!(g3.cells_per_axis(), 1024);
        assert!(GridSpec::new(0, 4, 1).is_err());
        assert!(GridSpec::new(4, 4, 1).is_err());
        assert!(GridSpec::new(2, 4, 3).is_err());
        assert!(GridSpec::new(2, 40, 1).is_err());
    }

    #[test]
    fn dilate_single_cell() {
        let g = grid2(4);
        let a = CellSet::new(g, vec![[8, 8, 0]]).unwrap();
        assert_eq!(a.dilate(1).len(), 9);
        let run: Vec<Cell> = (4..9).map(|i| [i, 0, 0]).collect();
        let g1 = GridSpec::new(1, 4, 1).unwrap();
        let b = CellSet::new(g1, run).unwrap();
        assert_eq!(b.dilate(2).len(), 9);
    }

    #[test]
    fn dilate_full_grid_is_fixed_point() {
        let g = grid2(3);
        let full = CellSet::full(g).unwrap();
        assert_eq!(full.dilate(2), full);
    }

    #[test]
    fn dilate_composes() {
        let g = grid2(6);
        let a = CellSet::new(g, vec![[20, 30, 0], [33, 31, 0]]).unwrap();
        assert_eq!(a.dilate(1).dilate(2), a.dilate(3));
    }

    #[test]
    fn transform_identity_is_identity() {
        let g = grid2(5);
        let a = CellSet::new(g, vec![[3, 4, 0], [10, 20, 0]]).unwrap();
        let out = a.transform(&Transform::Map(Diffeo::Identity), &g).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn translate_one_cell_width_shifts_indices() {
        let g = grid2(5);
        let a = CellSet::new(g, vec![[3, 4, 0], [10, 20, 0]]).unwrap();
        let eps = g.epsilon();
        let out = a.transform(&Transform::Translate([eps, 2.0 * eps, 0.0]), &g).unwrap();
        assert_eq!(out.cells(), &[[4, 6, 0], [11, 22, 0]]);
    }

    #[test]
    fn quarter_turn_permutes_box() {
        let g = grid2(4);
        // axis-aligned box [0, 1/2] x [0, 1/4]
        let mut cells = Vec::new();
        for x in 0..8 {
            for y in 0..4 {
                cells.push([x, y, 0]);
            }
        }
        let a = CellSet::new(g, cells).unwrap();
        let rot = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let out = a.transform(&Transform::Rotate(rot), &g).unwrap();
        // about the box center the image is [3/4, 1] x [0, 1/2]
        let mut want = Vec::new();
        for x in 12..16 {
            for y in 0..8 {
                want.push([x, y, 0]);
            }
        }
        want.sort_unstable();
        assert_eq!(out.cells(), &want[..]);
    }

    #[test]
    fn rotation_round_trip_contains_original() {
        let g = grid2(6);
        let mut cells = Vec::new();
        for x in 20..30 {
            for y in 25..40 {
                cells.push([x, y, 0]);
            }
        }
        let a = CellSet::new(g, cells).unwrap();
        let c = FRAC_1_SQRT_2;
        let rot = Matrix3::new(c, -c, 0.0, c, c, 0.0, 0.0, 0.0, 1.0);
        let fwd = a.transform(&Transform::Rotate(rot), &g).unwrap();
        let back = fwd.transform(&Transform::Rotate(rot.transpose()), &g).unwrap();
        for &c in a.cells() {
            assert!(back.contains(c), "round trip lost {c:?}");
        }
        // over-coverage stays within a two-cell shell
        let shell = a.dilate(2);
        for &c in back.cells() {
            assert!(shell.contains(c), "round trip overshot at {c:?}");
        }
    }

    #[test]
    fn rejects_non_orthogonal_rotation() {
        let g = grid2(4);
        let a = CellSet::new(g, vec![[1, 1, 0]]).unwrap();
        let m = Matrix3::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert_eq!(a.transform(&Transform::Rotate(m), &g), Err(GridError::NotOrthogonal));
    }

    #[test]
    fn text_round_trip_exact() {
        let g = GridSpec::new(3, 5, 2).unwrap();
        let a = CellSet::new(g, vec![[0, 0, 0], [63, 1, 7], [5, 5, 5]]).unwrap();
        let mut buf = Vec::new();
        a.write_text(&mut buf).unwrap();
        let b = CellSet::read_text(&buf[..]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn binary_round_trip_exact() {
        let g = grid2(8);
        let a = CellSet::new(g, vec![[0, 255, 0], [17, 3, 0]]).unwrap();
        let mut buf = Vec::new();
        a.write_binary(&mut buf).unwrap();
        let b = CellSet::read_binary(&buf[..]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cell_range_half_open_rule() {
        // [2, 3] in cell units touches cells 2 only: 3.0 is a boundary
        assert_eq!(cell_range(2.0, 3.0, 10), Some((2, 2)));
        assert_eq!(cell_range(2.0, 3.5, 10), Some((2, 3)));
        assert_eq!(cell_range(-1.0, 0.5, 10), Some((0, 0)));
        assert_eq!(cell_range(10.5, 11.0, 10), None);
    }

    #[test]
    fn empty_set_operations() {
        let g = grid2(4);
        let e = CellSet::empty(g);
        assert!(e.dilate(3).is_empty());
        assert!(e.coarsen(2).unwrap().is_empty());
        assert_eq!(e.diameter(), 0.0);
        let out = e.transform(&Transform::Dilate(1.5), &g).unwrap();
        assert!(out.is_empty());
    }
}
