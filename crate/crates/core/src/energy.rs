//! Riesz energies of discrete measures, computed two independent ways: the
//! spatial double sum over cell-center pairs, and the frequency-side sum of
//! `|mu_hat|^2 |xi|^(s-d)` over integer frequencies. Same-cell pairs use the
//! distance convention `eps/2` throughout.
//!
//! Both routes have a dense-grid FFT fast path that computes the identical
//! sum (weight autocorrelation on the spatial side, a full DFT on the
//! frequency side) and a direct path used below a size cutoff and in tests.

use crate::grid::{CellSet, GridSpec};
use crate::measure::DiscreteMeasure;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("exponent s = {s} degenerate outside (0, {d})")]
    DegenerateExponent { s: f64, d: usize },
    #[error("frequency cap {cap} exceeds the sampling limit 2^(k-1) = {nyquist}")]
    CapBeyondNyquist { cap: u32, nyquist: u64 },
    #[error("support of {n} cells too large for the direct path and no dense path fits")]
    SupportTooLarge { n: usize },
}

/// Which route produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyMethod {
    Spatial,
    Fourier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyValue {
    pub s: f64,
    pub value: f64,
    pub method: EnergyMethod,
}

/// Supports up to this size use the direct pair sum; larger ones require the
/// dense autocorrelation path.
const DIRECT_PAIR_CAP: usize = 24_000;
/// Dense scratch grids are allowed up to this many sites (complex doubles).
const DENSE_SITE_CAP: u64 = 1 << 25;

/// Spatial energy: `sum_{i,j} w_i w_j |c_i - c_j|^{-s}` over ordered pairs,
/// with `|c_i - c_i| := eps/2` on the diagonal.
pub fn energy_spatial(mu: &DiscreteMeasure, s: f64) -> Result<EnergyValue, EnergyError> {
    let grid = mu.grid();
    let d = grid.d();
    if !(s > 0.0 && s < d as f64) {
        return Err(EnergyError::DegenerateExponent { s, d });
    }
    let n = mu.support().len();
    let value = if n <= DIRECT_PAIR_CAP {
        spatial_direct(mu, s)
    } else if dense_sites(grid) <= DENSE_SITE_CAP {
        spatial_autocorrelation(mu, s)
    } else {
        return Err(EnergyError::SupportTooLarge { n });
    };
    Ok(EnergyValue { s, value, method: EnergyMethod::Spatial })
}

/// Direct route exposed for oracle tests against the fast path.
pub fn energy_spatial_direct(mu: &DiscreteMeasure, s: f64) -> Result<EnergyValue, EnergyError> {
    let d = mu.grid().d();
    if !(s > 0.0 && s < d as f64) {
        return Err(EnergyError::DegenerateExponent { s, d });
    }
    Ok(EnergyValue { s, value: spatial_direct(mu, s), method: EnergyMethod::Spatial })
}

fn spatial_direct(mu: &DiscreteMeasure, s: f64) -> f64 {
    let grid = mu.grid();
    let d = grid.d();
    let eps = grid.epsilon();
    let cells = mu.support().cells();
    let w = mu.weights();
    let diag: f64 = (eps / 2.0).powf(-s) * w.iter().map(|x| x * x).sum::<f64>();
    // fixed-size chunks keep the reduction order independent of thread count
    let chunk = 512;
    let partials: Vec<f64> = (0..cells.len().div_ceil(chunk))
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk;
            let hi = (lo + chunk).min(cells.len());
            let mut acc = 0.0;
            for i in lo..hi {
                let a = cells[i];
                for j in i + 1..cells.len() {
                    let b = cells[j];
                    let mut dist2 = 0.0;
                    for t in 0..d {
                        let e = (a[t] as f64 - b[t] as f64) * eps;
                        dist2 += e * e;
                    }
                    acc += w[i] * w[j] * dist2.powf(-s / 2.0);
                }
            }
            acc
        })
        .collect();
    diag + 2.0 * partials.iter().sum::<f64>()
}

fn dense_sites(grid: &GridSpec) -> u64 {
    let side = 2 * grid.cells_per_axis();
    side.pow(grid.d() as u32)
}

/// Same sum as [`spatial_direct`], grouped by integer offset: the weight
/// autocorrelation `G` comes from a zero-padded FFT, and the energy is
/// `sum_offsets G(v) |v * eps|^{-s}` plus the diagonal term.
fn spatial_autocorrelation(mu: &DiscreteMeasure, s: f64) -> f64 {
    let grid = mu.grid();
    let d = grid.d();
    let eps = grid.epsilon();
    let side = (2 * grid.cells_per_axis()) as usize;
    let mut field = vec![Complex::new(0.0, 0.0); side.pow(d as u32)];
    for (c, &w) in mu.support().cells().iter().zip(mu.weights()) {
        field[flat_index(c.map(|v| v as usize), side, d)].re += w;
    }
    fft_all_axes(&mut field, side, d, false);
    for v in field.iter_mut() {
        *v = Complex::new(v.norm_sqr(), 0.0);
    }
    fft_all_axes(&mut field, side, d, true);
    let norm = 1.0 / side.pow(d as u32) as f64;
    let diag: f64 = (eps / 2.0).powf(-s) * mu.weights().iter().map(|x| x * x).sum::<f64>();
    let half = side as i64 / 2;
    let mut acc = 0.0;
    let lim = |i: usize| if i < d { (-half + 1, half - 1) } else { (0, 0) };
    let (z0, z1) = lim(2);
    let (y0, y1) = lim(1);
    let (x0, x1) = lim(0);
    for dz in z0..=z1 {
        for dy in y0..=y1 {
            for dx in x0..=x1 {
                if dx == 0 && dy == 0 && dz == 0 {
                    continue;
                }
                let idx = flat_index(
                    [wrap(dx, side), wrap(dy, side), wrap(dz, side)],
                    side,
                    d,
                );
                let g = field[idx].re * norm;
                if g <= 1e-14 {
                    // autocorrelation is nonnegative; tiny values are FFT noise
                    continue;
                }
                let dist2 = (dx * dx + dy * dy + dz * dz) as f64 * eps * eps;
                acc += g * dist2.powf(-s / 2.0);
            }
        }
    }
    diag + acc
}

fn wrap(v: i64, side: usize) -> usize {
    v.rem_euclid(side as i64) as usize
}

fn flat_index(c: [usize; 3], side: usize, d: usize) -> usize {
    match d {
        1 => c[0],
        2 => c[1] * side + c[0],
        _ => (c[2] * side + c[1]) * side + c[0],
    }
}

/// In-place FFT along every axis of a dense `side^d` field.
fn fft_all_axes(field: &mut [Complex<f64>], side: usize, d: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(side) } else { planner.plan_fft_forward(side) };
    let lanes = field.len() / side;
    let mut scratch = vec![Complex::new(0.0, 0.0); side];
    for axis in 0..d {
        if axis == 0 {
            for row in field.chunks_exact_mut(side) {
                fft.process(row);
            }
        } else {
            let stride = side.pow(axis as u32);
            for lane in 0..lanes {
                // decompose the lane id into the non-axis coordinates
                let block = lane / stride;
                let offset = lane % stride;
                let base = block * stride * side + offset;
                for i in 0..side {
                    scratch[i] = field[base + i * stride];
                }
                fft.process(&mut scratch);
                for i in 0..side {
                    field[base + i * stride] = scratch[i];
                }
            }
        }
    }
}

/// Frequency-side energy: `sum_{1 <= |xi| <= cap} |mu_hat(xi)|^2 |xi|^{s-d}`
/// over integer frequency vectors, with
/// `mu_hat(xi) = sum_j w_j exp(-2 pi i c_j . xi)` over cell centers.
pub fn energy_fourier(mu: &DiscreteMeasure, s: f64, cap: u32) -> Result<EnergyValue, EnergyError> {
    let grid = mu.grid();
    let d = grid.d();
    if !(s > 0.0 && s < d as f64) {
        return Err(EnergyError::DegenerateExponent { s, d });
    }
    let nyquist = 1u64 << (grid.k().saturating_sub(1));
    if cap as u64 > nyquist {
        return Err(EnergyError::CapBeyondNyquist { cap, nyquist });
    }
    let value = if dense_sites_unpadded(grid) <= DENSE_SITE_CAP {
        fourier_dense(mu, s, cap)
    } else {
        fourier_direct(mu, s, cap)
    };
    Ok(EnergyValue { s, value, method: EnergyMethod::Fourier })
}

/// Direct route exposed for oracle tests against the dense path.
pub fn energy_fourier_direct(mu: &DiscreteMeasure, s: f64, cap: u32) -> Result<EnergyValue, EnergyError> {
    let d = mu.grid().d();
    if !(s > 0.0 && s < d as f64) {
        return Err(EnergyError::DegenerateExponent { s, d });
    }
    Ok(EnergyValue { s, value: fourier_direct(mu, s, cap), method: EnergyMethod::Fourier })
}

fn dense_sites_unpadded(grid: &GridSpec) -> u64 {
    grid.cells_per_axis().pow(grid.d() as u32)
}

/// Transform magnitude at one real frequency by direct summation.
pub fn mu_hat_norm(mu: &DiscreteMeasure, xi: [f64; 3]) -> f64 {
    let grid = mu.grid();
    let d = grid.d();
    let mut re = 0.0;
    let mut im = 0.0;
    for (c, &w) in mu.support().cells().iter().zip(mu.weights()) {
        let p = grid.center(*c);
        let mut phase = 0.0;
        for i in 0..d {
            phase += p[i] * xi[i];
        }
        let t = -2.0 * std::f64::consts::PI * phase;
        re += w * t.cos();
        im += w * t.sin();
    }
    (re * re + im * im).sqrt()
}

fn fourier_direct(mu: &DiscreteMeasure, s: f64, cap: u32) -> f64 {
    let grid = mu.grid();
    let d = grid.d();
    let capi = cap as i64;
    let cap2 = capi * capi;
    let mut freqs = Vec::new();
    let lim = |i: usize| if i < d { (-capi, capi) } else { (0, 0) };
    let (z0, z1) = lim(2);
    let (y0, y1) = lim(1);
    let (x0, x1) = lim(0);
    for fz in z0..=z1 {
        for fy in y0..=y1 {
            for fx in x0..=x1 {
                let n2 = fx * fx + fy * fy + fz * fz;
                if n2 >= 1 && n2 <= cap2 {
                    freqs.push(([fx as f64, fy as f64, fz as f64], n2));
                }
            }
        }
    }
    let terms: Vec<f64> = freqs
        .par_iter()
        .map(|&(xi, n2)| {
            let a = mu_hat_norm(mu, xi);
            a * a * (n2 as f64).powf((s - d as f64) / 2.0)
        })
        .collect();
    terms.iter().sum()
}

/// Dense route: one DFT of the weight field gives `mu_hat` at every integer
/// frequency up to the sampling limit (bin `m` holds frequency `m / L`, so
/// integer frequencies sit at stride-`L` bins, shifted by the half-cell
/// center phase).
fn fourier_dense(mu: &DiscreteMeasure, s: f64, cap: u32) -> f64 {
    let grid = mu.grid();
    let d = grid.d();
    let side = grid.cells_per_axis() as usize;
    let l = grid.box_side() as usize;
    let mut field = vec![Complex::new(0.0, 0.0); side.pow(d as u32)];
    for (c, &w) in mu.support().cells().iter().zip(mu.weights()) {
        field[flat_index(c.map(|v| v as usize), side, d)].re += w;
    }
    fft_all_axes(&mut field, side, d, false);
    let capi = cap as i64;
    let cap2 = capi * capi;
    let lim = |i: usize| if i < d { (-capi, capi) } else { (0, 0) };
    let (z0, z1) = lim(2);
    let (y0, y1) = lim(1);
    let (x0, x1) = lim(0);
    let mut acc = 0.0;
    for fz in z0..=z1 {
        for fy in y0..=y1 {
            for fx in x0..=x1 {
                let n2 = fx * fx + fy * fy + fz * fz;
                if n2 < 1 || n2 > cap2 {
                    continue;
                }
                // integer frequency f maps to bin f * L; the half-cell
                // center phase drops out of the squared magnitude
                let bins = [
                    wrap(fx * l as i64, side),
                    wrap(fy * l as i64, side),
                    wrap(fz * l as i64, side),
                ];
                let v = field[flat_index(bins, side, d)];
                acc += v.norm_sqr() * (n2 as f64).powf((s - d as f64) / 2.0);
            }
        }
    }
    acc
}

/// Dyadic trend of the diagonal-capped energy across resolutions: a measure
/// with an atom has spatial energy growing without bound as `k` increases.
pub fn energy_trend_across_scales(
    build: impl Fn(u32) -> CellSet,
    ks: &[u32],
    s: f64,
    label: &str,
) -> Result<Vec<(u32, f64)>, EnergyError> {
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let set = build(k);
        let mu = DiscreteMeasure::uniform(set, label).expect("nonempty");
        out.push((k, energy_spatial(&mu, s)?.value));
    }
    Ok(out)
}
