//! Defining-function families for level-set experiments: the function, its
//! closed-form gradients, the mixed second derivatives, and the bordered
//! determinant whose nonvanishing certifies rotational curvature.

use crate::diffeo::Diffeo;
use crate::grid::Point;
use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("no samples found on the level set after {0} attempts")]
    NoSamplesOnLevelSet(usize),
    #[error("gradient check failed: worst relative error {0:.3e}")]
    GradientMismatch(f64),
    #[error("level-set family degenerate: minimum |det| = {0:.3e}")]
    Degenerate(f64),
    #[error("gradients of the two families are dependent at a sampled point (measure {0:.3e})")]
    DependentGradients(f64),
    #[error("l^m degree must be even and >= 2, got {0}")]
    BadDegree(u32),
    #[error("need {need} equations, got {got}")]
    WrongEquationCount { need: usize, got: usize },
}

/// One defining function `phi(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiFamily {
    /// Euclidean distance `|x - y|`.
    Distance,
    /// Bilinear pairing `x . y`.
    DotProduct,
    /// `||x - y||_{l^m}` with `m` even.
    LmNorm(u32),
    /// `(x_d - y_d) - sum_{i<d} (x_i - y_i)^2`; its zero level through `x` is
    /// a translated paraboloid graph.
    ParaboloidOffset,
    /// Polynomial in the entries of `x` and `y`.
    Polynomial(Vec<Monomial>),
}

/// `coeff * prod x_i^a_i * prod y_i^b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub x_pows: [u8; 3],
    pub y_pows: [u8; 3],
}

impl PhiFamily {
    pub fn validate(&self) -> Result<(), MapError> {
        if let PhiFamily::LmNorm(m) = self {
            if *m < 2 || m % 2 != 0 {
                return Err(MapError::BadDegree(*m));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            PhiFamily::Distance => "distance".into(),
            PhiFamily::DotProduct => "dot".into(),
            PhiFamily::LmNorm(m) => format!("lm-norm-{m}"),
            PhiFamily::ParaboloidOffset => "paraboloid-offset".into(),
            PhiFamily::Polynomial(_) => "polynomial".into(),
        }
    }

    pub fn eval(&self, d: usize, x: Point, y: Point) -> f64 {
        match self {
            PhiFamily::Distance => {
                let mut s = 0.0;
                for i in 0..d {
                    let v = x[i] - y[i];
                    s += v * v;
                }
                s.sqrt()
            }
            PhiFamily::DotProduct => (0..d).map(|i| x[i] * y[i]).sum(),
            PhiFamily::LmNorm(m) => {
                let mf = *m as f64;
                let mut s = 0.0;
                for i in 0..d {
                    s += (x[i] - y[i]).abs().powf(mf);
                }
                s.powf(1.0 / mf)
            }
            PhiFamily::ParaboloidOffset => {
                let mut s = 0.0;
                for i in 0..d - 1 {
                    let v = x[i] - y[i];
                    s += v * v;
                }
                (x[d - 1] - y[d - 1]) - s
            }
            PhiFamily::Polynomial(terms) => terms
                .iter()
                .map(|t| {
                    let mut v = t.coeff;
                    for i in 0..d {
                        v *= x[i].powi(t.x_pows[i] as i32) * y[i].powi(t.y_pows[i] as i32);
                    }
                    v
                })
                .sum(),
        }
    }

    /// Gradient in `x`; closed forms except for polynomials, which
    /// differentiate monomial by monomial.
    pub fn grad_x(&self, d: usize, x: Point, y: Point) -> Point {
        match self {
            PhiFamily::Distance => {
                let r = self.eval(d, x, y);
                let mut g = [0.0; 3];
                for i in 0..d {
                    g[i] = (x[i] - y[i]) / r;
                }
                g
            }
            PhiFamily::DotProduct => {
                let mut g = [0.0; 3];
                g[..d].copy_from_slice(&y[..d]);
                g
            }
            PhiFamily::LmNorm(m) => {
                let mf = *m as f64;
                let phi = self.eval(d, x, y);
                let mut g = [0.0; 3];
                for i in 0..d {
                    let v = x[i] - y[i];
                    g[i] = v.signum() * v.abs().powf(mf - 1.0) / phi.powf(mf - 1.0);
                }
                g
            }
            PhiFamily::ParaboloidOffset => {
                let mut g = [0.0; 3];
                for i in 0..d - 1 {
                    g[i] = -2.0 * (x[i] - y[i]);
                }
                g[d - 1] = 1.0;
                g
            }
            PhiFamily::Polynomial(terms) => {
                let mut g = [0.0; 3];
                for t in terms {
                    for i in 0..d {
                        if t.x_pows[i] == 0 {
                            continue;
                        }
                        let mut v = t.coeff * t.x_pows[i] as f64 * x[i].powi(t.x_pows[i] as i32 - 1);
                        for j in 0..d {
                            if j != i {
                                v *= x[j].powi(t.x_pows[j] as i32);
                            }
                            v *= y[j].powi(t.y_pows[j] as i32);
                        }
                        g[i] += v;
                    }
                }
                g
            }
        }
    }

    pub fn grad_y(&self, d: usize, x: Point, y: Point) -> Point {
        match self {
            PhiFamily::Distance | PhiFamily::LmNorm(_) => {
                let g = self.grad_x(d, x, y);
                let mut out = [0.0; 3];
                for i in 0..d {
                    out[i] = -g[i];
                }
                out
            }
            PhiFamily::DotProduct => {
                let mut g = [0.0; 3];
                g[..d].copy_from_slice(&x[..d]);
                g
            }
            PhiFamily::ParaboloidOffset => {
                let mut g = [0.0; 3];
                for i in 0..d - 1 {
                    g[i] = 2.0 * (x[i] - y[i]);
                }
                g[d - 1] = -1.0;
                g
            }
            PhiFamily::Polynomial(terms) => {
                let mut g = [0.0; 3];
                for t in terms {
                    for i in 0..d {
                        if t.y_pows[i] == 0 {
                            continue;
                        }
                        let mut v = t.coeff * t.y_pows[i] as f64 * y[i].powi(t.y_pows[i] as i32 - 1);
                        for j in 0..d {
                            if j != i {
                                v *= y[j].powi(t.y_pows[j] as i32);
                            }
                            v *= x[j].powi(t.x_pows[j] as i32);
                        }
                        g[i] += v;
                    }
                }
                g
            }
        }
    }

    /// Mixed second derivatives `d^2 phi / dx_i dy_j` by central differences
    /// of the closed-form `grad_x`; accurate to the step squared, which is
    /// plenty for a nonvanishing test.
    pub fn mixed_hessian(&self, d: usize, x: Point, y: Point) -> Matrix3<f64> {
        let h = 1e-5;
        let mut m = Matrix3::zeros();
        for j in 0..d {
            let mut yp = y;
            let mut ym = y;
            yp[j] += h;
            ym[j] -= h;
            let gp = self.grad_x(d, x, yp);
            let gm = self.grad_x(d, x, ym);
            for i in 0..d {
                m[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        m
    }

    /// A Lipschitz bound for `y -> phi(x, y)` over sampled box points, used
    /// to size conservative level-set margins.
    pub fn lipschitz_y(&self, d: usize, box_side: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let mut x = [0.0; 3];
            let mut y = [0.0; 3];
            for i in 0..d {
                x[i] = rng.random::<f64>() * box_side;
                y[i] = rng.random::<f64>() * box_side;
            }
            if matches!(self, PhiFamily::Distance | PhiFamily::LmNorm(_)) {
                let r = self.eval(d, x, y);
                if r < 1e-3 {
                    continue;
                }
            }
            let g = self.grad_y(d, x, y);
            let norm = (0..d).map(|i| g[i] * g[i]).sum::<f64>().sqrt();
            worst = worst.max(norm);
        }
        worst.max(1.0)
    }
}

/// Checks closed-form gradients against central finite differences at random
/// points; fails above `1e-6` relative error.
pub fn validate_gradients(phi: &PhiFamily, d: usize, seed: u64) -> Result<f64, MapError> {
    phi.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let mut x = [0.0; 3];
        let mut y = [0.0; 3];
        for i in 0..d {
            x[i] = rng.random::<f64>();
            y[i] = rng.random::<f64>();
        }
        // keep away from the distance singularity at x = y
        if matches!(phi, PhiFamily::Distance | PhiFamily::LmNorm(_)) && phi.eval(d, x, y) < 0.2 {
            continue;
        }
        checked += 1;
        let gx = phi.grad_x(d, x, y);
        let gy = phi.grad_y(d, x, y);
        for i in 0..d {
            for (analytic, point, is_x) in [(gx[i], x, true), (gy[i], y, false)] {
                let mut hi = point;
                let mut lo = point;
                hi[i] += h;
                lo[i] -= h;
                let (fp, fm) = if is_x {
                    (phi.eval(d, hi, y), phi.eval(d, lo, y))
                } else {
                    (phi.eval(d, x, hi), phi.eval(d, x, lo))
                };
                let numeric = (fp - fm) / (2.0 * h);
                let scale = analytic.abs().max(numeric.abs()).max(1.0);
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    if worst > 1e-6 {
        return Err(MapError::GradientMismatch(worst));
    }
    Ok(worst)
}

/// The bordered determinant
/// `det [ 0, grad_x phi ; -(grad_y phi)^T, d^2 phi/dx dy ]`
/// at one configuration.
pub fn bordered_determinant(phi: &PhiFamily, d: usize, x: Point, y: Point) -> f64 {
    let gx = phi.grad_x(d, x, y);
    let gy = phi.grad_y(d, x, y);
    let h = phi.mixed_hessian(d, x, y);
    let n = d + 1;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..d {
        m[(0, i + 1)] = gx[i];
        m[(i + 1, 0)] = -gy[i];
        for j in 0..d {
            m[(i + 1, j + 1)] = h[(i, j)];
        }
    }
    m.determinant()
}

/// Minimum `|det|` of the bordered matrix over seeded samples of the level
/// set `{(x, y) : |phi(x,y) - t| <= eps}`; a positive floor certifies the
/// curvature condition on the sampled region.
pub fn phong_stein_det(
    phi: &PhiFamily,
    d: usize,
    t: f64,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64, MapError> {
    phi.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_tries = n_samples * 4000;
    let mut found = 0;
    let mut min_det = f64::INFINITY;
    for _ in 0..max_tries {
        if found >= n_samples {
            break;
        }
        let mut x = [0.0; 3];
        let mut y = [0.0; 3];
        for i in 0..d {
            x[i] = rng.random::<f64>() * 2.0;
            y[i] = rng.random::<f64>() * 2.0;
        }
        // project y along the y-gradient onto the level, then verify
        for _ in 0..8 {
            let v = phi.eval(d, x, y) - t;
            if v.abs() <= eps {
                break;
            }
            let g = phi.grad_y(d, x, y);
            let norm2: f64 = (0..d).map(|i| g[i] * g[i]).sum();
            if norm2 < 1e-12 {
                break;
            }
            for i in 0..d {
                y[i] -= v * g[i] / norm2;
            }
        }
        if (phi.eval(d, x, y) - t).abs() > eps {
            continue;
        }
        found += 1;
        min_det = min_det.min(bordered_determinant(phi, d, x, y).abs());
    }
    if found == 0 {
        return Err(MapError::NoSamplesOnLevelSet(max_tries));
    }
    Ok(min_det)
}

/// Smallest linear-independence measure of the two gradient families over
/// seeded samples of the joint level set; `d = 2` uses the determinant,
/// `d = 3` the cross-product norm, both normalized by the gradient norms.
pub fn check_fibration(
    phis: &[PhiFamily; 2],
    d: usize,
    t: [f64; 2],
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64, MapError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let max_tries = n_samples * 4000;
    let mut found = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..max_tries {
        if found >= n_samples {
            break;
        }
        let mut x1 = [0.0; 3];
        let mut x2 = [0.0; 3];
        let mut y = [0.0; 3];
        for i in 0..d {
            x1[i] = rng.random::<f64>() * 2.0;
            x2[i] = rng.random::<f64>() * 2.0;
            y[i] = rng.random::<f64>() * 2.0;
        }
        // alternate projections onto the two levels
        for _ in 0..16 {
            let mut done = true;
            for (phi, xx, tt) in [(&phis[0], x1, t[0]), (&phis[1], x2, t[1])] {
                let v = phi.eval(d, xx, y) - tt;
                if v.abs() > eps {
                    done = false;
                    let g = phi.grad_y(d, xx, y);
                    let norm2: f64 = (0..d).map(|i| g[i] * g[i]).sum();
                    if norm2 < 1e-12 {
                        break;
                    }
                    for i in 0..d {
                        y[i] -= v * g[i] / norm2;
                    }
                }
            }
            if done {
                break;
            }
        }
        if (phis[0].eval(d, x1, y) - t[0]).abs() > eps
            || (phis[1].eval(d, x2, y) - t[1]).abs() > eps
        {
            continue;
        }
        found += 1;
        let m = independence(phis[0].grad_y(d, x1, y), phis[1].grad_y(d, x2, y), d)
            .min(independence(phis[0].grad_x(d, x1, y), phis[1].grad_x(d, x2, y), d));
        worst = worst.min(m);
    }
    if found == 0 {
        return Err(MapError::NoSamplesOnLevelSet(max_tries));
    }
    Ok(worst)
}

fn independence(a: Point, b: Point, d: usize) -> f64 {
    let na: f64 = (0..d).map(|i| a[i] * a[i]).sum::<f64>().sqrt();
    let nb: f64 = (0..d).map(|i| b[i] * b[i]).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    if d == 2 {
        (a[0] * b[1] - a[1] * b[0]).abs() / (na * nb)
    } else {
        let c = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() / (na * nb)
    }
}

/// Level values for one or two equations, or a tabulated selection `t(x)`.
#[derive(Debug, Clone)]
pub enum LevelValues {
    Scalar(f64),
    Pair(f64, f64),
    Table(Vec<(Point, f64)>),
}

/// A full map specification: the defining family or families, the smooth
/// translation reparameterization, and the level data.
#[derive(Debug, Clone)]
pub struct MapSpec {
    pub maps: Vec<PhiFamily>,
    pub diffeo: Diffeo,
    pub level: LevelValues,
}

impl MapSpec {
    pub fn single(phi: PhiFamily, t: f64) -> MapSpec {
        MapSpec { maps: vec![phi], diffeo: Diffeo::Identity, level: LevelValues::Scalar(t) }
    }

    pub fn pair(phi1: PhiFamily, phi2: PhiFamily, t: [f64; 2]) -> MapSpec {
        MapSpec {
            maps: vec![phi1, phi2],
            diffeo: Diffeo::Identity,
            level: LevelValues::Pair(t[0], t[1]),
        }
    }

    pub fn m_equations(&self) -> usize {
        self.maps.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gradients_match_finite_differences() {
        for phi in [
            PhiFamily::Distance,
            PhiFamily::DotProduct,
            PhiFamily::LmNorm(4),
            PhiFamily::ParaboloidOffset,
            PhiFamily::Polynomial(vec![
                Monomial { coeff: 1.5, x_pows: [2, 0, 0], y_pows: [0, 1, 0] },
                Monomial { coeff: -0.5, x_pows: [0, 1, 0], y_pows: [1, 0, 0] },
            ]),
        ] {
            for d in [2usize, 3] {
                let worst = validate_gradients(&phi, d, 11).unwrap();
                assert!(worst <= 1e-6, "{phi:?} in d={d}: {worst}");
            }
        }
    }

    #[test]
    fn distance_determinant_is_inverse_radius_power() {
        // closed form: |det| = t^-(d-1) on the level set of the distance
        for d in [2usize, 3] {
            let min = phong_stein_det(&PhiFamily::Distance, d, 1.0, 1e-9, 50, 3).unwrap();
            assert_relative_eq!(min, 1.0, epsilon = 1e-4);
            let min = phong_stein_det(&PhiFamily::Distance, d, 0.5, 1e-9, 50, 3).unwrap();
            assert_relative_eq!(min, 2f64.powi(d as i32 - 1), epsilon = 1e-4);
        }
    }

    #[test]
    fn dot_determinant_is_level() {
        let min = phong_stein_det(&PhiFamily::DotProduct, 2, 1.0, 1e-9, 50, 5).unwrap();
        assert_relative_eq!(min, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn paraboloid_offset_determinant_constant() {
        let min = phong_stein_det(&PhiFamily::ParaboloidOffset, 2, 0.0, 1e-9, 50, 7).unwrap();
        assert_relative_eq!(min, 2.0, epsilon = 1e-4);
    }

    #[test]
    fn lm_norm_degree_validated() {
        assert_eq!(PhiFamily::LmNorm(3).validate(), Err(MapError::BadDegree(3)));
        assert!(PhiFamily::LmNorm(4).validate().is_ok());
    }

    #[test]
    fn two_sphere_gradients_independent() {
        let phis = [PhiFamily::Distance, PhiFamily::Distance];
        let m = check_fibration(&phis, 3, [1.0, 1.0], 1e-6, 40, 9).unwrap();
        assert!(m > 1e-3, "independence measure {m}");
    }
}
