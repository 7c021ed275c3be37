//! Built-in diffeomorphisms: identity, affine maps with invertible linear
//! part, and componentwise polynomials with nonvanishing derivative.

use crate::grid::{GridSpec, Point, MAX_DIM};
use nalgebra::{Matrix3, Vector3};

/// A smooth map of the box used for translated-set experiments and for the
/// `transform` operation.
#[derive(Debug, Clone)]
pub enum Diffeo {
    Identity,
    Affine { linear: Matrix3<f64>, offset: Vector3<f64> },
    /// Componentwise cubic `x_i -> c0 + c1 x_i + c2 x_i^2 + c3 x_i^3`; the
    /// jacobian is diagonal, so invertibility reduces to a nonvanishing
    /// derivative per axis.
    Polynomial { coeffs: [[f64; 4]; MAX_DIM] },
}

impl Diffeo {
    pub fn translation(z: Point) -> Diffeo {
        Diffeo::Affine { linear: Matrix3::identity(), offset: Vector3::new(z[0], z[1], z[2]) }
    }

    pub fn apply(&self, p: Point) -> Point {
        match self {
            Diffeo::Identity => p,
            Diffeo::Affine { linear, offset } => {
                let q = linear * Vector3::new(p[0], p[1], p[2]) + offset;
                [q[0], q[1], q[2]]
            }
            Diffeo::Polynomial { coeffs } => {
                let mut q = [0.0; 3];
                for i in 0..MAX_DIM {
                    let c = coeffs[i];
                    let x = p[i];
                    q[i] = c[0] + x * (c[1] + x * (c[2] + x * c[3]));
                }
                q
            }
        }
    }

    fn derivative_axis(&self, i: usize, x: f64) -> f64 {
        match self {
            Diffeo::Identity => 1.0,
            Diffeo::Affine { .. } => 1.0, // not used on this variant
            Diffeo::Polynomial { coeffs } => {
                let c = coeffs[i];
                c[1] + x * (2.0 * c[2] + x * 3.0 * c[3])
            }
        }
    }

    /// Checks the jacobian on a sample of box points. Affine maps check the
    /// determinant once; polynomials check each axis derivative on a fine
    /// one-dimensional sweep (the jacobian is diagonal).
    pub fn jacobian_nonvanishing(&self, grid: &GridSpec) -> bool {
        match self {
            Diffeo::Identity => true,
            Diffeo::Affine { linear, .. } => linear.determinant().abs() > 1e-12,
            Diffeo::Polynomial { .. } => {
                let side = grid.box_side() as f64;
                let steps = 256;
                for i in 0..grid.d() {
                    for t in 0..=steps {
                        let x = side * t as f64 / steps as f64;
                        if self.derivative_axis(i, x).abs() < 1e-9 {
                            return false;
                        }
                    }
                }
                true
            }
        }
    }

    /// A neutral polynomial entry: the identity on every axis.
    pub fn identity_coeffs() -> [[f64; 4]; MAX_DIM] {
        [[0.0, 1.0, 0.0, 0.0]; MAX_DIM]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_jacobian_check() {
        let grid = GridSpec::new(2, 4, 1).unwrap();
        let mut coeffs = Diffeo::identity_coeffs();
        coeffs[0] = [0.0, 1.0, 0.2, 0.0]; // derivative 1 + 0.4 x > 0 on [0,1]
        assert!(Diffeo::Polynomial { coeffs }.jacobian_nonvanishing(&grid));
        coeffs[0] = [0.5, -1.0, 1.0, 0.0]; // derivative -1 + 2x vanishes at 1/2
        assert!(!Diffeo::Polynomial { coeffs }.jacobian_nonvanishing(&grid));
    }

    #[test]
    fn translation_applies() {
        let f = Diffeo::translation([0.25, -0.5, 0.0]);
        let q = f.apply([0.5, 0.5, 0.0]);
        assert_eq!(q, [0.75, 0.0, 0.0]);
    }
}
