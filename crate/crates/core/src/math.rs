//! Small fixed-size linear-algebra helpers: the cross-product (hat) matrix
//! and rotation re-orthonormalization.

use nalgebra::{Matrix3, Vector3};

/// Cross-product matrix of `v`: `hat(v) * x == v.cross(&x)`.
#[inline]
#[rustfmt::skip]
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0,  -v.z,  v.y,
        v.z,   0.0, -v.x,
       -v.y,   v.x,  0.0,
    )
}

/// Inverse of [`hat`] for a skew-symmetric matrix.
#[inline]
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Re-orthonormalizes a near-rotation matrix with modified Gram-Schmidt on
/// its columns, forcing the third column to `e1 x e2` so det stays +1.
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = r.column(0).into_owned();
    let c1 = r.column(1).into_owned();
    let e0 = c0.normalize();
    let e1 = (c1 - e0 * e0.dot(&c1)).normalize();
    let e2 = e0.cross(&e1);
    Matrix3::from_columns(&[e0, e1, e2])
}

/// Frobenius-norm departure from orthonormality, `|| R^T R - I ||_F`.
pub fn orthonormality_defect(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Rotation about the global x-axis.
pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Rotation about the global y-axis.
pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation about the global z-axis.
pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn hat_matches_cross_product() {
        let u = Vector3::new(0.3, -1.2, 2.5);
        let x = Vector3::new(-0.7, 0.1, 0.9);
        assert_relative_eq!(hat(&u) * x, u.cross(&x), epsilon = 0.0);
    }

    #[test]
    fn vee_inverts_hat() {
        let u = Vector3::new(1.5, -0.25, 0.75);
        assert_eq!(vee(&hat(&u)), u);
    }

    #[test]
    fn orthonormalize_fixes_drifted_rotation() {
        let drift = rot_x(0.4) * rot_y(-1.1) + Matrix3::from_element(1e-7);
        let fixed = orthonormalize(&drift);
        assert!(orthonormality_defect(&fixed) < 1e-14);
        assert_relative_eq!(fixed.determinant(), 1.0, epsilon = 1e-13);
    }

    proptest! {
        #[test]
        fn hat_is_skew_and_acts_as_cross(
            ux in -10.0..10.0f64, uy in -10.0..10.0f64, uz in -10.0..10.0f64,
            xx in -10.0..10.0f64, xy in -10.0..10.0f64, xz in -10.0..10.0f64,
        ) {
            let u = Vector3::new(ux, uy, uz);
            let x = Vector3::new(xx, xy, xz);
            let h = hat(&u);
            prop_assert_eq!(h + h.transpose(), Matrix3::zeros());
            prop_assert_eq!(h * x, u.cross(&x));
        }
    }
}
