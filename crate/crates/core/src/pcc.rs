//! Piecewise-constant-curvature kinematics.
//!
//! A segment is approximated by a circular arc with curvature `kappa`,
//! bending-plane angle `phi` (about z, from the x-axis), and arc length
//! `length`. The mapping covers the planar branches `phi = 0` (x-z plane)
//! and `phi = pi/2` (y-z plane), which is what the arm's two bending
//! channels produce.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{rot_y, rot_z};

/// Arc-length formula choice for the tip-to-arc inversion.
///
/// `Geometric` uses `L = (2/kappa) atan(x/z)`, exact for a constant-
/// curvature arc since `x/z = tan(theta/2)`. `PaperVerbatim` keeps the
/// printed `L = (1/kappa) atan(x/z)`, which is half the geometric value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PccMode {
    #[default]
    Geometric,
    PaperVerbatim,
}

impl std::str::FromStr for PccMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "geometric" => Ok(PccMode::Geometric),
            "paper-verbatim" => Ok(PccMode::PaperVerbatim),
            other => Err(format!(
                "unknown pcc mode '{other}' (expected 'geometric' or 'paper-verbatim')"
            )),
        }
    }
}

/// Constant-curvature description of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PccConfig {
    /// Curvature (1/m); signed, zero for a straight segment.
    pub kappa: f64,
    /// Bending-plane angle about z from the x-axis (rad), in `[0, 2 pi)`.
    pub phi: f64,
    /// Arc length (m).
    pub length: f64,
}

/// Tip pose of a segment expressed in the segment's base frame.
#[derive(Debug, Clone, Copy)]
pub struct TipPose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

/// Tolerance deciding whether a tip coordinate counts as in-plane.
const BRANCH_EPS: f64 = 1e-9;

fn arc_from_plane(inplane: f64, z: f64, mode: PccMode) -> (f64, f64) {
    let kappa = 2.0 * inplane / (inplane * inplane + z * z);
    let half_angle = (inplane / z).atan();
    let length = match mode {
        PccMode::Geometric => 2.0 * half_angle / kappa,
        PccMode::PaperVerbatim => half_angle / kappa,
    };
    (kappa, length)
}

/// Inverts a tip position to the arc variables on the planar branches.
///
/// `|y| < eps` selects the `phi = 0` branch (x-z plane), `|x| < eps` the
/// `phi = pi/2` branch; when both coordinates are in-plane the segment is
/// straight (`kappa = 0`, `L = z`). A tip outside all branches is rejected.
pub fn tip_to_pcc(tip: &TipPose, mode: PccMode) -> Result<PccConfig> {
    let x = tip.position.x;
    let y = tip.position.y;
    let z = tip.position.z;
    if x.abs() < BRANCH_EPS && y.abs() < BRANCH_EPS {
        return Ok(PccConfig {
            kappa: 0.0,
            phi: 0.0,
            length: z,
        });
    }
    if y.abs() < BRANCH_EPS {
        let (kappa, length) = arc_from_plane(x, z, mode);
        return Ok(PccConfig {
            kappa,
            phi: 0.0,
            length,
        });
    }
    if x.abs() < BRANCH_EPS {
        let (kappa, length) = arc_from_plane(y, z, mode);
        return Ok(PccConfig {
            kappa,
            phi: std::f64::consts::FRAC_PI_2,
            length,
        });
    }
    Err(Error::OutOfBranch { x, y })
}

/// Branch-tolerant variant used by the virtual-measurement path: projects
/// the tip onto the dominant bending plane instead of rejecting slightly
/// out-of-plane poses, treating the smaller lateral coordinate as zero.
pub fn tip_to_pcc_dominant(tip: &TipPose, mode: PccMode) -> PccConfig {
    let x = tip.position.x;
    let y = tip.position.y;
    let z = tip.position.z;
    if x.abs() < BRANCH_EPS && y.abs() < BRANCH_EPS {
        return PccConfig {
            kappa: 0.0,
            phi: 0.0,
            length: z,
        };
    }
    if x.abs() >= y.abs() {
        let (kappa, length) = arc_from_plane(x, z, mode);
        PccConfig {
            kappa,
            phi: 0.0,
            length,
        }
    } else {
        let (kappa, length) = arc_from_plane(y, z, mode);
        PccConfig {
            kappa,
            phi: std::f64::consts::FRAC_PI_2,
            length,
        }
    }
}

/// Maps arc variables to configuration-space variables:
/// `phi = 0` gives `u_y = kappa`, `phi = pi/2` gives `u_x = -kappa`, and
/// the extension ratio is `v_z = 1 + (L - L0)/L0`.
pub fn pcc_to_config(pcc: &PccConfig, l0: f64) -> (f64, f64, f64) {
    assert!(l0 > 0.0);
    let v_z = 1.0 + (pcc.length - l0) / l0;
    if pcc.kappa == 0.0 {
        return (0.0, 0.0, v_z);
    }
    if pcc.phi == 0.0 {
        (0.0, pcc.kappa, v_z)
    } else {
        (-pcc.kappa, 0.0, v_z)
    }
}

/// Forward constant-curvature kinematics: the tip pose of an arc in its
/// base frame. Below `|kappa L| = 1e-6` a series expansion removes the
/// singularity continuously.
pub fn pcc_forward(pcc: &PccConfig) -> TipPose {
    let theta = pcc.kappa * pcc.length;
    let (inplane, height) = if pcc.kappa == 0.0 {
        (0.0, pcc.length)
    } else if theta.abs() < 1e-6 {
        (
            pcc.kappa * pcc.length * pcc.length / 2.0 * (1.0 - theta * theta / 12.0),
            pcc.length * (1.0 - theta * theta / 6.0),
        )
    } else {
        ((1.0 - theta.cos()) / pcc.kappa, theta.sin() / pcc.kappa)
    };
    let position = Vector3::new(
        inplane * pcc.phi.cos(),
        inplane * pcc.phi.sin(),
        height,
    );
    // Bend about the phi-rotated y-axis without net twist.
    let rotation = rot_z(pcc.phi) * rot_y(theta) * rot_z(-pcc.phi);
    TipPose { position, rotation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn straight_tip_maps_to_zero_curvature() {
        let tip = TipPose {
            position: Vector3::new(0.0, 0.0, 0.185),
            rotation: Matrix3::identity(),
        };
        let pcc = tip_to_pcc(&tip, PccMode::Geometric).unwrap();
        assert_eq!(pcc.kappa, 0.0);
        assert_relative_eq!(pcc.length, 0.185, epsilon = 0.0);
    }

    #[test]
    fn quarter_circle_curvature_from_tip() {
        let r = 0.2;
        let tip = TipPose {
            position: Vector3::new(r, 0.0, r),
            rotation: rot_y(FRAC_PI_2),
        };
        let pcc = tip_to_pcc(&tip, PccMode::Geometric).unwrap();
        assert_relative_eq!(pcc.kappa, 1.0 / r, max_relative = 1e-12);
        // Geometric arc length of the quarter circle.
        assert_relative_eq!(pcc.length, r * FRAC_PI_2, max_relative = 1e-12);
    }

    #[test]
    fn paper_mode_halves_the_geometric_length() {
        let r = 0.31;
        let tip = TipPose {
            position: Vector3::new(r, 0.0, r),
            rotation: rot_y(FRAC_PI_2),
        };
        let geo = tip_to_pcc(&tip, PccMode::Geometric).unwrap();
        let paper = tip_to_pcc(&tip, PccMode::PaperVerbatim).unwrap();
        assert_eq!(paper.length, geo.length / 2.0);
        assert_eq!(paper.kappa, geo.kappa);
    }

    #[test]
    fn out_of_branch_tip_is_rejected() {
        let tip = TipPose {
            position: Vector3::new(0.05, 0.04, 0.18),
            rotation: Matrix3::identity(),
        };
        assert!(matches!(
            tip_to_pcc(&tip, PccMode::Geometric),
            Err(Error::OutOfBranch { .. })
        ));
        // The dominant-plane projection accepts the same pose.
        let dom = tip_to_pcc_dominant(&tip, PccMode::Geometric);
        assert_eq!(dom.phi, 0.0);
    }

    #[test]
    fn config_mapping_examples() {
        let l0 = 0.185;
        let straight = PccConfig {
            kappa: 0.0,
            phi: 0.0,
            length: l0,
        };
        assert_eq!(pcc_to_config(&straight, l0), (0.0, 0.0, 1.0));

        let bent = PccConfig {
            kappa: 3.0,
            phi: FRAC_PI_2,
            length: l0,
        };
        let (ux, uy, _) = pcc_to_config(&bent, l0);
        assert_eq!((ux, uy), (-3.0, 0.0));

        let stretched = PccConfig {
            kappa: 0.0,
            phi: 0.0,
            length: 1.1 * l0,
        };
        let (_, _, vz) = pcc_to_config(&stretched, l0);
        assert_relative_eq!(vz, 1.1, epsilon = 1e-12);
    }

    #[test]
    fn forward_straight_and_quarter_arc() {
        let straight = pcc_forward(&PccConfig {
            kappa: 0.0,
            phi: 0.0,
            length: 0.2,
        });
        assert_eq!(straight.position, Vector3::new(0.0, 0.0, 0.2));
        assert_relative_eq!(straight.rotation, Matrix3::identity(), epsilon = 0.0);

        let r = 0.15;
        let quarter = pcc_forward(&PccConfig {
            kappa: 1.0 / r,
            phi: 0.0,
            length: r * FRAC_PI_2,
        });
        assert_relative_eq!(quarter.position, Vector3::new(r, 0.0, r), max_relative = 1e-12);
    }

    #[test]
    fn forward_is_continuous_at_zero_curvature() {
        let length = 0.185;
        let tiny = pcc_forward(&PccConfig {
            kappa: 1e-9,
            phi: 0.0,
            length,
        });
        let zero = pcc_forward(&PccConfig {
            kappa: 0.0,
            phi: 0.0,
            length,
        });
        assert!((tiny.position - zero.position).norm() < 1e-10);
    }

    #[test]
    fn forward_phi_90_bends_toward_y_with_negative_ux() {
        let pcc = PccConfig {
            kappa: 2.0,
            phi: FRAC_PI_2,
            length: 0.185,
        };
        let tip = pcc_forward(&pcc);
        assert!(tip.position.y > 0.0);
        assert!(tip.position.x.abs() < 1e-12);
        // The tangent must match Rot_x(-theta) e3.
        let theta = pcc.kappa * pcc.length;
        let tangent = tip.rotation * Vector3::new(0.0, 0.0, 1.0);
        assert_relative_eq!(
            tangent,
            Vector3::new(0.0, theta.sin(), theta.cos()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn small_deformation_limit_matches_linearization() {
        // For kappa L << 1 the curvature recovered from the tip deflection
        // approaches 2x/z^2.
        let l = 0.185;
        let kappa = 0.05;
        let tip = pcc_forward(&PccConfig {
            kappa,
            phi: 0.0,
            length: l,
        });
        let lin = 2.0 * tip.position.x / (tip.position.z * tip.position.z);
        let theta = kappa * l;
        assert!((lin - kappa).abs() <= kappa * theta * theta);
    }

    proptest! {
        // Geometric-mode round trip over moderate arcs in both planes.
        #[test]
        fn round_trip_recovers_arc(
            theta in 1e-3..(0.9 * PI),
            length in 0.05..0.5f64,
            plane in 0usize..2,
            sign in prop::bool::ANY,
        ) {
            let kappa = if sign { theta / length } else { -theta / length };
            let phi = if plane == 0 { 0.0 } else { FRAC_PI_2 };
            let pcc = PccConfig { kappa, phi, length };
            let tip = pcc_forward(&pcc);
            let back = tip_to_pcc(&tip, PccMode::Geometric).unwrap();
            prop_assert!((back.kappa - kappa).abs() <= 1e-9 * kappa.abs().max(1.0));
            prop_assert!((back.length - length).abs() <= 1e-9 * length);
            prop_assert_eq!(back.phi, phi);
        }

        // The kappa formula recovers the generating curvature in both modes.
        #[test]
        fn kappa_formula_self_consistency(theta in 1e-3..(0.9 * PI), length in 0.05..0.5f64) {
            let kappa = theta / length;
            let tip = pcc_forward(&PccConfig { kappa, phi: 0.0, length });
            for mode in [PccMode::Geometric, PccMode::PaperVerbatim] {
                let back = tip_to_pcc(&tip, mode).unwrap();
                prop_assert!((back.kappa - kappa).abs() <= 1e-9 * kappa);
            }
        }
    }
}
