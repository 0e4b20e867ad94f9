//! Cosserat rod domain types, the linear constitutive law, and the spatial
//! right-hand sides of the rod PDEs after time discretization.
//!
//! Conventions: position `p`, orientation `R`, internal force `n`, and
//! internal moment `m` live in the global frame; the configuration variables
//! `v` (rate of position) and `u` (curvature), and the velocities `q`
//! (translational) and `w` (angular), live in the local cross-section frame.
//! The undeformed reference is `v* = (0, 0, 1)`, `u* = 0`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::bdf::BdfCoeffs;
use crate::error::{Error, Result};
use crate::math::hat;

/// Geometry, material, and chamber layout of one silicone segment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Density (kg/m^3).
    pub rho: f64,
    /// Undeformed cross-section radius (m).
    pub r0: f64,
    /// Undeformed segment length (m).
    pub l0: f64,
    /// Shear modulus (Pa).
    pub shear_modulus: f64,
    /// Young's modulus (Pa).
    pub youngs_modulus: f64,
    /// Shear correction factor for the circular section.
    pub alpha_c: f64,
    /// Damping time constant (s). Zero disables internal damping.
    pub tau: f64,
    /// Gravity vector in the global frame (m/s^2).
    pub gravity: Vector3<f64>,
    /// Chamber offset vectors from the backbone, local frame (m).
    pub chamber_offsets: [Vector3<f64>; 4],
    /// Chamber cap area (m^2).
    pub chamber_area: f64,
    /// Segment mass (kg). Informational only: the dynamics are carried by
    /// `rho` and the cross-section area.
    pub mass: f64,
}

impl MaterialParams {
    /// Default parameters of one fabricated silicone segment.
    pub fn silicone_segment() -> Self {
        let chamber_radius = 0.003;
        let d = chamber_radius / std::f64::consts::SQRT_2;
        Self {
            rho: 792.8,
            r0: 0.053,
            l0: 0.185,
            shear_modulus: 0.1e6,
            youngs_modulus: 0.28e6,
            alpha_c: 4.0 / 3.0,
            tau: 0.0,
            gravity: Vector3::new(0.0, 0.0, -9.81),
            // Four chambers on the cross-section diagonals; they sum to zero.
            chamber_offsets: [
                Vector3::new(-d, d, 0.0),
                Vector3::new(d, d, 0.0),
                Vector3::new(-d, -d, 0.0),
                Vector3::new(d, -d, 0.0),
            ],
            chamber_area: 3.1e-4,
            mass: 0.825,
        }
    }

    /// Cross-section area (m^2).
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.r0 * self.r0
    }

    /// Second-moment tensor of the circular section, diagonal
    /// `(pi r^4/4, pi r^4/4, pi r^4/2)` (m^4).
    pub fn second_moment(&self) -> Matrix3<f64> {
        let j = std::f64::consts::PI * self.r0.powi(4) / 4.0;
        Matrix3::from_diagonal(&Vector3::new(j, j, 2.0 * j))
    }

    /// Reference rate of position of the undeformed rod.
    pub fn v_star(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, 1.0)
    }

    /// Reference curvature of the undeformed rod.
    pub fn u_star(&self) -> Vector3<f64> {
        Vector3::zeros()
    }

    /// Checks the structural invariants of the parameter set.
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::InvalidParams(format!("rho = {} must be > 0", self.rho)));
        }
        if !(self.r0 > 0.0) {
            return Err(Error::InvalidParams(format!("r0 = {} must be > 0", self.r0)));
        }
        if !(self.l0 > 0.0) {
            return Err(Error::InvalidParams(format!("l0 = {} must be > 0", self.l0)));
        }
        if !(self.shear_modulus > 0.0) || !(self.youngs_modulus > 0.0) {
            return Err(Error::InvalidParams("elastic moduli must be > 0".into()));
        }
        if !(self.alpha_c > 0.0) {
            return Err(Error::InvalidParams("alpha_c must be > 0".into()));
        }
        if self.tau < 0.0 {
            return Err(Error::InvalidParams(format!("tau = {} must be >= 0", self.tau)));
        }
        if !(self.chamber_area > 0.0) {
            return Err(Error::InvalidParams("chamber area must be > 0".into()));
        }
        let offset_sum: Vector3<f64> = self.chamber_offsets.iter().sum();
        if offset_sum.norm() > 1e-12 {
            return Err(Error::InvalidParams(
                "chamber offsets must be symmetric (sum to zero)".into(),
            ));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidParams("gravity must be finite".into()));
        }
        Ok(())
    }
}

/// Constitutive stiffness and damping matrices (all diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessSet {
    /// Shear/extension stiffness (N).
    pub k_se: Matrix3<f64>,
    /// Bending/torsion stiffness (N m^2).
    pub k_bt: Matrix3<f64>,
    /// Shear/extension damping (N s).
    pub b_se: Matrix3<f64>,
    /// Bending/torsion damping (N m^2 s).
    pub b_bt: Matrix3<f64>,
}

/// Builds the constitutive matrices from material parameters:
/// `K_se = diag(a_c G, a_c G, E) A`, `K_bt = diag(E, E, G) J`, and the
/// damping counterparts `B = tau K`.
pub fn stiffness_matrices(params: &MaterialParams) -> StiffnessSet {
    let a = params.area();
    let j = params.second_moment();
    let g = params.shear_modulus;
    let e = params.youngs_modulus;
    let k_se = Matrix3::from_diagonal(&Vector3::new(
        params.alpha_c * g * a,
        params.alpha_c * g * a,
        e * a,
    ));
    let k_bt = Matrix3::from_diagonal(&Vector3::new(
        e * j[(0, 0)],
        e * j[(1, 1)],
        g * j[(2, 2)],
    ));
    StiffnessSet {
        k_se,
        k_bt,
        b_se: params.tau * k_se,
        b_bt: params.tau * k_bt,
    }
}

impl StiffnessSet {
    /// Scales every stiffness and damping matrix by a common factor.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            k_se: self.k_se * factor,
            k_bt: self.k_bt * factor,
            b_se: self.b_se * factor,
            b_bt: self.b_bt * factor,
        }
    }
}

/// Distributed external load: force and moment per unit length, global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    /// Force per unit length (N/m).
    pub f: Vector3<f64>,
    /// Moment per unit length (N m/m).
    pub l: Vector3<f64>,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        f: Vector3::new(0.0, 0.0, 0.0),
        l: Vector3::new(0.0, 0.0, 0.0),
    };

    pub fn is_finite(&self) -> bool {
        self.f.iter().chain(self.l.iter()).all(|c| c.is_finite())
    }
}

impl std::ops::Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench {
            f: self.f + rhs.f,
            l: self.l + rhs.l,
        }
    }
}

/// Full state of one cross-section.
#[derive(Debug, Clone, Copy)]
pub struct NodeState {
    /// Position, global frame (m).
    pub p: Vector3<f64>,
    /// Orientation matrix, global frame.
    pub r: Matrix3<f64>,
    /// Internal force, global frame (N).
    pub n: Vector3<f64>,
    /// Internal moment, global frame (N m).
    pub m: Vector3<f64>,
    /// Rate of position, local frame.
    pub v: Vector3<f64>,
    /// Curvature, local frame (1/m).
    pub u: Vector3<f64>,
    /// Translational velocity, local frame (m/s).
    pub q: Vector3<f64>,
    /// Angular velocity, local frame (rad/s).
    pub w: Vector3<f64>,
}

impl NodeState {
    /// Undeformed rest state at a given base pose.
    pub fn rest(p: Vector3<f64>, r: Matrix3<f64>) -> Self {
        Self {
            p,
            r,
            n: Vector3::zeros(),
            m: Vector3::zeros(),
            v: Vector3::new(0.0, 0.0, 1.0),
            u: Vector3::zeros(),
            q: Vector3::zeros(),
            w: Vector3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().all(|c| c.is_finite())
            && self.r.iter().all(|c| c.is_finite())
            && self.n.iter().all(|c| c.is_finite())
            && self.m.iter().all(|c| c.is_finite())
            && self.v.iter().all(|c| c.is_finite())
            && self.u.iter().all(|c| c.is_finite())
            && self.q.iter().all(|c| c.is_finite())
            && self.w.iter().all(|c| c.is_finite())
    }
}

/// History terms entering the semi-discretized equations at one material
/// point: the weighted sums of the two previous time steps for each of
/// `v`, `u`, `q`, `w` (units of the corresponding time derivative).
#[derive(Debug, Clone, Copy, Default)]
pub struct HistoryTerms {
    pub v_h: Vector3<f64>,
    pub u_h: Vector3<f64>,
    pub q_h: Vector3<f64>,
    pub w_h: Vector3<f64>,
}

impl HistoryTerms {
    /// Linear blend between the terms at two neighbouring nodes.
    pub fn lerp(a: &HistoryTerms, b: &HistoryTerms, t: f64) -> HistoryTerms {
        HistoryTerms {
            v_h: a.v_h.lerp(&b.v_h, t),
            u_h: a.u_h.lerp(&b.u_h, t),
            q_h: a.q_h.lerp(&b.q_h, t),
            w_h: a.w_h.lerp(&b.w_h, t),
        }
    }
}

/// Closed-form configuration update: recovers `(v, u)` from the internal
/// wrench, the reference configuration, and the damping history:
///
/// ```text
/// v = (K_se + c0 B_se)^-1 (R^T n + K_se v* - B_se v_h)
/// u = (K_bt + c0 B_bt)^-1 (R^T m + K_bt u* - B_bt u_h)
/// ```
pub fn closed_form_config(
    n: &Vector3<f64>,
    m: &Vector3<f64>,
    r: &Matrix3<f64>,
    hist: &HistoryTerms,
    stiff: &StiffnessSet,
    c0: f64,
    params: &MaterialParams,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let a_se = stiff.k_se + c0 * stiff.b_se;
    let a_bt = stiff.k_bt + c0 * stiff.b_bt;
    // Diagonal by construction; invert entrywise and reject degenerate input.
    let inv_diag = |m: &Matrix3<f64>, label: &'static str| -> Result<Matrix3<f64>> {
        let d = m.diagonal();
        if d.iter().any(|x| x.abs() < f64::MIN_POSITIVE) {
            return Err(Error::ConstitutiveSingularity(label));
        }
        Ok(Matrix3::from_diagonal(&Vector3::new(
            1.0 / d.x,
            1.0 / d.y,
            1.0 / d.z,
        )))
    };
    let v = inv_diag(&a_se, "K_se + c0 B_se")?
        * (r.transpose() * n + stiff.k_se * params.v_star() - stiff.b_se * hist.v_h);
    let u = inv_diag(&a_bt, "K_bt + c0 B_bt")?
        * (r.transpose() * m + stiff.k_bt * params.u_star() - stiff.b_bt * hist.u_h);
    Ok((v, u))
}

/// Time derivatives of the configuration and velocity variables,
/// reconstructed from the current values and the history terms.
#[derive(Debug, Clone, Copy)]
pub struct ConfigRates {
    pub v_t: Vector3<f64>,
    pub u_t: Vector3<f64>,
    pub q_t: Vector3<f64>,
    pub w_t: Vector3<f64>,
}

impl ConfigRates {
    /// `x_t = c0 x + x_h` for each channel.
    pub fn reconstruct(
        c0: f64,
        v: &Vector3<f64>,
        u: &Vector3<f64>,
        q: &Vector3<f64>,
        w: &Vector3<f64>,
        hist: &HistoryTerms,
    ) -> Self {
        Self {
            v_t: c0 * v + hist.v_h,
            u_t: c0 * u + hist.u_h,
            q_t: c0 * q + hist.q_h,
            w_t: c0 * w + hist.w_h,
        }
    }

    /// Static rod: every time derivative vanishes.
    pub fn zero() -> Self {
        Self {
            v_t: Vector3::zeros(),
            u_t: Vector3::zeros(),
            q_t: Vector3::zeros(),
            w_t: Vector3::zeros(),
        }
    }
}

/// Spatial derivatives of the rod state.
#[derive(Debug, Clone, Copy)]
pub struct SpatialDerivs {
    pub p_s: Vector3<f64>,
    pub r_s: Matrix3<f64>,
    pub n_s: Vector3<f64>,
    pub m_s: Vector3<f64>,
    pub q_s: Vector3<f64>,
    pub w_s: Vector3<f64>,
}

/// Right-hand sides of the rod equations at one cross-section:
///
/// ```text
/// n_s = R rho A (hat(w) q + q_t) - f
/// m_s = R rho (hat(w) J w + J w_t) - hat(p_s) n - l
/// p_s = R v            R_s = R hat(u)
/// q_s = v_t - hat(u) q + hat(w) v
/// w_s = u_t - hat(u) w
/// ```
pub fn spatial_rhs(
    state: &NodeState,
    rates: &ConfigRates,
    ext: &Wrench,
    params: &MaterialParams,
) -> SpatialDerivs {
    let rho_a = params.rho * params.area();
    let j = params.second_moment();
    let u_hat = hat(&state.u);
    let w_hat = hat(&state.w);

    let p_s = state.r * state.v;
    let r_s = state.r * u_hat;
    let n_s = state.r * (rho_a * (w_hat * state.q + rates.q_t)) - ext.f;
    let m_s =
        state.r * (params.rho * (w_hat * (j * state.w) + j * rates.w_t)) - hat(&p_s) * state.n
            - ext.l;
    let q_s = rates.v_t - u_hat * state.q + w_hat * state.v;
    let w_s = rates.u_t - u_hat * state.w;

    SpatialDerivs {
        p_s,
        r_s,
        n_s,
        m_s,
        q_s,
        w_s,
    }
}

/// Per-node history of the configuration and velocity variables over the two
/// previous time steps, from which the BDF history terms are derived.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    prev1: Vec<ChannelSnapshot>,
    prev2: Vec<ChannelSnapshot>,
}

/// One node's `(v, u, q, w)` at a single time step.
#[derive(Debug, Clone, Copy)]
pub struct ChannelSnapshot {
    pub v: Vector3<f64>,
    pub u: Vector3<f64>,
    pub q: Vector3<f64>,
    pub w: Vector3<f64>,
}

impl ChannelSnapshot {
    pub fn rest() -> Self {
        Self {
            v: Vector3::new(0.0, 0.0, 1.0),
            u: Vector3::zeros(),
            q: Vector3::zeros(),
            w: Vector3::zeros(),
        }
    }
}

impl HistoryBuffer {
    /// Buffer for `nodes` material points, seeded with the rest state.
    pub fn at_rest(nodes: usize) -> Self {
        Self {
            prev1: vec![ChannelSnapshot::rest(); nodes],
            prev2: vec![ChannelSnapshot::rest(); nodes],
        }
    }

    /// Buffer seeded with an arbitrary initial snapshot per node.
    pub fn from_snapshots(snapshots: Vec<ChannelSnapshot>) -> Self {
        Self {
            prev2: snapshots.clone(),
            prev1: snapshots,
        }
    }

    pub fn len(&self) -> usize {
        self.prev1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prev1.is_empty()
    }

    /// Most recent stored snapshot for a node.
    pub fn last(&self, node: usize) -> &ChannelSnapshot {
        &self.prev1[node]
    }

    /// Shifts the buffer forward: the provided snapshots become step `i-1`.
    pub fn push(&mut self, snapshots: Vec<ChannelSnapshot>) {
        assert_eq!(snapshots.len(), self.prev1.len());
        std::mem::swap(&mut self.prev1, &mut self.prev2);
        self.prev1 = snapshots;
    }

    /// History terms for one node under the given time-discretization
    /// weights: `x_h = w1 x^{i-1} + w2 x^{i-2}`.
    pub fn terms(&self, node: usize, coeffs: &BdfCoeffs) -> HistoryTerms {
        let (w1, w2) = coeffs.weights;
        let p1 = &self.prev1[node];
        let p2 = &self.prev2[node];
        HistoryTerms {
            v_h: w1 * p1.v + w2 * p2.v,
            u_h: w1 * p1.u + w2 * p2.u,
            q_h: w1 * p1.q + w2 * p2.q,
            w_h: w1 * p1.w + w2 * p2.w,
        }
    }

    /// Overwrites the measured channels (`u_x`, `u_y`, `v_z`) of the most
    /// recent snapshot for a node with externally measured values.
    pub fn overwrite_measured(&mut self, node: usize, u_x: f64, u_y: f64, v_z: f64) {
        let snap = &mut self.prev1[node];
        snap.u.x = u_x;
        snap.u.y = u_y;
        snap.v.z = v_z;
    }
}
