//! Inverse-dynamic configuration-tracking control law, gain construction,
//! and the closed-loop error-dynamics and Lyapunov machinery.
//!
//! The control outputs are a distributed force and moment
//!
//! ```text
//! f_p = R [K_p1 (v_ref - v) + K_v1 (v_ref_t - v_t) + K_m1 v_ref_tt] - rho A g
//! l_p = R [K_p2 (u_ref - u) + K_v2 (u_ref_t - u_t) + K_m2 u_ref_tt]
//! ```
//!
//! With an exact plant the closed loop reduces to the homogeneous error
//! dynamics `e_tt + K'_v e_t + K'_p e = 0`, where the primed matrices are
//! Hadamard divisions of the gain diagonals by the inertia gains.

use nalgebra::{Matrix3, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::rod::{MaterialParams, StiffnessSet, Wrench};

/// Scalar gain coefficients of one segment. Named `g_*` to keep them apart
/// from the chamber pressures.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GainCoefficients {
    pub g_p1: f64,
    pub g_p2: f64,
    pub g_v1: f64,
    pub g_v2: f64,
}

impl GainCoefficients {
    /// Tuned coefficients of the distal segment (segment 1).
    pub fn segment1() -> Self {
        Self {
            g_p1: 100.0,
            g_p2: 50.0,
            g_v1: 1.0,
            g_v2: 1.0,
        }
    }

    /// Tuned coefficients of the proximal segment (segment 2).
    pub fn segment2() -> Self {
        Self {
            g_p1: 37.5,
            g_p2: 18.75,
            g_v1: 1.0,
            g_v2: 1.0,
        }
    }
}

/// Diagonal gain matrices of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub k_p1: Matrix3<f64>,
    pub k_v1: Matrix3<f64>,
    pub k_m1: Matrix3<f64>,
    pub k_p2: Matrix3<f64>,
    pub k_v2: Matrix3<f64>,
    pub k_m2: Matrix3<f64>,
    pub coeffs: GainCoefficients,
}

/// Builds the gain matrices from the constitutive set:
/// `K_p1 = g_p1 K_se`, `K_v1 = g_v1 B_se`, `K_p2 = g_p2 K_bt`,
/// `K_v2 = g_v2 B_bt`, `K_m1 = rho A I`, `K_m2 = rho J`.
pub fn build_gains(
    params: &MaterialParams,
    stiff: &StiffnessSet,
    coeffs: GainCoefficients,
) -> Result<GainSet> {
    for (name, g) in [
        ("g_p1", coeffs.g_p1),
        ("g_p2", coeffs.g_p2),
        ("g_v1", coeffs.g_v1),
        ("g_v2", coeffs.g_v2),
    ] {
        if !g.is_finite() {
            return Err(Error::InvalidGain(format!("{name} = {g} is not finite")));
        }
    }
    if coeffs.g_p1 <= 0.0 || coeffs.g_p2 <= 0.0 {
        return Err(Error::InvalidGain(
            "proportional coefficients must be strictly positive".into(),
        ));
    }
    if coeffs.g_v1 < 0.0 || coeffs.g_v2 < 0.0 {
        return Err(Error::InvalidGain(
            "derivative coefficients must be nonnegative".into(),
        ));
    }
    Ok(GainSet {
        k_p1: coeffs.g_p1 * stiff.k_se,
        k_v1: coeffs.g_v1 * stiff.b_se,
        k_p2: coeffs.g_p2 * stiff.k_bt,
        k_v2: coeffs.g_v2 * stiff.b_bt,
        k_m1: params.rho * params.area() * Matrix3::identity(),
        k_m2: params.rho * params.second_moment(),
        coeffs,
    })
}

/// One sample of the reference configuration and its time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub v: Vector3<f64>,
    pub u: Vector3<f64>,
    pub v_t: Vector3<f64>,
    pub u_t: Vector3<f64>,
    pub v_tt: Vector3<f64>,
    pub u_tt: Vector3<f64>,
}

impl ReferenceSample {
    /// Rest reference: the undeformed configuration, not moving.
    pub fn rest() -> Self {
        Self {
            v: Vector3::new(0.0, 0.0, 1.0),
            u: Vector3::zeros(),
            v_t: Vector3::zeros(),
            u_t: Vector3::zeros(),
            v_tt: Vector3::zeros(),
            u_tt: Vector3::zeros(),
        }
    }
}

/// Time-parameterized reference for one segment, with analytic first and
/// second derivatives. The sinusoidal families all share the squared-sine
/// profile `s(t) = sin^2(omega t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceSignal {
    /// Hold the undeformed configuration.
    Rest,
    /// Extension: `v_z = 1 + a sin^2(omega t)`.
    Extension { a: f64, omega: f64 },
    /// Bending about x: `u_x = amp sin^2(omega t)`.
    BendingX { amp: f64, omega: f64 },
    /// Bending about y: `u_y = amp sin^2(omega t)`.
    BendingY { amp: f64, omega: f64 },
    /// General squared-sine offsets on both configuration vectors.
    Custom {
        v_amp: Vector3<f64>,
        u_amp: Vector3<f64>,
        omega: f64,
    },
}

impl ReferenceSignal {
    fn amplitudes(&self) -> (Vector3<f64>, Vector3<f64>, f64) {
        match *self {
            ReferenceSignal::Rest => (Vector3::zeros(), Vector3::zeros(), 0.0),
            ReferenceSignal::Extension { a, omega } => {
                (Vector3::new(0.0, 0.0, a), Vector3::zeros(), omega)
            }
            ReferenceSignal::BendingX { amp, omega } => {
                (Vector3::zeros(), Vector3::new(amp, 0.0, 0.0), omega)
            }
            ReferenceSignal::BendingY { amp, omega } => {
                (Vector3::zeros(), Vector3::new(0.0, amp, 0.0), omega)
            }
            ReferenceSignal::Custom { v_amp, u_amp, omega } => (v_amp, u_amp, omega),
        }
    }

    /// Evaluates the reference and its derivatives at time `t`.
    pub fn sample(&self, t: f64) -> ReferenceSample {
        let (v_amp, u_amp, omega) = self.amplitudes();
        let s = (omega * t).sin().powi(2);
        let s_t = omega * (2.0 * omega * t).sin();
        let s_tt = 2.0 * omega * omega * (2.0 * omega * t).cos();
        ReferenceSample {
            v: Vector3::new(0.0, 0.0, 1.0) + v_amp * s,
            u: u_amp * s,
            v_t: v_amp * s_t,
            u_t: u_amp * s_t,
            v_tt: v_amp * s_tt,
            u_tt: u_amp * s_tt,
        }
    }
}

/// Instantaneous state the control law needs at one cross-section.
#[derive(Debug, Clone, Copy)]
pub struct ControlState {
    pub v: Vector3<f64>,
    pub u: Vector3<f64>,
    pub v_t: Vector3<f64>,
    pub u_t: Vector3<f64>,
    pub r: Matrix3<f64>,
}

/// Evaluates the inverse-dynamic control law at one cross-section.
pub fn control_wrench(
    reference: &ReferenceSample,
    state: &ControlState,
    gains: &GainSet,
    params: &MaterialParams,
) -> Wrench {
    let f_local = gains.k_p1 * (reference.v - state.v)
        + gains.k_v1 * (reference.v_t - state.v_t)
        + gains.k_m1 * reference.v_tt;
    let l_local = gains.k_p2 * (reference.u - state.u)
        + gains.k_v2 * (reference.u_t - state.u_t)
        + gains.k_m2 * reference.u_tt;
    Wrench {
        f: state.r * f_local - params.rho * params.area() * params.gravity,
        l: state.r * l_local,
    }
}

/// Normalized closed-loop error-dynamics matrices, stored as the diagonals
/// of the 6x6 block matrices `K'_v` and `K'_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDynamics {
    pub kv_diag: Vector6<f64>,
    pub kp_diag: Vector6<f64>,
}

/// Hadamard-divides the gain diagonals by the inertia-gain diagonals:
/// `K'_v = blockdiag(K_v1 / K_m1, K_v2 / K_m2)` and likewise for `K'_p`.
pub fn assemble_error_dynamics(gains: &GainSet) -> Result<ErrorDynamics> {
    let mut kv = Vector6::zeros();
    let mut kp = Vector6::zeros();
    for i in 0..3 {
        let m1 = gains.k_m1[(i, i)];
        let m2 = gains.k_m2[(i, i)];
        if m1 == 0.0 || m2 == 0.0 {
            return Err(Error::ZeroInertiaGain);
        }
        kv[i] = gains.k_v1[(i, i)] / m1;
        kv[i + 3] = gains.k_v2[(i, i)] / m2;
        kp[i] = gains.k_p1[(i, i)] / m1;
        kp[i + 3] = gains.k_p2[(i, i)] / m2;
    }
    Ok(ErrorDynamics {
        kv_diag: kv,
        kp_diag: kp,
    })
}

/// Quadratic Lyapunov function `V = e_t' e_t / 2 + e' K'_p e / 2`.
pub fn lyapunov_value(e: &Vector6<f64>, e_t: &Vector6<f64>, dynamics: &ErrorDynamics) -> f64 {
    0.5 * e_t.dot(e_t) + 0.5 * e.dot(&e.component_mul(&dynamics.kp_diag))
}

/// Lyapunov rate along the closed-loop flow: `V_t = -e_t' K'_v e_t`.
pub fn lyapunov_rate(e_t: &Vector6<f64>, dynamics: &ErrorDynamics) -> f64 {
    -e_t.dot(&e_t.component_mul(&dynamics.kv_diag))
}

/// One integration sample of the error trajectory.
#[derive(Debug, Clone, Copy)]
pub struct ErrorSample {
    pub t: f64,
    pub e: Vector6<f64>,
    pub e_t: Vector6<f64>,
    pub v: f64,
}

/// Integrates `e_tt = -K'_v e_t - K'_p e` with classical RK4 and records
/// the Lyapunov value at every step.
pub fn simulate_error_ode(
    e0: Vector6<f64>,
    e0_t: Vector6<f64>,
    dynamics: &ErrorDynamics,
    dt: f64,
    t_final: f64,
) -> Result<Vec<ErrorSample>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidStep(dt));
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidStep(t_final));
    }
    let accel = |e: &Vector6<f64>, e_t: &Vector6<f64>| -> Vector6<f64> {
        -e_t.component_mul(&dynamics.kv_diag) - e.component_mul(&dynamics.kp_diag)
    };
    let steps = (t_final / dt).ceil() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let (mut e, mut e_t) = (e0, e0_t);
    out.push(ErrorSample {
        t: 0.0,
        e,
        e_t,
        v: lyapunov_value(&e, &e_t, dynamics),
    });
    for i in 0..steps {
        let k1e = e_t;
        let k1v = accel(&e, &e_t);
        let k2e = e_t + 0.5 * dt * k1v;
        let k2v = accel(&(e + 0.5 * dt * k1e), &k2e);
        let k3e = e_t + 0.5 * dt * k2v;
        let k3v = accel(&(e + 0.5 * dt * k2e), &k3e);
        let k4e = e_t + dt * k3v;
        let k4v = accel(&(e + dt * k3e), &k4e);
        e += dt / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e);
        e_t += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        out.push(ErrorSample {
            t: (i + 1) as f64 * dt,
            e,
            e_t,
            v: lyapunov_value(&e, &e_t, dynamics),
        });
    }
    Ok(out)
}
