//! Chamber-pressure mappings and pneumatic loads.
//!
//! Each segment carries four fiber-reinforced actuators. Their pressures
//! reduce to a three-channel equivalent actuation `P = (P_x, P_y, P_z)`
//! (two bending channels and one elongation channel); the four-chamber
//! design imposes `p1 + p4 = p2 + p3`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::rod::{MaterialParams, Wrench};

/// Pascals per psi, used for the regulator limits.
const PSI: f64 = 6894.757293168;

/// Equivalent per-segment actuation (two bending channels, one elongation).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EquivalentActuation {
    pub p: Vector3<f64>,
}

impl EquivalentActuation {
    pub fn new(px: f64, py: f64, pz: f64) -> Self {
        Self {
            p: Vector3::new(px, py, pz),
        }
    }
}

/// Pressure regulator limits. The lower bound models the valve dead-zone
/// pre-load; the upper bound is the regulator ceiling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PressureLimits {
    pub p_min: f64,
    pub p_max: f64,
}

impl Default for PressureLimits {
    fn default() -> Self {
        Self {
            p_min: PSI,        // 1 psi pre-load
            p_max: 30.0 * PSI, // regulator ceiling
        }
    }
}

impl PressureLimits {
    /// No clamping at all; useful for algebraic tests.
    pub fn unbounded() -> Self {
        Self {
            p_min: f64::NEG_INFINITY,
            p_max: f64::INFINITY,
        }
    }
}

/// Four chamber pressures plus a flag recording whether clamping fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamberPressures {
    pub p: [f64; 4],
    /// True when at least one chamber was clamped to the limits.
    pub clamped: bool,
}

impl ChamberPressures {
    pub fn new(p: [f64; 4]) -> Self {
        Self { p, clamped: false }
    }

    /// Checks the structural constraint `p1 + p4 = p2 + p3`.
    pub fn satisfies_hpn(&self, tol: f64) -> bool {
        ((self.p[0] + self.p[3]) - (self.p[1] + self.p[2])).abs() <= tol
    }
}

/// Gravity as a distributed load on the backbone: `f = rho A g`, `l = 0`.
pub fn gravity_load(params: &MaterialParams) -> Wrench {
    Wrench {
        f: params.rho * params.area() * params.gravity,
        l: Vector3::zeros(),
    }
}

/// Local geometry of a cross-section needed by the pneumatic load formula.
#[derive(Debug, Clone, Copy)]
pub struct NodeGeometry {
    pub p: Vector3<f64>,
    pub r: Matrix3<f64>,
    pub p_s: Vector3<f64>,
    pub r_s: Matrix3<f64>,
}

/// Distributed wrench applied by the chambers to the backbone:
///
/// ```text
/// f_p = sum_i p_i A_i (R_s e3) - rho A g
/// l_p = sum_i p_i A_i d/ds[(p + R r_i) x (R e3)]
/// ```
///
/// The arc-length derivative in `l_p` is expanded with the product rule
/// using the supplied `p_s` and `R_s`. The gravity term in `f_p` cancels
/// the gravitational load once both act on the rod.
pub fn pneumatic_wrench(
    pressures: &ChamberPressures,
    geom: &NodeGeometry,
    params: &MaterialParams,
) -> Wrench {
    let e3 = Vector3::new(0.0, 0.0, 1.0);
    let a_i = params.chamber_area;
    let tangent_rate = geom.r_s * e3;
    let tangent = geom.r * e3;

    let mut f = -params.rho * params.area() * params.gravity;
    let mut l = Vector3::zeros();
    for (p_i, r_i) in pressures.p.iter().zip(params.chamber_offsets.iter()) {
        let scale = p_i * a_i;
        f += scale * tangent_rate;
        // d/ds[(p + R r_i) x (R e3)] by the product rule.
        let lever_rate = geom.p_s + geom.r_s * r_i;
        let lever = geom.p + geom.r * r_i;
        l += scale * (lever_rate.cross(&tangent) + lever.cross(&tangent_rate));
    }
    Wrench { f, l }
}

/// Maps a control wrench to equivalent actuation: the signed moment and
/// force components on the segment base-frame axes, divided by the chamber
/// cap area. `base_r` is the segment's base orientation.
pub fn wrench_to_equivalent(
    wrench: &Wrench,
    base_r: &Matrix3<f64>,
    params: &MaterialParams,
) -> EquivalentActuation {
    let f_local = base_r.transpose() * wrench.f;
    let l_local = base_r.transpose() * wrench.l;
    let a_i = params.chamber_area;
    EquivalentActuation::new(l_local.y / a_i, l_local.x / a_i, f_local.z / a_i)
}

/// Verbatim quadratic form of the equivalent-actuation map, retained for
/// inspection only: it squares the wrench components (dropping their sign)
/// and is not used anywhere in the control loop.
pub fn wrench_to_equivalent_quadratic(
    wrench: &Wrench,
    base_r: &Matrix3<f64>,
    params: &MaterialParams,
) -> EquivalentActuation {
    let f_local = base_r.transpose() * wrench.f;
    let l_local = base_r.transpose() * wrench.l;
    let a_i = params.chamber_area;
    EquivalentActuation::new(
        l_local.y * l_local.y / a_i,
        l_local.x * l_local.x / a_i,
        f_local.z * f_local.z / a_i,
    )
}

/// Reconstructs the distributed wrench a segment's actuation can express
/// from its equivalent actuation: the inverse of [`wrench_to_equivalent`]
/// on the three actuated channels (axial force, x/y moments); shear forces
/// and torsion are not actuatable and come back zero.
pub fn equivalent_to_wrench(
    p: &EquivalentActuation,
    base_r: &Matrix3<f64>,
    params: &MaterialParams,
) -> Wrench {
    let a_i = params.chamber_area;
    Wrench {
        f: base_r * Vector3::new(0.0, 0.0, p.p.z * a_i),
        l: base_r * Vector3::new(p.p.y * a_i, p.p.x * a_i, 0.0),
    }
}

/// Chamber pressures realizing an equivalent actuation, honoring the
/// `p1 + p4 = p2 + p3` constraint, then clamped to the regulator limits.
pub fn equivalent_to_pressures(p: &EquivalentActuation, limits: &PressureLimits) -> ChamberPressures {
    let (px, py, pz) = (p.p.x, p.p.y, p.p.z);
    let raw = [
        (-px + py + pz) / 4.0,
        (px + py + pz) / 4.0,
        (-px - py + pz) / 4.0,
        (px - py + pz) / 4.0,
    ];
    let mut clamped = false;
    let mut out = [0.0; 4];
    for (o, r) in out.iter_mut().zip(raw.iter()) {
        let c = r.clamp(limits.p_min, limits.p_max);
        if c != *r {
            clamped = true;
        }
        *o = c;
    }
    ChamberPressures { p: out, clamped }
}

/// Equivalent actuation expressed by four chamber pressures.
pub fn pressures_to_equivalent(p: &ChamberPressures) -> EquivalentActuation {
    let [p1, p2, p3, p4] = p.p;
    EquivalentActuation::new(-p1 + p2 - p3 + p4, p1 + p2 - p3 - p4, p1 + p2 + p3 + p4)
}

/// First-order pressure-regulator lag: the measured pressures relax toward
/// the set-points with the given time constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagPlantState {
    pub p_m: [f64; 4],
    pub time_constant: f64,
}

impl LagPlantState {
    pub fn new(initial: [f64; 4], time_constant: f64) -> Self {
        assert!(time_constant >= 0.0);
        Self {
            p_m: initial,
            time_constant,
        }
    }
}

/// Advances the regulator model one step: `p_m += (dt / tc) (p_d - p_m)`,
/// an ideal regulator (`p_m = p_d`) when the time constant is zero.
pub fn lag_plant_step(state: &LagPlantState, p_d: &ChamberPressures, dt: f64) -> LagPlantState {
    assert!(dt > 0.0);
    let mut next = *state;
    if state.time_constant == 0.0 {
        next.p_m = p_d.p;
    } else {
        let k = (dt / state.time_constant).min(1.0);
        for (m, d) in next.p_m.iter_mut().zip(p_d.p.iter()) {
            *m += k * (d - *m);
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> MaterialParams {
        MaterialParams::silicone_segment()
    }

    fn straight_geom() -> NodeGeometry {
        NodeGeometry {
            p: Vector3::new(0.0, 0.0, 0.1),
            r: Matrix3::identity(),
            p_s: Vector3::new(0.0, 0.0, 1.0),
            r_s: Matrix3::zeros(),
        }
    }

    #[test]
    fn gravity_load_matches_table_arithmetic() {
        let p = params();
        let w = gravity_load(&p);
        assert_relative_eq!(w.f.z, -68.6, epsilon = 0.05);
        assert_eq!(w.l, Vector3::zeros());

        let mut no_g = params();
        no_g.gravity = Vector3::zeros();
        assert_eq!(gravity_load(&no_g).f, Vector3::zeros());

        let mut doubled = params();
        doubled.rho *= 2.0;
        assert_relative_eq!(gravity_load(&doubled).f, 2.0 * w.f, epsilon = 1e-9);
    }

    #[test]
    fn zero_pressure_zero_gravity_gives_zero_wrench() {
        let mut p = params();
        p.gravity = Vector3::zeros();
        let w = pneumatic_wrench(&ChamberPressures::new([0.0; 4]), &straight_geom(), &p);
        assert_eq!(w.f, Vector3::zeros());
        assert_eq!(w.l, Vector3::zeros());
    }

    #[test]
    fn equal_pressures_on_straight_rod_cancel() {
        let mut p = params();
        p.gravity = Vector3::zeros();
        let w = pneumatic_wrench(
            &ChamberPressures::new([5000.0; 4]),
            &straight_geom(),
            &p,
        );
        // Direct summation oracle: R_s = 0 kills the force; the moment terms
        // cancel by chamber symmetry and p_s parallel to the tangent.
        assert_relative_eq!(w.f, Vector3::zeros(), epsilon = 1e-12);
        assert_relative_eq!(w.l, Vector3::zeros(), epsilon = 1e-9);
    }

    #[test]
    fn zero_pressures_with_gravity_produce_antigravity_term() {
        let p = params();
        let w = pneumatic_wrench(&ChamberPressures::new([0.0; 4]), &straight_geom(), &p);
        assert_relative_eq!(w.f.z, 68.6, epsilon = 0.05);
    }

    #[test]
    fn pneumatic_wrench_is_linear_in_pressures() {
        let mut p = params();
        p.gravity = Vector3::zeros();
        let geom = NodeGeometry {
            p: Vector3::new(0.03, -0.02, 0.12),
            r: crate::math::rot_x(0.35) * crate::math::rot_y(-0.2),
            p_s: Vector3::new(0.1, 0.05, 0.99),
            r_s: crate::math::rot_x(0.35) * crate::math::hat(&Vector3::new(1.2, -0.4, 0.1)),
        };
        let pa = ChamberPressures::new([1000.0, -2000.0, 500.0, 700.0]);
        let pb = ChamberPressures::new([-300.0, 800.0, 1200.0, -50.0]);
        let (alpha, beta) = (0.7, -1.3);
        let mixed = ChamberPressures::new([
            alpha * pa.p[0] + beta * pb.p[0],
            alpha * pa.p[1] + beta * pb.p[1],
            alpha * pa.p[2] + beta * pb.p[2],
            alpha * pa.p[3] + beta * pb.p[3],
        ]);
        let wa = pneumatic_wrench(&pa, &geom, &p);
        let wb = pneumatic_wrench(&pb, &geom, &p);
        let wm = pneumatic_wrench(&mixed, &geom, &p);
        assert_relative_eq!(wm.f, alpha * wa.f + beta * wb.f, max_relative = 1e-12);
        assert_relative_eq!(wm.l, alpha * wa.l + beta * wb.l, max_relative = 1e-12);
    }

    #[test]
    fn wrench_to_equivalent_reads_signed_components() {
        let p = params();
        let id = Matrix3::identity();
        let zero = wrench_to_equivalent(&Wrench::ZERO, &id, &p);
        assert_eq!(zero.p, Vector3::zeros());

        let w = Wrench {
            f: Vector3::new(0.0, 0.0, 4.0 * p.chamber_area),
            l: Vector3::zeros(),
        };
        assert_relative_eq!(
            wrench_to_equivalent(&w, &id, &p).p,
            Vector3::new(0.0, 0.0, 4.0),
            epsilon = 1e-12
        );

        let w = Wrench {
            f: Vector3::zeros(),
            l: Vector3::new(0.0, 2.0 * p.chamber_area, 0.0),
        };
        assert_relative_eq!(
            wrench_to_equivalent(&w, &id, &p).p,
            Vector3::new(2.0, 0.0, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn quadratic_form_squares_and_drops_sign() {
        let p = params();
        let id = Matrix3::identity();
        let w = Wrench {
            f: Vector3::new(0.0, 0.0, -2.0),
            l: Vector3::new(0.0, -3.0, 0.0),
        };
        let q = wrench_to_equivalent_quadratic(&w, &id, &p);
        assert!(q.p.x > 0.0 && q.p.z > 0.0);
        assert_relative_eq!(q.p.x, 9.0 / p.chamber_area, epsilon = 1e-9);
    }

    #[test]
    fn equivalent_round_trips_through_wrench() {
        let p = params();
        let base = crate::math::rot_z(0.3) * crate::math::rot_x(-0.6);
        let eq = EquivalentActuation::new(812.0, -77.0, 2400.0);
        let back = wrench_to_equivalent(&equivalent_to_wrench(&eq, &base, &p), &base, &p);
        assert_relative_eq!(back.p, eq.p, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_elongation_pressures() {
        let p = equivalent_to_pressures(
            &EquivalentActuation::new(0.0, 0.0, 4.0),
            &PressureLimits::unbounded(),
        );
        assert_eq!(p.p, [1.0, 1.0, 1.0, 1.0]);
        assert!(!p.clamped);
    }

    #[test]
    fn pure_bending_pressures_before_clamping() {
        let p = equivalent_to_pressures(
            &EquivalentActuation::new(4.0, 0.0, 0.0),
            &PressureLimits::unbounded(),
        );
        assert_eq!(p.p, [-1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn clamping_flags_and_bounds() {
        let limits = PressureLimits {
            p_min: 0.5,
            p_max: 0.9,
        };
        let p = equivalent_to_pressures(&EquivalentActuation::new(4.0, 0.0, 0.0), &limits);
        assert!(p.clamped);
        for v in p.p {
            assert!((limits.p_min..=limits.p_max).contains(&v));
        }
    }

    #[test]
    fn pressures_to_equivalent_examples() {
        let p = ChamberPressures::new([1.0, 1.0, 1.0, 1.0]);
        assert_eq!(pressures_to_equivalent(&p).p, Vector3::new(0.0, 0.0, 4.0));
        let p = ChamberPressures::new([0.0, 1.0, 0.0, 1.0]);
        assert_eq!(pressures_to_equivalent(&p).p, Vector3::new(2.0, 0.0, 2.0));
    }

    #[test]
    fn lag_zero_time_constant_is_ideal() {
        let state = LagPlantState::new([0.0; 4], 0.0);
        let pd = ChamberPressures::new([2.0, 3.0, 4.0, 5.0]);
        assert_eq!(lag_plant_step(&state, &pd, 0.05).p_m, pd.p);
    }

    #[test]
    fn lag_converges_monotonically() {
        let mut state = LagPlantState::new([0.0; 4], 1.0);
        let pd = ChamberPressures::new([10.0; 4]);
        let mut prev = 0.0;
        for _ in 0..40 {
            state = lag_plant_step(&state, &pd, 0.05);
            assert!(state.p_m[0] > prev && state.p_m[0] <= 10.0);
            prev = state.p_m[0];
        }
    }

    #[test]
    fn lag_settles_within_five_time_constants() {
        let tc = 1.0;
        let dt = 0.05;
        let mut state = LagPlantState::new([0.0; 4], tc);
        let pd = ChamberPressures::new([100.0; 4]);
        let steps = (5.0 * tc / dt).round() as usize;
        for _ in 0..steps {
            state = lag_plant_step(&state, &pd, dt);
        }
        // Discrete-step oracle: (1 - dt/tc)^(5 tc/dt) < 0.01.
        assert!((state.p_m[0] - 100.0).abs() < 0.01 * 100.0);
    }

    proptest! {
        // The pressure formulas satisfy p1 + p4 = p2 + p3 (algebraically by
        // construction; in floats up to summation-order rounding) and the
        // P -> p -> P round trip is the identity without clamping.
        #[test]
        fn pressure_algebra_round_trip(
            px in -1e5..1e5f64, py in -1e5..1e5f64, pz in -1e5..1e5f64,
        ) {
            let eq = EquivalentActuation::new(px, py, pz);
            let p = equivalent_to_pressures(&eq, &PressureLimits::unbounded());
            let scale = p.p.iter().fold(1.0f64, |a, x| a.max(x.abs()));
            prop_assert!(p.satisfies_hpn(1e-12 * scale));
            let back = pressures_to_equivalent(&p);
            prop_assert!((back.p - eq.p).norm() <= 1e-12 * (1.0 + eq.p.norm()));
        }

        // Swapping (p1, p2) and (p3, p4) flips P_x and preserves P_y, P_z.
        #[test]
        fn chamber_reflection_flips_px(
            p1 in -1e5..1e5f64, p2 in -1e5..1e5f64,
            p3 in -1e5..1e5f64, p4 in -1e5..1e5f64,
        ) {
            let orig = pressures_to_equivalent(&ChamberPressures::new([p1, p2, p3, p4]));
            let refl = pressures_to_equivalent(&ChamberPressures::new([p2, p1, p4, p3]));
            let scale = 1.0 + orig.p.norm();
            prop_assert!((refl.p.x + orig.p.x).abs() <= 1e-12 * scale);
            prop_assert!((refl.p.y - orig.p.y).abs() <= 1e-12 * scale);
            prop_assert!((refl.p.z - orig.p.z).abs() <= 1e-12 * scale);
        }
    }
}
