//! Spatial integration of the rod state and the shooting solution of the
//! two-point boundary value problem.
//!
//! The rod is clamped at the base and free at the tip. A sweep integrates
//! `(p, R, n, m, q, w)` from base to tip with classical RK4 once the time
//! discretization has made the spatial problem explicit; the shooting method
//! adjusts the unknown base wrench `(n_0, m_0)` until the free-end condition
//! `n_L = m_L = 0` holds.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use crate::bdf::BdfCoeffs;
use crate::error::{Error, Result};
use crate::math::orthonormalize;
use crate::rod::{
    closed_form_config, spatial_rhs, ConfigRates, HistoryBuffer, HistoryTerms, MaterialParams,
    NodeState, SpatialDerivs, StiffnessSet, Wrench,
};

/// Spatial grid of a multi-segment arm: `n_segments` rods of equal length
/// chained end to end, discretized with `nodes_per_segment` intervals each.
#[derive(Debug, Clone)]
pub struct ArmGrid {
    pub params: MaterialParams,
    pub stiff: StiffnessSet,
    pub n_segments: usize,
    pub nodes_per_segment: usize,
}

impl ArmGrid {
    pub fn new(params: MaterialParams, stiff: StiffnessSet, n_segments: usize, nodes_per_segment: usize) -> Self {
        assert!(n_segments >= 1 && nodes_per_segment >= 1);
        Self {
            params,
            stiff,
            n_segments,
            nodes_per_segment,
        }
    }

    /// Spatial step, `l0 / nodes_per_segment`.
    pub fn ds(&self) -> f64 {
        self.params.l0 / self.nodes_per_segment as f64
    }

    pub fn n_intervals(&self) -> usize {
        self.n_segments * self.nodes_per_segment
    }

    pub fn n_nodes(&self) -> usize {
        self.n_intervals() + 1
    }

    /// Segment owning a given interval (0-based, base to tip).
    pub fn segment_of_interval(&self, interval: usize) -> usize {
        interval / self.nodes_per_segment
    }

    /// Global node index of a segment's base cross-section.
    pub fn segment_base_node(&self, segment: usize) -> usize {
        segment * self.nodes_per_segment
    }

    /// Global node index of a segment's tip cross-section.
    pub fn segment_tip_node(&self, segment: usize) -> usize {
        (segment + 1) * self.nodes_per_segment
    }
}

/// Distributed load model queried during a sweep.
///
/// `interval` indexes the spatial interval being integrated and `sigma` is
/// the position within it (0 at the lower node, 1 at the upper node). The
/// state passed in carries the stage values of `(p, R, n, m, q, w)` with
/// `(v, u)` already recovered from the constitutive law.
pub trait LoadModel {
    fn wrench(
        &mut self,
        interval: usize,
        sigma: f64,
        state: &NodeState,
        rates: &ConfigRates,
    ) -> Wrench;

    /// Called in sweep order when integration reaches a segment's base node.
    fn enter_segment(&mut self, _segment: usize, _base: &NodeState) {}
}

/// Uniform load, constant along the rod.
pub struct UniformLoad(pub Wrench);

impl LoadModel for UniformLoad {
    fn wrench(&mut self, _: usize, _: f64, _: &NodeState, _: &ConfigRates) -> Wrench {
        self.0
    }
}

/// Per-node loads, interpolated linearly inside each interval.
pub struct PerNodeLoads(pub Vec<Wrench>);

impl LoadModel for PerNodeLoads {
    fn wrench(&mut self, interval: usize, sigma: f64, _: &NodeState, _: &ConfigRates) -> Wrench {
        let a = &self.0[interval];
        let b = &self.0[interval + 1];
        Wrench {
            f: a.f.lerp(&b.f, sigma),
            l: a.l.lerp(&b.l, sigma),
        }
    }
}

/// Adapter turning a closure into a [`LoadModel`].
pub struct FnLoad<F>(pub F);

impl<F> LoadModel for FnLoad<F>
where
    F: FnMut(usize, f64, &NodeState, &ConfigRates) -> Wrench,
{
    fn wrench(&mut self, interval: usize, sigma: f64, s: &NodeState, r: &ConfigRates) -> Wrench {
        (self.0)(interval, sigma, s, r)
    }
}

/// Shooting solver knobs.
#[derive(Debug, Clone, Copy)]
pub struct ShootingConfig {
    /// Convergence bound on the scale-normalized free-end residual.
    pub residual_tol: f64,
    /// Maximum Newton iterations.
    pub max_iters: usize,
    /// Relative forward-difference perturbation for the Jacobian.
    pub fd_epsilon: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            max_iters: 50,
            fd_epsilon: 1e-6,
        }
    }
}

/// Result of a converged (or best-effort) rod solve.
#[derive(Debug, Clone)]
pub struct RodSweepResult {
    /// States at every grid node, base to tip.
    pub states: Vec<NodeState>,
    /// Free-end internal wrench `(n_L, m_L)`.
    pub residual: (Vector3<f64>, Vector3<f64>),
    /// Normalized residual actually reached.
    pub normalized_residual: f64,
    /// Newton iterations spent.
    pub iterations: usize,
}

fn advance(base: &NodeState, k: &SpatialDerivs, h: f64) -> NodeState {
    NodeState {
        p: base.p + h * k.p_s,
        r: base.r + h * k.r_s,
        n: base.n + h * k.n_s,
        m: base.m + h * k.m_s,
        q: base.q + h * k.q_s,
        w: base.w + h * k.w_s,
        v: base.v,
        u: base.u,
    }
}

/// One classical RK4 step of size `ds` on the rod state. The callback
/// supplies the full spatial derivative at a stage position `sigma` in
/// `[0, 1]`; the orientation is re-orthonormalized after the step.
pub fn rk4_spatial_step<F>(state: &NodeState, mut rhs: F, ds: f64) -> Result<NodeState>
where
    F: FnMut(f64, &NodeState) -> Result<SpatialDerivs>,
{
    if !(ds > 0.0) {
        return Err(Error::InvalidStep(ds));
    }
    let k1 = rhs(0.0, state)?;
    let s2 = advance(state, &k1, 0.5 * ds);
    let k2 = rhs(0.5, &s2)?;
    let s3 = advance(state, &k2, 0.5 * ds);
    let k3 = rhs(0.5, &s3)?;
    let s4 = advance(state, &k3, ds);
    let k4 = rhs(1.0, &s4)?;

    let combine = |a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>, d: &Vector3<f64>| {
        (ds / 6.0) * (a + 2.0 * b + 2.0 * c + d)
    };
    let mut next = NodeState {
        p: state.p + combine(&k1.p_s, &k2.p_s, &k3.p_s, &k4.p_s),
        r: state.r + (ds / 6.0) * (k1.r_s + 2.0 * k2.r_s + 2.0 * k3.r_s + k4.r_s),
        n: state.n + combine(&k1.n_s, &k2.n_s, &k3.n_s, &k4.n_s),
        m: state.m + combine(&k1.m_s, &k2.m_s, &k3.m_s, &k4.m_s),
        q: state.q + combine(&k1.q_s, &k2.q_s, &k3.q_s, &k4.q_s),
        w: state.w + combine(&k1.w_s, &k2.w_s, &k3.w_s, &k4.w_s),
        v: state.v,
        u: state.u,
    };
    next.r = orthonormalize(&next.r);
    if !next.is_finite() {
        return Err(Error::SweepDiverged { node: usize::MAX });
    }
    Ok(next)
}

/// Integrates the rod from base to tip for a given base wrench guess.
///
/// At every stage evaluation the configuration variables are recovered from
/// the internal wrench via the closed-form update, the time derivatives are
/// reconstructed with the supplied discretization coefficients and history,
/// and the load model provides the distributed wrench.
pub fn sweep_rod(
    grid: &ArmGrid,
    base_pose: (Vector3<f64>, Matrix3<f64>),
    guess: (Vector3<f64>, Vector3<f64>),
    coeffs: &BdfCoeffs,
    hist: &HistoryBuffer,
    loads: &mut dyn LoadModel,
) -> Result<RodSweepResult> {
    debug_assert_eq!(hist.len(), grid.n_nodes());
    let ds = grid.ds();
    let c0 = coeffs.c0;

    let mut state = NodeState {
        p: base_pose.0,
        r: base_pose.1,
        n: guess.0,
        m: guess.1,
        v: grid.params.v_star(),
        u: grid.params.u_star(),
        // Clamped base: zero velocities.
        q: Vector3::zeros(),
        w: Vector3::zeros(),
    };
    if !state.is_finite() {
        return Err(Error::SweepDiverged { node: 0 });
    }

    let base_hist = hist.terms(0, coeffs);
    let (v0, u0) = closed_form_config(&state.n, &state.m, &state.r, &base_hist, &grid.stiff, c0, &grid.params)?;
    state.v = v0;
    state.u = u0;

    let mut states = Vec::with_capacity(grid.n_nodes());
    states.push(state);

    for interval in 0..grid.n_intervals() {
        if interval % grid.nodes_per_segment == 0 {
            loads.enter_segment(grid.segment_of_interval(interval), &state);
        }
        let h_lo = hist.terms(interval, coeffs);
        let h_hi = hist.terms(interval + 1, coeffs);
        let stiff = &grid.stiff;
        let params = &grid.params;

        let next = {
            let mut rhs = |sigma: f64, s: &NodeState| -> Result<SpatialDerivs> {
                let h = HistoryTerms::lerp(&h_lo, &h_hi, sigma);
                let (v, u) = closed_form_config(&s.n, &s.m, &s.r, &h, stiff, c0, params)?;
                let mut stage = *s;
                stage.v = v;
                stage.u = u;
                let rates = ConfigRates::reconstruct(c0, &v, &u, &stage.q, &stage.w, &h);
                let ext = loads.wrench(interval, sigma, &stage, &rates);
                Ok(spatial_rhs(&stage, &rates, &ext, params))
            };
            rk4_spatial_step(&state, &mut rhs, ds)
        }
        .map_err(|e| match e {
            Error::SweepDiverged { .. } => Error::SweepDiverged { node: interval + 1 },
            other => other,
        })?;

        state = next;
        let h_node = hist.terms(interval + 1, coeffs);
        let (v, u) =
            closed_form_config(&state.n, &state.m, &state.r, &h_node, &grid.stiff, c0, &grid.params)?;
        state.v = v;
        state.u = u;
        states.push(state);
    }

    let tip = states.last().expect("at least the base node");
    Ok(RodSweepResult {
        residual: (tip.n, tip.m),
        normalized_residual: f64::NAN,
        iterations: 0,
        states,
    })
}

fn residual_vec(r: &(Vector3<f64>, Vector3<f64>)) -> Vector6<f64> {
    Vector6::new(r.0.x, r.0.y, r.0.z, r.1.x, r.1.y, r.1.z)
}

/// Solves the free-end boundary condition `n_L = m_L = 0` for the base
/// wrench with a damped Newton iteration on the shooting residual.
///
/// The residual is normalized by `max(1, K_se,zz)` (the axial rigidity); the
/// Jacobian is formed by forward differences, and steps are halved up to
/// eight times when the residual norm fails to decrease.
pub fn shooting_solve(
    grid: &ArmGrid,
    base_pose: (Vector3<f64>, Matrix3<f64>),
    initial_guess: (Vector3<f64>, Vector3<f64>),
    coeffs: &BdfCoeffs,
    hist: &HistoryBuffer,
    loads: &mut dyn LoadModel,
    cfg: &ShootingConfig,
) -> Result<RodSweepResult> {
    if !(cfg.residual_tol > 0.0) || cfg.max_iters == 0 {
        return Err(Error::InvalidParams(
            "shooting config: residual_tol > 0 and max_iters >= 1 required".into(),
        ));
    }
    let scale = grid.stiff.k_se[(2, 2)].max(1.0);

    let mut guess = Vector6::new(
        initial_guess.0.x,
        initial_guess.0.y,
        initial_guess.0.z,
        initial_guess.1.x,
        initial_guess.1.y,
        initial_guess.1.z,
    );
    let unpack = |g: &Vector6<f64>| {
        (
            Vector3::new(g[0], g[1], g[2]),
            Vector3::new(g[3], g[4], g[5]),
        )
    };

    let mut sweep = sweep_rod(grid, base_pose, unpack(&guess), coeffs, hist, loads)?;
    let mut res = residual_vec(&sweep.residual);
    let mut res_norm = res.norm() / scale;
    let mut best_norm = res_norm;

    let mut iterations = 0;
    while res_norm > cfg.residual_tol {
        if iterations >= cfg.max_iters {
            return Err(Error::ShootingNonConvergence {
                iterations,
                best_residual: best_norm,
            });
        }
        // Forward-difference Jacobian of the residual wrt the base wrench.
        // A diverged probe retries with a smaller perturbation.
        let eps = cfg.fd_epsilon * guess.norm().max(1.0);
        let mut jac = Matrix6::<f64>::zeros();
        for col in 0..6 {
            let mut col_eps = eps;
            let mut col_done = false;
            for _ in 0..4 {
                let mut perturbed = guess;
                perturbed[col] += col_eps;
                match sweep_rod(grid, base_pose, unpack(&perturbed), coeffs, hist, loads) {
                    Ok(probe) => {
                        jac.set_column(col, &((residual_vec(&probe.residual) - res) / col_eps));
                        col_done = true;
                        break;
                    }
                    Err(Error::SweepDiverged { .. }) => col_eps *= 0.125,
                    Err(other) => return Err(other),
                }
            }
            if !col_done {
                return Err(Error::ShootingNonConvergence {
                    iterations,
                    best_residual: best_norm,
                });
            }
        }
        let delta = jac
            .lu()
            .solve(&(-res))
            .ok_or(Error::ShootingNonConvergence {
                iterations,
                best_residual: best_norm,
            })?;

        // Step halving when the residual does not decrease. A diverged
        // trial sweep counts as an infinite residual rather than a hard
        // error: the damping then backs off toward the current iterate.
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=8 {
            let trial = guess + alpha * delta;
            match sweep_rod(grid, base_pose, unpack(&trial), coeffs, hist, loads) {
                Ok(trial_sweep) => {
                    let trial_res = residual_vec(&trial_sweep.residual);
                    let trial_norm = trial_res.norm() / scale;
                    if trial_norm < res_norm {
                        accepted = Some((trial, trial_sweep, trial_res, trial_norm));
                        break;
                    }
                }
                Err(Error::SweepDiverged { .. }) => {}
                Err(other) => return Err(other),
            }
            alpha *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((g, s, r, n)) => {
                guess = g;
                sweep = s;
                res = r;
                res_norm = n;
                best_norm = best_norm.min(n);
            }
            None => {
                return Err(Error::ShootingNonConvergence {
                    iterations,
                    best_residual: best_norm,
                });
            }
        }
    }

    sweep.normalized_residual = res_norm;
    sweep.iterations = iterations;
    Ok(sweep)
}
