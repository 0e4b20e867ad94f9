//! End-to-end configuration tracking with a virtual plant.
//!
//! Each control period runs the full loop:
//!
//! 1. the model rod is solved by shooting under the inverse-dynamic
//!    control wrench evaluated along the sweep;
//! 2. the control wrench at each segment's representative cross-section is
//!    mapped to equivalent actuation and desired chamber pressures;
//! 3. the regulator lag turns desired into measured pressures;
//! 4. the virtual plant rod is solved under the per-segment wrench its
//!    measured pressures can express;
//! 5. the plant's segment tip poses are mapped through the constant-
//!    curvature inversion to measured `(u_x, u_y, v_z)`, which overwrite
//!    those channels of the model's history for the next step while the
//!    unmeasured channels keep the model's own estimates.
//!
//! Segment labels count from the free tip (segment 1 is distal); the chain
//! is assembled base to tip internally.

use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::actuation::{
    equivalent_to_pressures, equivalent_to_wrench, gravity_load, lag_plant_step,
    pressures_to_equivalent, wrench_to_equivalent, ChamberPressures, EquivalentActuation,
    LagPlantState,
};
use crate::bdf::BdfCoeffs;
use crate::bvp::{shooting_solve, ArmGrid, LoadModel, ShootingConfig};
use crate::controller::{
    build_gains, control_wrench, ControlState, GainSet, ReferenceSample, ReferenceSignal,
};
use crate::error::Error;
use crate::pcc::{pcc_to_config, tip_to_pcc_dominant, TipPose};
use crate::rod::{
    stiffness_matrices, ChannelSnapshot, ConfigRates, HistoryBuffer, MaterialParams, NodeState,
    Wrench,
};
use crate::sim::config::{ConfigError, ScenarioConfig, ScenarioKind};
use crate::sim::log::{LogRow, TrajectoryLog};

/// Simulation-level errors.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("tracking aborted at step {step} (t = {t:.3} s): {source}")]
    Aborted {
        step: usize,
        t: f64,
        #[source]
        source: Error,
    },
}

/// Result of a tracking run.
#[derive(Debug)]
pub struct TrackingOutput {
    pub log: TrajectoryLog,
    /// Measured `(u_x, u_y, v_z)` per step, indexed by segment label - 1.
    pub measured: Vec<Vec<(f64, f64, f64)>>,
    /// Node-averaged plant `(u_x, u_y, v_z)` per step, same indexing; used
    /// to check the virtual-measurement path against the plant state.
    pub plant_mean: Vec<Vec<(f64, f64, f64)>>,
    pub steps: usize,
    pub wall_time: Duration,
}

/// Reference signal of a 1-based segment label under a scenario.
fn reference_for(cfg: &ScenarioConfig, label: usize, omega: f64) -> ReferenceSignal {
    match cfg.scenario.kind {
        ScenarioKind::Extension => ReferenceSignal::Extension {
            a: cfg.scenario.a,
            omega,
        },
        ScenarioKind::Bending => match label {
            1 => ReferenceSignal::BendingX {
                amp: cfg.scenario.b,
                omega,
            },
            2 => ReferenceSignal::BendingY {
                amp: cfg.scenario.c,
                omega,
            },
            _ => ReferenceSignal::Rest,
        },
        ScenarioKind::Custom => {
            let r = cfg.reference[label - 1];
            ReferenceSignal::Custom {
                v_amp: Vector3::from_column_slice(&r.v_amp),
                u_amp: Vector3::from_column_slice(&r.u_amp),
                omega,
            }
        }
    }
}

/// Control-wrench load: the model rod is driven by the control law plus
/// gravity, which the law's compensation term cancels.
///
/// The wrench is evaluated once per interval, at the interval's lower node,
/// and held constant across the RK4 stages. Evaluating the feedback term
/// against the stage states instead would couple the proportional gain into
/// the stage dynamics and turn the base-to-tip sweep into an integration of
/// the unstable feedback direction, amplifying base-guess errors by
/// exp(sum g_p L) and overflowing the shooting residual map.
struct ControlLoad<'a> {
    refs: &'a [ReferenceSample],
    gains: &'a [GainSet],
    gravity: Wrench,
    params: &'a MaterialParams,
    nps: usize,
    frozen: Option<(usize, Wrench)>,
}

impl LoadModel for ControlLoad<'_> {
    fn wrench(
        &mut self,
        interval: usize,
        sigma: f64,
        state: &NodeState,
        rates: &ConfigRates,
    ) -> Wrench {
        if sigma > 0.0 {
            if let Some((cached_interval, w)) = self.frozen {
                if cached_interval == interval {
                    return w;
                }
            }
        }
        let seg = interval / self.nps;
        let cw = control_wrench(
            &self.refs[seg],
            &ControlState {
                v: state.v,
                u: state.u,
                v_t: rates.v_t,
                u_t: rates.u_t,
                r: state.r,
            },
            &self.gains[seg],
            self.params,
        );
        let total = cw + self.gravity;
        self.frozen = Some((interval, total));
        total
    }
}

/// Plant load: each segment applies the constant wrench its measured
/// pressures can express (axial force plus two bending moments in the
/// segment's live base frame), alongside gravity.
struct PlantLoad<'a> {
    equivalents: &'a [EquivalentActuation],
    gravity: Wrench,
    params: &'a MaterialParams,
    nps: usize,
    seg_wrench: Vec<Wrench>,
}

impl LoadModel for PlantLoad<'_> {
    fn enter_segment(&mut self, segment: usize, base: &NodeState) {
        self.seg_wrench[segment] =
            equivalent_to_wrench(&self.equivalents[segment], &base.r, self.params);
    }

    fn wrench(&mut self, interval: usize, _: f64, _: &NodeState, _: &ConfigRates) -> Wrench {
        self.seg_wrench[interval / self.nps] + self.gravity
    }
}

fn blend_samples(a: &ReferenceSample, b: &ReferenceSample, t: f64) -> ReferenceSample {
    ReferenceSample {
        v: a.v.lerp(&b.v, t),
        u: a.u.lerp(&b.u, t),
        v_t: a.v_t.lerp(&b.v_t, t),
        u_t: a.u_t.lerp(&b.u_t, t),
        v_tt: a.v_tt.lerp(&b.v_tt, t),
        u_tt: a.u_tt.lerp(&b.u_tt, t),
    }
}

struct ModelSolveCtx<'a> {
    grid: &'a ArmGrid,
    base_pose: (Vector3<f64>, Matrix3<f64>),
    coeffs: &'a BdfCoeffs,
    hist: &'a HistoryBuffer,
    gains: &'a [GainSet],
    gravity: Wrench,
    params: &'a MaterialParams,
    nps: usize,
    solver: ShootingConfig,
}

/// Solves the model rod under the control load, bisecting toward the
/// previous step's reference when the shooting fails: each continuation
/// level halves the reference change, keeping the warm start inside the
/// solvable neighborhood.
fn solve_model_continuation(
    ctx: &ModelSolveCtx<'_>,
    guess: (Vector3<f64>, Vector3<f64>),
    refs_prev: &[ReferenceSample],
    refs_target: &[ReferenceSample],
    depth: usize,
) -> Result<crate::bvp::RodSweepResult, Error> {
    let mut load = ControlLoad {
        refs: refs_target,
        gains: ctx.gains,
        gravity: ctx.gravity,
        params: ctx.params,
        nps: ctx.nps,
        frozen: None,
    };
    match shooting_solve(
        ctx.grid,
        ctx.base_pose,
        guess,
        ctx.coeffs,
        ctx.hist,
        &mut load,
        &ctx.solver,
    ) {
        Ok(r) => Ok(r),
        Err(Error::ShootingNonConvergence { .. } | Error::SweepDiverged { .. }) if depth < 14 => {
            let mid: Vec<ReferenceSample> = refs_prev
                .iter()
                .zip(refs_target)
                .map(|(a, b)| blend_samples(a, b, 0.5))
                .collect();
            let half = solve_model_continuation(ctx, guess, refs_prev, &mid, depth + 1)?;
            let next_guess = (half.states[0].n, half.states[0].m);
            solve_model_continuation(ctx, next_guess, &mid, refs_target, depth + 1)
        }
        Err(e) => Err(e),
    }
}

fn snapshots_of(states: &[NodeState]) -> Vec<ChannelSnapshot> {
    states
        .iter()
        .map(|s| ChannelSnapshot {
            v: s.v,
            u: s.u,
            q: s.q,
            w: s.w,
        })
        .collect()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller transform.
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Runs the configured scenario and returns the trajectory log.
pub fn run_tracking(cfg: &ScenarioConfig) -> Result<TrackingOutput, SimError> {
    cfg.validate()?;
    let start = Instant::now();

    let params = cfg.material.clone();
    let stiff = stiffness_matrices(&params);
    let n_seg = cfg.scenario.segments;
    let nps = cfg.scenario.nodes_per_segment;
    let grid = ArmGrid::new(params.clone(), stiff.clone(), n_seg, nps);
    let n_nodes = grid.n_nodes();
    let dt = cfg.scenario.dt;
    let omega = cfg.omega();
    let steps = (cfg.scenario.duration / dt).round().max(1.0) as usize;
    let solver = ShootingConfig {
        residual_tol: cfg.solver.residual_tol,
        max_iters: cfg.solver.max_iters,
        fd_epsilon: cfg.solver.fd_epsilon,
    };
    let base_pose = (Vector3::zeros(), Matrix3::<f64>::identity());
    let gravity = gravity_load(&params);

    // Chain position k runs base (k = 0) to tip; label = n_seg - k.
    let mut chain_gains: Vec<GainSet> = Vec::with_capacity(n_seg);
    let mut chain_signals: Vec<ReferenceSignal> = Vec::with_capacity(n_seg);
    for k in 0..n_seg {
        let label = n_seg - k;
        let gains = build_gains(&params, &stiff, cfg.gains_for_label(label)).map_err(|e| {
            ConfigError::Invalid {
                field: format!("gains[{}]", label - 1),
                message: e.to_string(),
            }
        })?;
        chain_gains.push(gains);
        chain_signals.push(reference_for(cfg, label, omega));
    }

    let mut model_hist = HistoryBuffer::at_rest(n_nodes);
    let mut plant_hist = HistoryBuffer::at_rest(n_nodes);
    // Warm starts: quadratic extrapolation of the three previous solutions
    // keeps the shooting guess inside the residual map's stable
    // neighborhood, which shrinks like exp(-sum g_eff L) with the gains.
    let mut model_sol: [(Vector3<f64>, Vector3<f64>); 3] =
        [(Vector3::zeros(), Vector3::zeros()); 3];
    let mut plant_sol: [(Vector3<f64>, Vector3<f64>); 3] =
        [(Vector3::zeros(), Vector3::zeros()); 3];
    let extrapolate = |sol: &[(Vector3<f64>, Vector3<f64>); 3]| {
        (
            sol[0].0 - 3.0 * sol[1].0 + 3.0 * sol[2].0,
            sol[0].1 - 3.0 * sol[1].1 + 3.0 * sol[2].1,
        )
    };
    let mut lag: Vec<Option<LagPlantState>> = vec![None; n_seg];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.scenario.seed);
    let noise = cfg.scenario.noise_sigma;
    // Previous step's reference samples, used as the continuation anchor;
    // the run starts from the rest configuration.
    let mut prev_refs: Vec<ReferenceSample> = vec![ReferenceSample::rest(); n_seg];

    let mut log = TrajectoryLog::default();
    log.rows.reserve(steps * n_seg * (nps + 1));
    let mut measured: Vec<Vec<(f64, f64, f64)>> = vec![Vec::with_capacity(steps); n_seg];
    let mut plant_mean: Vec<Vec<(f64, f64, f64)>> = vec![Vec::with_capacity(steps); n_seg];

    for step in 1..=steps {
        let t = step as f64 * dt;
        let coeffs = if step == 1 {
            BdfCoeffs::startup_euler(dt)
        } else {
            BdfCoeffs::bdf2(dt)
        }
        .map_err(|e| SimError::Aborted {
            step,
            t,
            source: e,
        })?;

        let chain_refs: Vec<ReferenceSample> =
            chain_signals.iter().map(|s| s.sample(t)).collect();

        // (1) Model solve under the control wrench: extrapolated warm start
        // first, then the previous converged solution, then reference
        // continuation from the previous step.
        let model = {
            let ctx = ModelSolveCtx {
                grid: &grid,
                base_pose,
                coeffs: &coeffs,
                hist: &model_hist,
                gains: &chain_gains,
                gravity,
                params: &params,
                nps,
                solver,
            };
            let mut load = ControlLoad {
                refs: &chain_refs,
                gains: &chain_gains,
                gravity,
                params: &params,
                nps,
                frozen: None,
            };
            let warm = extrapolate(&model_sol);
            let solved = match shooting_solve(
                &grid,
                base_pose,
                warm,
                &coeffs,
                &model_hist,
                &mut load,
                &solver,
            ) {
                Ok(r) => Ok(r),
                Err(Error::ShootingNonConvergence { .. } | Error::SweepDiverged { .. }) => {
                    solve_model_continuation(&ctx, model_sol[2], &prev_refs, &chain_refs, 0)
                }
                Err(e) => Err(e),
            }
            .map_err(|e| SimError::Aborted {
                step,
                t,
                source: e,
            })?;
            if std::env::var_os("SOFTARM_TRACE").is_some() {
                let ge = ((solved.states[0].n - warm.0).norm_squared()
                    + (solved.states[0].m - warm.1).norm_squared())
                .sqrt();
                eprintln!(
                    "step {step} t={t:.3} iters={} res={:.2e} warm_err={ge:.3e}",
                    solved.iterations, solved.normalized_residual
                );
            }
            solved
        };
        model_sol = [
            model_sol[1],
            model_sol[2],
            (model.states[0].n, model.states[0].m),
        ];
        prev_refs = chain_refs.clone();

        // (2)-(3) Pressure mapping and regulator lag, per segment. The
        // commanded wrench is the trapezoidal average of the control law
        // over the segment's nodes: the distributed demand concentrates in
        // boundary layers, so a single-node sample would miss most of it.
        let mut pd_log = vec![[0.0; 4]; n_seg];
        let mut pm_log = vec![[0.0; 4]; n_seg];
        let mut plant_equiv = vec![EquivalentActuation::default(); n_seg];
        for k in 0..n_seg {
            let lo = grid.segment_base_node(k);
            let hi = grid.segment_tip_node(k);
            let mut mean = Wrench::ZERO;
            for node_idx in lo..=hi {
                let node = &model.states[node_idx];
                let h = model_hist.terms(node_idx, &coeffs);
                let rates =
                    ConfigRates::reconstruct(coeffs.c0, &node.v, &node.u, &node.q, &node.w, &h);
                let cw = control_wrench(
                    &chain_refs[k],
                    &ControlState {
                        v: node.v,
                        u: node.u,
                        v_t: rates.v_t,
                        u_t: rates.u_t,
                        r: node.r,
                    },
                    &chain_gains[k],
                    &params,
                );
                let weight = if node_idx == lo || node_idx == hi {
                    0.5
                } else {
                    1.0
                };
                mean.f += weight * cw.f;
                mean.l += weight * cw.l;
            }
            mean.f /= nps as f64;
            mean.l /= nps as f64;
            let base_r = model.states[lo].r;
            let p_d = equivalent_to_pressures(
                &wrench_to_equivalent(&mean, &base_r, &params),
                &cfg.limits,
            );
            let p_m = match lag[k] {
                None => {
                    // Regulators are assumed settled at the first set-point.
                    lag[k] = Some(LagPlantState::new(p_d.p, cfg.scenario.lag_time_constant));
                    p_d.p
                }
                Some(state) => {
                    let next = lag_plant_step(&state, &p_d, dt);
                    lag[k] = Some(next);
                    next.p_m
                }
            };
            pd_log[k] = p_d.p;
            pm_log[k] = p_m;
            plant_equiv[k] = pressures_to_equivalent(&ChamberPressures::new(p_m));
        }

        // (4) Virtual plant under the pressure-expressible wrench.
        let plant = {
            let mut load = PlantLoad {
                equivalents: &plant_equiv,
                gravity,
                params: &params,
                nps,
                seg_wrench: vec![Wrench::ZERO; n_seg],
            };
            shooting_solve(
                &grid,
                base_pose,
                extrapolate(&plant_sol),
                &coeffs,
                &plant_hist,
                &mut load,
                &solver,
            )
            .map_err(|e| SimError::Aborted {
                step,
                t,
                source: e,
            })?
        };
        plant_sol = [
            plant_sol[1],
            plant_sol[2],
            (plant.states[0].n, plant.states[0].m),
        ];

        // (5) Virtual measurement: segment tip poses through the arc map.
        let mut model_snaps = snapshots_of(&model.states);
        for k in 0..n_seg {
            let base = &plant.states[grid.segment_base_node(k)];
            let tip = &plant.states[grid.segment_tip_node(k)];
            let mut rel_pos = base.r.transpose() * (tip.p - base.p);
            if noise > 0.0 {
                rel_pos += Vector3::new(
                    noise * standard_normal(&mut rng),
                    noise * standard_normal(&mut rng),
                    noise * standard_normal(&mut rng),
                );
            }
            let rel_rot = base.r.transpose() * tip.r;
            let pcc = tip_to_pcc_dominant(
                &TipPose {
                    position: rel_pos,
                    rotation: rel_rot,
                },
                cfg.scenario.pcc_mode,
            );
            let (ux_m, uy_m, vz_m) = pcc_to_config(&pcc, params.l0);
            let label_idx = n_seg - k - 1;
            measured[label_idx].push((ux_m, uy_m, vz_m));

            let lo = grid.segment_base_node(k);
            let hi = grid.segment_tip_node(k);
            let count = (hi - lo + 1) as f64;
            let mean = plant.states[lo..=hi].iter().fold(
                (0.0, 0.0, 0.0),
                |(ax, ay, az), s| (ax + s.u.x / count, ay + s.u.y / count, az + s.v.z / count),
            );
            plant_mean[label_idx].push(mean);

            // Measured channels become the model's history for those nodes.
            for node in lo..=hi {
                model_snaps[node].u.x = ux_m;
                model_snaps[node].u.y = uy_m;
                model_snaps[node].v.z = vz_m;
            }
        }
        model_hist.push(model_snaps);
        plant_hist.push(snapshots_of(&plant.states));

        // Log rows ordered by (t, segment label, local node).
        for label in 1..=n_seg {
            let k = n_seg - label;
            let sample = &chain_refs[k];
            for local in 0..=nps {
                let node = grid.segment_base_node(k) + local;
                let s = &model.states[node];
                let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
                    s.r,
                ));
                log.rows.push(LogRow {
                    t,
                    seg: label,
                    node: local,
                    u: s.u,
                    v: s.v,
                    u_ref: sample.u,
                    v_ref: sample.v,
                    pos: s.p,
                    quat: [q.w, q.i, q.j, q.k],
                    p_d: pd_log[k],
                    p_m: pm_log[k],
                    iters: model.iterations,
                    residual: model.normalized_residual,
                });
            }
        }
    }

    Ok(TrackingOutput {
        log,
        measured,
        plant_mean,
        steps,
        wall_time: start.elapsed(),
    })
}
