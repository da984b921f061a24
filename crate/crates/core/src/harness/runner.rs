//! Scenario orchestration: the per-robot perception/estimation/control
//! pipeline, stepped in lockstep over the horizon with the network queue as
//! the only cross-robot coupling.
//!
//! Tick order: every robot runs perception, attack injection, and the filter
//! against its state at t_k and enqueues its position error; the network
//! delivers due messages; every robot computes its control and integrates
//! its dynamics over its own iteration period (set by the frame latency of
//! this tick). Records describe the state and estimate at t_k.

use nalgebra::{Rotation3, Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::adversary::{
    apply_misclassification, apply_mislocalization, MisclassSchedule, OverloadModel,
};
use crate::estimation::{FilterParams, FilterState, MeasurementBundle};
use crate::geometry::{camera_from_world, forward_mount, localize_from_box, Rot3};
use crate::harness::config::{ConfigError, ScenarioConfig};
use crate::harness::metrics::{compute_summary, RunDocument, RunSummary, TickRecord};
use crate::observability::GramianAccumulator;
use crate::perception::{class_filter, confidence_thresh_filter, detect};
use crate::seeds::{substream, substream_seed, Subsystem};
use crate::swarm::{consensus_control, step_dynamics, Network, RobotState};

/// Iteration periods are clamped below this floor, seconds.
pub const MIN_DT: f64 = 0.02;

/// Run failure; numerical aborts map to exit code 3 in the CLI.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical abort at step {step}, robot {robot}: {reason}")]
    NumericalAbort {
        step: usize,
        robot: u32,
        reason: String,
    },
}

/// Full result of one scenario run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ticks: Vec<TickRecord>,
    pub summary: RunSummary,
    pub config: ScenarioConfig,
    pub seed: u64,
}

impl RunOutput {
    pub fn document(&self) -> RunDocument {
        RunDocument {
            summary: self.summary.clone(),
            config: self.config.clone(),
        }
    }
}

/// VIO oracle sample: velocity and orientation only. The unobservable
/// absolute position never appears in the interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VioSample {
    pub velocity: Vector3<f64>,
    pub attitude: Rot3,
}

/// Corrupts the true velocity and attitude with zero-mean Gaussian noise.
pub fn vio_oracle(
    true_velocity: &Vector3<f64>,
    true_attitude: &Rot3,
    velocity_std: f64,
    rotation_std: f64,
    rng: &mut impl Rng,
) -> VioSample {
    let mut velocity = *true_velocity;
    let mut attitude = *true_attitude;
    if velocity_std > 0.0 {
        let n = Normal::new(0.0, velocity_std).expect("finite velocity noise");
        velocity += Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng));
    }
    if rotation_std > 0.0 {
        let n = Normal::new(0.0, rotation_std).expect("finite rotation noise");
        let axis = Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng));
        attitude *= Rotation3::from_scaled_axis(axis);
    }
    VioSample { velocity, attitude }
}

struct RobotPipeline {
    id: u32,
    state: RobotState,
    target: Vector3<f64>,
    mount: Rot3,
    filter: FilterState,
    gramian: GramianAccumulator,
    misclass: Option<(MisclassSchedule, u32)>,
    misloc: Option<crate::adversary::MislocSpec>,
    control_attack: Vector2<f64>,
    rng_detector: ChaCha8Rng,
    rng_misloc: ChaCha8Rng,
    rng_vio: ChaCha8Rng,
    /// Last received position error per sender index (zero-order hold).
    neighbor_hold: Vec<Option<Vector3<f64>>>,
    time: f64,
    /// Interval from this tick to the next, set by the latency model.
    next_dt: f64,
}

/// Per-robot intermediate values of one tick.
#[derive(Debug, Clone, Copy)]
struct TickStage {
    dt: f64,
    latency: f64,
    detections: usize,
    candidates: usize,
    selected: Option<usize>,
    pos_err: Vector3<f64>,
    true_position: Vector3<f64>,
    control: Vector2<f64>,
    cov_delta: f64,
}

/// Runs one scenario to completion. Deterministic for a fixed (config, seed).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, RunError> {
    run_scenario_with_seed(cfg, cfg.seed)
}

/// Same as [`run_scenario`] with the master seed overridden.
pub fn run_scenario_with_seed(cfg: &ScenarioConfig, seed: u64) -> Result<RunOutput, RunError> {
    cfg.validate()?;

    let n = cfg.robots.len();
    let intr = cfg.camera.intrinsics();
    let scene: Vec<_> = cfg.scene.iter().map(|o| o.model()).collect();
    let reference = scene[cfg.reference_object_index()];
    let params: FilterParams = cfg.filter.params();
    let gains = cfg.control.gains();
    let profile = cfg.control.reference();
    let altitude = cfg.control.altitude();
    let topology = cfg.topology.topology();
    let overload: OverloadModel = cfg.overload;
    let focal = cfg.resolved_focal_robot();
    let partner = cfg.resolved_partner_robot();

    let link_seeds: Vec<u64> = (0..n as u64)
        .flat_map(|i| (0..n as u64).map(move |j| substream_seed(seed, 0, Subsystem::Link(i, j))))
        .collect();
    let mut network = Network::new(n, cfg.network.loss_prob, cfg.network.delay_steps, link_seeds);

    let mut robots: Vec<RobotPipeline> = cfg
        .robots
        .iter()
        .map(|rc| {
            let id64 = rc.id as u64;
            let attack = cfg.attacks.iter().find(|a| a.robot == rc.id);
            let misclass = attack.and_then(|a| a.misclass.as_ref()).map(|mc| {
                let mut rng = substream(seed, id64, Subsystem::Misclassification);
                let decoy = mc.decoy_class.unwrap_or(reference.class_id + 1);
                (
                    MisclassSchedule::draw(mc.n_blocks, mc.p, cfg.horizon, &mut rng),
                    decoy,
                )
            });
            let misloc = attack.and_then(|a| a.misloc);
            let control_attack = cfg
                .control_attacks
                .iter()
                .find(|a| a.robot == rc.id)
                .map(|a| Vector2::from(a.accel))
                .unwrap_or_else(Vector2::zeros);
            RobotPipeline {
                id: rc.id,
                state: RobotState {
                    position: Vector3::from(rc.initial_position),
                    velocity: Vector3::from(rc.initial_velocity),
                    yaw: rc.initial_yaw,
                },
                target: Vector3::from(rc.target),
                mount: forward_mount()
                    * Rotation3::from_axis_angle(&Vector3::x_axis(), rc.mount_pitch),
                filter: FilterState::initial(&params),
                gramian: GramianAccumulator::new(),
                misclass,
                misloc,
                control_attack,
                rng_detector: substream(seed, id64, Subsystem::Detector),
                rng_misloc: substream(seed, id64, Subsystem::Mislocalization),
                rng_vio: substream(seed, id64, Subsystem::Vio),
                neighbor_hold: vec![None; n],
                time: 0.0,
                next_dt: 0.0,
            }
        })
        .collect();

    let mut ticks: Vec<TickRecord> = Vec::with_capacity(cfg.horizon * n);
    let mut stages: Vec<TickStage> = Vec::with_capacity(n);

    for k in 0..cfg.horizon {
        stages.clear();

        // Perception, attacks, and estimation against the state at t_k.
        for robot in robots.iter_mut() {
            let dt = if k == 0 { 0.0 } else { robot.next_dt };

            let true_attitude = Rotation3::from_axis_angle(&Vector3::z_axis(), robot.state.yaw);
            let vio = vio_oracle(
                &robot.state.velocity,
                &true_attitude,
                cfg.vio.velocity_std,
                cfg.vio.rotation_std,
                &mut robot.rng_vio,
            );
            let cam_true = camera_from_world(&true_attitude, &robot.mount);
            let cam_est = camera_from_world(&vio.attitude, &robot.mount);

            let mut ds = detect(
                &robot.state.position,
                &cam_true,
                &scene,
                &intr,
                &cfg.detector,
                robot.time,
                &mut robot.rng_detector,
            );
            if let Some((sched, decoy)) = &robot.misclass {
                ds = apply_misclassification(&ds, sched, k, reference.class_id, *decoy);
            }
            if let Some(spec) = &robot.misloc {
                ds = apply_mislocalization(&ds, spec, reference.class_id, &mut robot.rng_misloc)
                    .set;
            }
            let detections = ds.len();

            let usable = class_filter(
                &confidence_thresh_filter(&ds, cfg.detector.confidence_threshold),
                reference.class_id,
            );
            let candidates: Vec<_> = usable
                .detections
                .iter()
                .map(|d| {
                    localize_from_box(
                        &d.bbox,
                        &cam_est,
                        &intr,
                        &reference,
                        d.confidence,
                        &params.uncertainty,
                    )
                })
                .collect();

            let cov_before = robot.filter.cov;
            if k > 0 {
                robot.filter.predict(dt, &params);
            }
            let gate = robot.filter.gate(&candidates, &params);
            let selected = gate.associate();
            let bundle = MeasurementBundle {
                velocity: vio.velocity - profile.velocity(k),
                position: selected.map(|s| candidates[s]),
            };
            robot.filter.update(&bundle, &params).map_err(|e| {
                RunError::NumericalAbort {
                    step: k,
                    robot: robot.id,
                    reason: e.to_string(),
                }
            })?;
            robot.filter.time = robot.time;

            let latency = overload.frame_latency(detections);
            robot.next_dt = latency.max(MIN_DT);
            robot.gramian.record_step(robot.next_dt, selected.is_some());

            stages.push(TickStage {
                dt,
                latency,
                detections,
                candidates: candidates.len(),
                selected,
                pos_err: robot.filter.position() - robot.target,
                true_position: robot.state.position,
                control: Vector2::zeros(),
                cov_delta: crate::estimation::spectral_norm(&(robot.filter.cov - cov_before)),
            });
        }

        // Broadcast position errors along the active topology, then deliver
        // what is due this step.
        for (idx, stage) in stages.iter().enumerate() {
            for (j, row) in topology.active(k).iter().enumerate() {
                if j != idx && row[idx] == 1 {
                    network.send(idx, j, stage.pos_err, k);
                }
            }
        }
        for msg in network.deliver(k) {
            robots[msg.receiver].neighbor_hold[msg.sender] = Some(msg.payload);
        }

        // Control from delivered neighbor states.
        for (idx, robot) in robots.iter_mut().enumerate() {
            let mut neighbors: Vec<(f64, Vector3<f64>)> = Vec::new();
            for (j, &a) in topology.row(k, idx).iter().enumerate() {
                if j == idx || a == 0 {
                    continue;
                }
                match robot.neighbor_hold[j] {
                    Some(held) => neighbors.push((a as f64, held)),
                    None => log::debug!(
                        "robot {} has no state from neighbor {j} at step {k}; term skipped",
                        robot.id
                    ),
                }
            }
            stages[idx].control = consensus_control(
                &stages[idx].pos_err,
                &robot.filter.velocity(),
                &neighbors,
                &gains,
                &profile.acceleration(k),
                &robot.control_attack,
            );
        }

        // Log records against the t_k state, then integrate each robot over
        // its own iteration period.
        for (idx, robot) in robots.iter().enumerate() {
            let stage = &stages[idx];
            let counterpart = if robot.id == focal { partner } else { Some(focal) };
            let counterpart_idx = counterpart.and_then(|c| cfg.robots.iter().position(|r| r.id == c));

            let pair_estimate = counterpart_idx.and_then(|ci| {
                robot.neighbor_hold[ci].map(|held| {
                    let their_estimate = held + Vector3::from(cfg.robots[ci].target);
                    let diff = robot.filter.position() - their_estimate;
                    [diff.x, diff.y, diff.z]
                })
            });
            let formation_error = counterpart_idx
                .map(|ci| {
                    let true_diff = stage.true_position - stages[ci].true_position;
                    let target_diff = robot.target - Vector3::from(cfg.robots[ci].target);
                    (true_diff - target_diff).xy().norm()
                })
                .unwrap_or(0.0);

            let q = robot.gramian.quality_ratio();
            let rel_true = stage.true_position - reference.position;
            let s = &robot.filter.state;
            ticks.push(TickRecord {
                step: k,
                robot: robot.id,
                time: robot.time,
                dt: stage.dt,
                latency: stage.latency,
                detections: stage.detections,
                candidates: stage.candidates,
                selected: stage.selected,
                missed: stage.selected.is_none(),
                estimate: [s[0], s[1], s[2], s[3], s[4], s[5]],
                cov_norm: robot.filter.cov_norm(),
                cov_delta_norm: stage.cov_delta,
                gramian_trace_adv: robot.gramian.trace_adversarial(),
                gramian_trace_std: robot.gramian.trace_standard(),
                observability_ratio: q.mean,
                true_position: [rel_true.x, rel_true.y, rel_true.z],
                control: [stage.control.x, stage.control.y],
                formation_error,
                pair_estimate,
            });
        }
        for (idx, robot) in robots.iter_mut().enumerate() {
            step_dynamics(&mut robot.state, &stages[idx].control, robot.next_dt, &altitude);
            if !(robot.state.position.iter().all(|v| v.is_finite())
                && robot.state.velocity.iter().all(|v| v.is_finite()))
            {
                return Err(RunError::NumericalAbort {
                    step: k,
                    robot: robot.id,
                    reason: "non-finite physical state".into(),
                });
            }
            robot.time += robot.next_dt;
        }
    }

    let summary = compute_summary(&ticks, cfg, seed);
    Ok(RunOutput {
        ticks,
        summary,
        config: cfg.clone(),
        seed,
    })
}
