//! Planar double-integrator robot dynamics, the distributed consensus
//! control protocol with an adversarial control-channel term, and the
//! simulated message bus carrying neighbor states.

use std::collections::VecDeque;

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Physical state of one robot in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Yaw, radians. Constant in the reduced-order model.
    pub yaw: f64,
}

/// Consensus gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusGains {
    pub alpha: f64,
    pub gamma: f64,
}

/// Shared sinusoidal reference velocity profile, indexed by iteration.
/// The analytic time derivative uses the nominal iteration period, so the
/// profile keeps advancing per iteration under latency attacks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProfile {
    /// Amplitude coefficient `f` in 2*pi*f.
    pub amplitude_coeff: f64,
    /// Iterations per full period.
    pub period_steps: f64,
    /// Nominal iteration period, seconds.
    pub nominal_dt: f64,
}

impl ReferenceProfile {
    pub fn velocity(&self, step: usize) -> Vector3<f64> {
        let phase = 2.0 * std::f64::consts::PI * step as f64 / self.period_steps;
        Vector3::new(
            0.0,
            2.0 * std::f64::consts::PI * self.amplitude_coeff * phase.cos(),
            0.0,
        )
    }

    pub fn acceleration(&self, step: usize) -> Vector3<f64> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let phase = two_pi * step as f64 / self.period_steps;
        let dphase_dt = two_pi / self.period_steps / self.nominal_dt;
        Vector3::new(
            0.0,
            -two_pi * self.amplitude_coeff * phase.sin() * dphase_dt,
            0.0,
        )
    }
}

/// Communication graph, optionally switching between adjacency matrices on a
/// fixed period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// One or more 0/1 adjacency matrices with zero diagonal.
    pub matrices: Vec<Vec<Vec<u8>>>,
    /// Steps between switches when more than one matrix is given.
    #[serde(default = "default_switch_period")]
    pub switch_period: usize,
}

fn default_switch_period() -> usize {
    1
}

impl Topology {
    pub fn fixed(adjacency: Vec<Vec<u8>>) -> Self {
        Self {
            matrices: vec![adjacency],
            switch_period: 1,
        }
    }

    pub fn active(&self, step: usize) -> &Vec<Vec<u8>> {
        let idx = (step / self.switch_period.max(1)) % self.matrices.len();
        &self.matrices[idx]
    }

    /// Adjacency row of robot `i` at `step`.
    pub fn row(&self, step: usize, i: usize) -> &[u8] {
        &self.active(step)[i]
    }

    pub fn is_valid(&self, n: usize) -> bool {
        !self.matrices.is_empty()
            && self.matrices.iter().all(|m| {
                m.len() == n
                    && m.iter().enumerate().all(|(i, row)| {
                        row.len() == n && row[i] == 0 && row.iter().all(|&a| a <= 1)
                    })
            })
    }
}

/// Distributed consensus control: relative-position feedback against every
/// connected neighbor, velocity-error damping, the reference feed-forward,
/// and an additive control-channel attack term. All in the x-y plane.
pub fn consensus_control(
    pos_err_self: &Vector3<f64>,
    vel_err_self: &Vector3<f64>,
    neighbors: &[(f64, Vector3<f64>)],
    gains: &ConsensusGains,
    reference_accel: &Vector3<f64>,
    attack: &Vector2<f64>,
) -> Vector2<f64> {
    let mut u = Vector2::zeros();
    for (weight, pos_err_neighbor) in neighbors {
        u -= gains.alpha * weight * (pos_err_self - pos_err_neighbor).xy();
    }
    u -= gains.gamma * vel_err_self.xy();
    u += reference_accel.xy();
    u += attack;
    u
}

/// Critically damped altitude regulator toward a common flight altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltitudeController {
    pub target: f64,
    /// Natural frequency, rad/s.
    pub natural_freq: f64,
}

impl AltitudeController {
    pub fn accel(&self, state: &RobotState) -> f64 {
        let w = self.natural_freq;
        -w * w * (state.position.z - self.target) - 2.0 * w * state.velocity.z
    }
}

/// Semi-implicit Euler step of the planar double integrator: velocity first,
/// then position with the updated velocity. The vertical axis is driven by
/// the altitude regulator.
pub fn step_dynamics(
    state: &mut RobotState,
    accel_xy: &Vector2<f64>,
    dt: f64,
    altitude: &AltitudeController,
) {
    let accel = Vector3::new(accel_xy.x, accel_xy.y, altitude.accel(state));
    state.velocity += accel * dt;
    state.position += state.velocity * dt;
}

const GRAVITY: f64 = 9.81;

/// Maps a planar acceleration command to commanded pitch/roll deviations at
/// the desired yaw. Diagnostic only; the dynamics consume the acceleration
/// directly. Uses the planar rotation involution
/// [[cos, sin], [sin, -cos]], which is its own inverse and never singular.
pub fn attitude_map(accel_xy: &Vector2<f64>, yaw: f64) -> (f64, f64) {
    let (s, c) = yaw.sin_cos();
    let out = Vector2::new(c * accel_xy.x + s * accel_xy.y, s * accel_xy.x - c * accel_xy.y)
        / GRAVITY;
    (out.x, out.y)
}

/// One neighbor-state message in flight or delivered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborMessage {
    pub sender: usize,
    pub receiver: usize,
    /// Sender's position error (estimate minus target), world frame.
    pub payload: Vector3<f64>,
    pub sent_step: usize,
    pub deliver_step: usize,
}

/// Simulated lossy, delayed message bus. Loss is drawn per message from a
/// per-link stream at send time; delivery happens once the configured delay
/// has elapsed.
#[derive(Debug, Clone)]
pub struct Network {
    pub loss_prob: f64,
    pub delay_steps: usize,
    in_flight: VecDeque<(NeighborMessage, bool)>,
    link_rngs: Vec<ChaCha8Rng>,
    robots: usize,
}

impl Network {
    pub fn new(robots: usize, loss_prob: f64, delay_steps: usize, link_seeds: Vec<u64>) -> Self {
        assert_eq!(link_seeds.len(), robots * robots);
        use rand::SeedableRng;
        Self {
            loss_prob,
            delay_steps,
            in_flight: VecDeque::new(),
            link_rngs: link_seeds
                .into_iter()
                .map(ChaCha8Rng::seed_from_u64)
                .collect(),
            robots,
        }
    }

    pub fn send(&mut self, sender: usize, receiver: usize, payload: Vector3<f64>, step: usize) {
        let rng = &mut self.link_rngs[sender * self.robots + receiver];
        let dropped = self.loss_prob > 0.0 && rng.random_bool(self.loss_prob.min(1.0));
        self.in_flight.push_back((
            NeighborMessage {
                sender,
                receiver,
                payload,
                sent_step: step,
                deliver_step: step + self.delay_steps,
            },
            dropped,
        ));
    }

    /// Pops every message due at `step`, dropping lost ones.
    pub fn deliver(&mut self, step: usize) -> Vec<NeighborMessage> {
        let mut out = Vec::new();
        while let Some((msg, _)) = self.in_flight.front() {
            if msg.deliver_step > step {
                break;
            }
            let (msg, dropped) = self.in_flight.pop_front().unwrap();
            if dropped {
                log::debug!(
                    "message {} -> {} sent at step {} lost",
                    msg.sender,
                    msg.receiver,
                    msg.sent_step
                );
            } else {
                out.push(msg);
            }
        }
        out
    }
}
