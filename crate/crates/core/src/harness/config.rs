//! Scenario configuration: the full experiment description, loaded from TOML
//! and echoed verbatim into result files.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::adversary::{MislocSpec, OverloadModel};
use crate::estimation::FilterParams;
use crate::geometry::{CameraIntrinsics, ObjectModel};
use crate::perception::DetectorConfig;
use crate::swarm::{AltitudeController, ConsensusGains, ReferenceProfile, Topology};

/// Configuration failure; maps to exit code 2 in the CLI.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Camera block of the scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    /// Focal length, pixels.
    pub focal_px: f64,
    pub width_px: f64,
    pub height_px: f64,
}

impl CameraConfig {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::centered(self.focal_px, self.width_px, self.height_px)
    }
}

/// One scene object. The first object with `reference = true` (or the first
/// object overall) anchors the object-centric frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObjectConfig {
    pub class_id: u32,
    /// Physical size, meters.
    pub width: f64,
    pub height: f64,
    pub position: [f64; 3],
    #[serde(default)]
    pub reference: bool,
}

impl SceneObjectConfig {
    pub fn model(&self) -> ObjectModel {
        ObjectModel {
            width: self.width,
            height: self.height,
            position: Vector3::from(self.position),
            class_id: self.class_id,
        }
    }
}

/// Per-robot block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub id: u32,
    pub initial_position: [f64; 3],
    /// Initial velocity, m/s. Set to the reference velocity at step 0 to
    /// start the run already tracking the shared profile.
    #[serde(default)]
    pub initial_velocity: [f64; 3],
    #[serde(default)]
    pub initial_yaw: f64,
    /// Formation target offset relative to the reference object, meters.
    pub target: [f64; 3],
    /// Camera mount pitch on top of the canonical forward mount, radians
    /// (positive tilts the optical axis down).
    #[serde(default)]
    pub mount_pitch: f64,
}

/// VIO noise knobs. The oracle returns velocity and rotation only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VioConfig {
    /// Per-axis velocity noise std, m/s.
    pub velocity_std: f64,
    /// Rotation perturbation std per axis, radians.
    pub rotation_std: f64,
}

/// Network block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(default)]
    pub loss_prob: f64,
    #[serde(default)]
    pub delay_steps: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            loss_prob: 0.0,
            delay_steps: 0,
        }
    }
}

/// Misclassification schedule parameters as configured (outcomes are drawn
/// at run time from the robot's attack substream).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisclassConfig {
    /// Number of equal consecutive blocks over the horizon.
    pub n_blocks: usize,
    /// Per-block attack probability.
    pub p: f64,
    /// Class the relabeling maps the target to; defaults to target class + 1.
    #[serde(default)]
    pub decoy_class: Option<u32>,
}

/// Attack specification for one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub robot: u32,
    #[serde(default)]
    pub misclass: Option<MisclassConfig>,
    #[serde(default)]
    pub misloc: Option<MislocSpec>,
}

/// Synthetic constant control-channel attack, used by the bounded-input
/// stability scenarios instead of the perception-side injectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlAttackConfig {
    pub robot: u32,
    /// Constant planar acceleration added to the control, m/s^2.
    pub accel: [f64; 2],
}

/// Control block: consensus gains plus the shared reference profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub alpha: f64,
    pub gamma: f64,
    /// Reference velocity amplitude coefficient (the `f` in 2*pi*f).
    pub vref_amplitude: f64,
    /// Iterations per reference period.
    pub vref_period_steps: f64,
    /// Nominal iteration period, seconds.
    pub nominal_dt: f64,
    /// Common flight altitude, meters.
    pub altitude: f64,
    /// Altitude regulator natural frequency, rad/s.
    #[serde(default = "default_altitude_freq")]
    pub altitude_freq: f64,
}

fn default_altitude_freq() -> f64 {
    2.0
}

impl ControlConfig {
    pub fn gains(&self) -> ConsensusGains {
        ConsensusGains {
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }

    pub fn reference(&self) -> ReferenceProfile {
        ReferenceProfile {
            amplitude_coeff: self.vref_amplitude,
            period_steps: self.vref_period_steps,
            nominal_dt: self.nominal_dt,
        }
    }

    pub fn altitude(&self) -> AltitudeController {
        AltitudeController {
            target: self.altitude,
            natural_freq: self.altitude_freq,
        }
    }
}

/// Full experiment description. A fixed seed makes the run reproducible
/// bit-for-bit in the logged metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub horizon: usize,
    pub seed: u64,
    /// Robot whose filter and pair estimate feed the summary metrics;
    /// defaults to the attacked robot, else the first robot.
    #[serde(default)]
    pub focal_robot: Option<u32>,
    pub camera: CameraConfig,
    pub scene: Vec<SceneObjectConfig>,
    #[serde(default)]
    pub detector: DetectorConfig,
    pub filter: FilterConfig,
    pub control: ControlConfig,
    pub vio: VioConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    pub topology: TopologyConfig,
    pub robots: Vec<RobotConfig>,
    #[serde(default)]
    pub attacks: Vec<AttackConfig>,
    #[serde(default)]
    pub control_attacks: Vec<ControlAttackConfig>,
    /// Per-robot frame processing cost model.
    #[serde(default)]
    pub overload: OverloadModel,
}

/// Filter block mirroring the runtime parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub sigma2_pos: f64,
    pub sigma2_vel: f64,
    pub r_vel: f64,
    pub eps_scale: f64,
    pub eps_floor: f64,
    pub gate_threshold: f64,
    #[serde(default = "default_initial_vel_var")]
    pub initial_vel_var: f64,
}

fn default_initial_vel_var() -> f64 {
    0.05
}

impl FilterConfig {
    pub fn params(&self) -> FilterParams {
        FilterParams {
            sigma2_pos: self.sigma2_pos,
            sigma2_vel: self.sigma2_vel,
            r_vel: self.r_vel,
            uncertainty: crate::geometry::UncertaintyModel {
                scale: self.eps_scale,
                floor: self.eps_floor,
            },
            gate_threshold: self.gate_threshold,
            initial_vel_var: self.initial_vel_var,
        }
    }
}

/// Topology block: either a single adjacency matrix or a switching list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub adjacency: Vec<Vec<u8>>,
    #[serde(default)]
    pub switching: Option<Vec<Vec<Vec<u8>>>>,
    #[serde(default = "default_switch_period")]
    pub switch_period: usize,
}

fn default_switch_period() -> usize {
    1
}

impl TopologyConfig {
    pub fn topology(&self) -> Topology {
        match &self.switching {
            Some(mats) if !mats.is_empty() => Topology {
                matrices: mats.clone(),
                switch_period: self.switch_period,
            },
            _ => Topology::fixed(self.adjacency.clone()),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Index of the reference object the robots localize against.
    pub fn reference_object_index(&self) -> usize {
        self.scene
            .iter()
            .position(|o| o.reference)
            .unwrap_or(0)
    }

    pub fn robot_index(&self, id: u32) -> Option<usize> {
        self.robots.iter().position(|r| r.id == id)
    }

    /// Summary focal robot: explicit setting, else the single attacked
    /// robot, else the first robot.
    pub fn resolved_focal_robot(&self) -> u32 {
        if let Some(id) = self.focal_robot {
            return id;
        }
        if self.attacks.len() == 1 {
            return self.attacks[0].robot;
        }
        self.robots[0].id
    }

    /// Partner robot for the pair estimate: lowest id different from the
    /// focal robot.
    pub fn resolved_partner_robot(&self) -> Option<u32> {
        let focal = self.resolved_focal_robot();
        self.robots
            .iter()
            .map(|r| r.id)
            .filter(|&id| id != focal)
            .min()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon < 1 {
            return Err(invalid("horizon must be at least 1"));
        }
        if self.robots.is_empty() {
            return Err(invalid("at least one robot required"));
        }
        let mut ids: Vec<u32> = self.robots.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.robots.len() {
            return Err(invalid("robot ids must be unique"));
        }
        if self.scene.is_empty() {
            return Err(invalid("scene needs at least the reference object"));
        }
        for obj in &self.scene {
            if obj.width <= 0.0 || obj.height <= 0.0 {
                return Err(invalid("object sizes must be positive"));
            }
        }
        let intr = self.camera.intrinsics();
        if !intr.is_valid() {
            return Err(invalid("camera intrinsics out of range"));
        }
        if !self.filter.params().is_valid() {
            return Err(invalid("filter parameters out of range"));
        }
        if self.control.alpha <= 0.0 || self.control.gamma <= 0.0 {
            return Err(invalid("consensus gains must be positive"));
        }
        if self.control.nominal_dt <= 0.0 || self.control.vref_period_steps <= 0.0 {
            return Err(invalid("reference profile parameters must be positive"));
        }
        if self.vio.velocity_std < 0.0 || self.vio.rotation_std < 0.0 {
            return Err(invalid("vio noise must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.network.loss_prob) {
            return Err(invalid("network loss probability out of [0, 1]"));
        }
        if self.detector.pixel_noise < 0.0
            || !(0.0..=1.0).contains(&self.detector.base_confidence)
            || self.detector.confidence_jitter < 0.0
        {
            return Err(invalid("detector noise parameters out of range"));
        }
        let topo = self.topology.topology();
        if !topo.is_valid(self.robots.len()) {
            return Err(invalid(
                "topology must be 0/1 square matrices with zero diagonal matching the robot count",
            ));
        }
        if self.overload.base_cost <= 0.0 || self.overload.per_box_cost < 0.0 {
            return Err(invalid("overload cost model out of range"));
        }
        let mut attacked: Vec<u32> = Vec::new();
        for attack in &self.attacks {
            if self.robot_index(attack.robot).is_none() {
                return Err(invalid(format!(
                    "attack references unknown robot {}",
                    attack.robot
                )));
            }
            if attacked.contains(&attack.robot) {
                return Err(invalid(format!(
                    "more than one attack block for robot {}",
                    attack.robot
                )));
            }
            attacked.push(attack.robot);
            if let Some(mc) = &attack.misclass {
                if mc.n_blocks < 1 || mc.n_blocks > self.horizon {
                    return Err(invalid(
                        "misclassification n_blocks must lie in [1, horizon]",
                    ));
                }
                if !(0.0..=1.0).contains(&mc.p) {
                    return Err(invalid("misclassification probability out of [0, 1]"));
                }
                let target_class = self.scene[self.reference_object_index()].class_id;
                if mc.decoy_class == Some(target_class) {
                    return Err(invalid("decoy class must differ from the target class"));
                }
            }
            if let Some(ml) = &attack.misloc {
                if ml.q < 0.0 || ml.conf_boost < 0.0 {
                    return Err(invalid("mislocalization parameters out of range"));
                }
            }
        }
        for ca in &self.control_attacks {
            if self.robot_index(ca.robot).is_none() {
                return Err(invalid(format!(
                    "control attack references unknown robot {}",
                    ca.robot
                )));
            }
        }
        if let Some(id) = self.focal_robot {
            if self.robot_index(id).is_none() {
                return Err(invalid(format!("focal robot {id} does not exist")));
            }
        }
        Ok(())
    }
}
