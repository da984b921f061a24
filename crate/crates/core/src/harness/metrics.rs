//! Per-tick log records and run summary metrics.

use serde::{Deserialize, Serialize};

use crate::harness::config::ScenarioConfig;

/// Everything logged for one robot at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub step: usize,
    pub robot: u32,
    /// Timestamp of this iteration, seconds.
    pub time: f64,
    /// Interval since the previous iteration (prediction horizon), seconds.
    pub dt: f64,
    /// Frame processing latency driving the next interval, seconds.
    pub latency: f64,
    /// Detections emitted this frame after attack injection.
    pub detections: usize,
    /// Position candidates surviving confidence and class filtering.
    pub candidates: usize,
    /// Candidate index chosen by the associator, if any.
    pub selected: Option<usize>,
    /// Missed-measurement flag (no admissible candidate).
    pub missed: bool,
    /// Filter estimate: relative position then velocity error.
    pub estimate: [f64; 6],
    /// Induced 2-norm of the filter covariance.
    pub cov_norm: f64,
    /// Induced 2-norm of the covariance change since the previous step.
    pub cov_delta_norm: f64,
    pub gramian_trace_adv: f64,
    pub gramian_trace_std: f64,
    pub observability_ratio: f64,
    /// Ground-truth position relative to the reference object.
    pub true_position: [f64; 3],
    /// Commanded planar acceleration.
    pub control: [f64; 2],
    /// True formation error against the partner robot, x-y norm.
    pub formation_error: f64,
    /// Estimated pair difference (own estimate minus communicated partner
    /// estimate), when a partner exists.
    pub pair_estimate: Option<[f64; 3]>,
}

impl TickRecord {
    pub const CSV_HEADER: &'static str = "step,robot,time,dt,latency,detections,candidates,selected,missed,est_px,est_py,est_pz,est_vx,est_vy,est_vz,cov_norm,cov_delta,gram_adv,gram_std,obs_ratio,true_px,true_py,true_pz,u_x,u_y,formation_err,pair_px,pair_py,pair_pz";

    pub fn to_csv_row(&self) -> String {
        let sel = self
            .selected
            .map(|s| s.to_string())
            .unwrap_or_default();
        let pair = match &self.pair_estimate {
            Some(p) => format!("{},{},{}", p[0], p[1], p[2]),
            None => ",,".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.robot,
            self.time,
            self.dt,
            self.latency,
            self.detections,
            self.candidates,
            sel,
            self.missed as u8,
            self.estimate[0],
            self.estimate[1],
            self.estimate[2],
            self.estimate[3],
            self.estimate[4],
            self.estimate[5],
            self.cov_norm,
            self.cov_delta_norm,
            self.gramian_trace_adv,
            self.gramian_trace_std,
            self.observability_ratio,
            self.true_position[0],
            self.true_position[1],
            self.true_position[2],
            self.control[0],
            self.control[1],
            self.formation_error,
            pair,
        )
    }
}

/// Writes the tick log as CSV, one row per robot per step.
pub fn ticks_to_csv(records: &[TickRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 160 + 256);
    out.push_str(TickRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

/// Headline metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub horizon: usize,
    pub focal_robot: u32,
    pub partner_robot: Option<u32>,
    /// RMS of the estimated pair offset against the target offset, x-y
    /// plane, restricted to t >= 10 s. `None` when no record reaches 10 s.
    pub rms_pair_xy: Option<f64>,
    /// Same metric from the partner robot's point of view.
    pub rms_pair_xy_partner_view: Option<f64>,
    /// RMS of the true formation error over the same window.
    pub rms_true_formation_xy: Option<f64>,
    /// Supremum of the covariance norm over the run.
    pub sup_cov_norm: f64,
    /// Sum of the covariance norm over the run.
    pub sum_cov_norm: f64,
    pub missed_fraction: f64,
    pub mean_latency: f64,
    /// Observability quality ratio at the final step.
    pub final_observability_ratio: f64,
}

/// Seconds of settling excluded from the RMS metrics.
pub const RMS_WINDOW_START: f64 = 10.0;

/// Reduces tick records to the run summary. The focal robot contributes the
/// covariance/latency/missed metrics and its local pair estimate; the
/// partner's symmetric view is reported alongside.
pub fn compute_summary(
    records: &[TickRecord],
    cfg: &ScenarioConfig,
    seed: u64,
) -> RunSummary {
    assert!(!records.is_empty(), "summary needs at least one record");
    let focal = cfg.resolved_focal_robot();
    let partner = cfg.resolved_partner_robot();
    let focal_target = robot_target(cfg, focal);
    let partner_target = partner.map(|p| robot_target(cfg, p));

    let mut sup_cov = 0.0f64;
    let mut sum_cov = 0.0f64;
    let mut missed = 0usize;
    let mut steps = 0usize;
    let mut latency_sum = 0.0f64;
    let mut final_ratio = 1.0;
    let mut pair_sq = Vec::new();
    let mut pair_sq_partner = Vec::new();
    let mut true_sq = Vec::new();

    for r in records {
        if r.robot == focal {
            steps += 1;
            sup_cov = sup_cov.max(r.cov_norm);
            sum_cov += r.cov_norm;
            missed += r.missed as usize;
            latency_sum += r.latency;
            final_ratio = r.observability_ratio;
            if r.time >= RMS_WINDOW_START {
                if let (Some(pair), Some(pt)) = (&r.pair_estimate, &partner_target) {
                    let ex = pair[0] - (focal_target[0] - pt[0]);
                    let ey = pair[1] - (focal_target[1] - pt[1]);
                    pair_sq.push(ex * ex + ey * ey);
                }
                true_sq.push(r.formation_error * r.formation_error);
            }
        } else if Some(r.robot) == partner && r.time >= RMS_WINDOW_START {
            if let (Some(pair), Some(pt)) = (&r.pair_estimate, &partner_target) {
                let ex = pair[0] - (pt[0] - focal_target[0]);
                let ey = pair[1] - (pt[1] - focal_target[1]);
                pair_sq_partner.push(ex * ex + ey * ey);
            }
        }
    }

    let rms = |sq: &[f64]| {
        if sq.is_empty() {
            None
        } else {
            Some((sq.iter().sum::<f64>() / sq.len() as f64).sqrt())
        }
    };

    RunSummary {
        scenario: cfg.name.clone(),
        seed,
        horizon: cfg.horizon,
        focal_robot: focal,
        partner_robot: partner,
        rms_pair_xy: rms(&pair_sq),
        rms_pair_xy_partner_view: rms(&pair_sq_partner),
        rms_true_formation_xy: rms(&true_sq),
        sup_cov_norm: sup_cov,
        sum_cov_norm: sum_cov,
        missed_fraction: missed as f64 / steps.max(1) as f64,
        mean_latency: latency_sum / steps.max(1) as f64,
        final_observability_ratio: final_ratio,
    }
}

fn robot_target(cfg: &ScenarioConfig, id: u32) -> [f64; 3] {
    cfg.robots
        .iter()
        .find(|r| r.id == id)
        .map(|r| r.target)
        .expect("robot id validated")
}

/// JSON result document: summary plus the configuration echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDocument {
    pub summary: RunSummary,
    pub config: ScenarioConfig,
}

impl RunDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run document serializes")
    }
}
