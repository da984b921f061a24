//! Kalman filter fusing always-available velocity measurements with
//! adversarially intermittent relative-position measurements, plus
//! Mahalanobis gating and nearest-candidate association.
//!
//! State is the 6-vector (relative position, velocity error w.r.t. the
//! shared reference), with a constant-velocity transition over the iteration
//! period. The position stage of the update runs only when a gated candidate
//! survives association; the velocity stage runs every step.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::geometry::{RelPosMeasurement, UncertaintyModel};

/// Filter tuning shared by all robots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Process noise variance on the position block, m^2 per step.
    pub sigma2_pos: f64,
    /// Process noise variance on the velocity block, (m/s)^2 per step.
    pub sigma2_vel: f64,
    /// Isotropic velocity measurement variance, (m/s)^2.
    pub r_vel: f64,
    /// Confidence-to-covariance map for position candidates.
    pub uncertainty: UncertaintyModel,
    /// Mahalanobis gate threshold (distance, not squared).
    pub gate_threshold: f64,
    /// Initial variance on the velocity block of the prior.
    pub initial_vel_var: f64,
}

impl FilterParams {
    pub fn is_valid(&self) -> bool {
        self.sigma2_pos > 0.0
            && self.sigma2_vel > 0.0
            && self.r_vel > 0.0
            && self.gate_threshold > 0.0
            && self.uncertainty.floor > 0.0
            && self.uncertainty.scale >= 0.0
            && self.initial_vel_var > 0.0
    }
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            sigma2_pos: 0.05,
            sigma2_vel: 0.04,
            r_vel: 0.078,
            uncertainty: UncertaintyModel {
                scale: 0.4,
                floor: 0.01,
            },
            gate_threshold: 2.4476,
            initial_vel_var: 0.05,
        }
    }
}

/// Measurements assimilated in one step: velocity always present, position
/// only when gating and association produced a survivor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementBundle {
    /// Velocity relative to the shared reference profile, m/s.
    pub velocity: Vector3<f64>,
    /// Associated position candidate, if any. `None` marks a missed step.
    pub position: Option<RelPosMeasurement>,
}

impl MeasurementBundle {
    /// True when the position measurement was missed this step.
    pub fn missed(&self) -> bool {
        self.position.is_none()
    }
}

/// Numerical failure inside the filter; the surrounding run must abort.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("non-finite innovation at step {step}")]
    NonFiniteInnovation { step: usize },
    #[error("innovation covariance not invertible at step {step}")]
    SingularInnovation { step: usize },
}

/// Result of gating a candidate list against the predicted position.
#[derive(Debug, Clone, Default)]
pub struct GateResult {
    /// Admitted candidates as (index into the candidate list, squared
    /// Mahalanobis distance), in input order.
    pub admitted: Vec<(usize, f64)>,
    /// Candidates rejected because their innovation covariance was close to
    /// singular (condition number above 1e12).
    pub singular_rejections: usize,
}

impl GateResult {
    /// A step with an empty admissible set is a missed measurement.
    pub fn missed(&self) -> bool {
        self.admitted.is_empty()
    }

    /// Nearest-candidate association: minimum squared Mahalanobis distance,
    /// ties broken by the lowest candidate index.
    pub fn associate(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &(idx, d2) in &self.admitted {
            match best {
                Some((_, bd2)) if d2 >= bd2 => {}
                _ => best = Some((idx, d2)),
            }
        }
        best.map(|(idx, _)| idx)
    }
}

const SINGULAR_CONDITION: f64 = 1e12;

/// Filter state: 6-D estimate and covariance, with the step/time bookkeeping
/// used by the logs.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub state: Vector6<f64>,
    pub cov: Matrix6<f64>,
    pub step: usize,
    pub time: f64,
}

impl FilterState {
    /// Prior before the first measurement: zero state, unit position
    /// variance, configurable velocity variance.
    pub fn initial(params: &FilterParams) -> Self {
        let mut cov = Matrix6::zeros();
        cov.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&Matrix3::identity());
        cov.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(Matrix3::identity() * params.initial_vel_var));
        Self {
            state: Vector6::zeros(),
            cov,
            step: 0,
            time: 0.0,
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        self.state.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.state.fixed_rows::<3>(3).into_owned()
    }

    /// Induced 2-norm of the covariance (largest eigenvalue for a symmetric
    /// PSD matrix).
    pub fn cov_norm(&self) -> f64 {
        spectral_norm(&self.cov)
    }

    /// Constant-velocity time update over `dt` seconds.
    pub fn predict(&mut self, dt: f64, params: &FilterParams) {
        let mut f = Matrix6::identity();
        f.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(Matrix3::identity() * dt));
        let mut q = Matrix6::zeros();
        q.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(Matrix3::identity() * params.sigma2_pos));
        q.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(Matrix3::identity() * params.sigma2_vel));
        self.state = f * self.state;
        self.cov = f * self.cov * f.transpose() + q;
        symmetrize(&mut self.cov);
    }

    /// Mahalanobis gate against the predicted position. Each candidate is
    /// tested with its own measurement covariance inside the innovation
    /// covariance.
    pub fn gate(&self, candidates: &[RelPosMeasurement], params: &FilterParams) -> GateResult {
        let mut result = GateResult::default();
        let predicted = self.position();
        let pos_cov = self.cov.fixed_view::<3, 3>(0, 0).into_owned();
        let threshold2 = params.gate_threshold * params.gate_threshold;
        for (idx, cand) in candidates.iter().enumerate() {
            let s = pos_cov + cand.covariance;
            let eig = s.symmetric_eigenvalues();
            let (min_eig, max_eig) = (eig.min(), eig.max());
            if !(min_eig > 0.0 && max_eig / min_eig < SINGULAR_CONDITION) {
                result.singular_rejections += 1;
                log::warn!("gate rejected candidate {idx}: near-singular innovation covariance");
                continue;
            }
            let diff = cand.position - predicted;
            let d2 = match s.cholesky() {
                Some(chol) => diff.dot(&chol.solve(&diff)),
                None => {
                    result.singular_rejections += 1;
                    continue;
                }
            };
            if d2 <= threshold2 {
                result.admitted.push((idx, d2));
            }
        }
        result
    }

    /// Sequential measurement update: position stage when a candidate is
    /// present, velocity stage always, each gain computed against the
    /// covariance left by the previous stage. Covariance is re-symmetrized
    /// afterwards.
    pub fn update(
        &mut self,
        bundle: &MeasurementBundle,
        params: &FilterParams,
    ) -> Result<(), FilterError> {
        if let Some(meas) = &bundle.position {
            self.correct::<0>(&meas.position, &meas.covariance)?;
        }
        let r_vel = Matrix3::identity() * params.r_vel;
        self.correct::<3>(&bundle.velocity, &r_vel)?;
        self.step += 1;
        Ok(())
    }

    /// One linear correction on the 3-row block starting at `OFFSET`
    /// (0 = position, 3 = velocity).
    fn correct<const OFFSET: usize>(
        &mut self,
        measurement: &Vector3<f64>,
        noise: &Matrix3<f64>,
    ) -> Result<(), FilterError> {
        let innovation = measurement - self.state.fixed_rows::<3>(OFFSET);
        if !innovation.iter().all(|v| v.is_finite()) {
            return Err(FilterError::NonFiniteInnovation { step: self.step });
        }
        let s = self.cov.fixed_view::<3, 3>(OFFSET, OFFSET).into_owned() + noise;
        let chol = s
            .cholesky()
            .ok_or(FilterError::SingularInnovation { step: self.step })?;
        // K = P C^T S^-1, with C selecting the measured block.
        let pct = self.cov.fixed_columns::<3>(OFFSET).into_owned();
        let kt = chol.solve(&pct.transpose()); // S^-1 (P C^T)^T = K^T
        let gain = kt.transpose();
        self.state += gain * innovation;
        let cp = self.cov.fixed_rows::<3>(OFFSET).into_owned(); // C P
        self.cov -= gain * cp;
        symmetrize(&mut self.cov);
        Ok(())
    }
}

fn symmetrize(m: &mut Matrix6<f64>) {
    *m = (*m + m.transpose()) * 0.5;
}

/// Largest-magnitude eigenvalue of a symmetric matrix.
pub fn spectral_norm(m: &Matrix6<f64>) -> f64 {
    m.symmetric_eigenvalues().iter().fold(0.0, |a, &e| a.max(e.abs()))
}
