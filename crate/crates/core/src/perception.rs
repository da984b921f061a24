//! Synthetic object detector: renders ground-truth detections of scene
//! objects into the ego camera, producing the box/class/confidence triples a
//! learned detector would emit.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{render_box, BoundingBox, CameraIntrinsics, ObjectModel, Rot3};

/// One detector output: bounding box, class label, confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub class_id: u32,
    /// Confidence probability in [0, 1].
    pub confidence: f64,
}

/// All detections of one camera frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    /// Frame timestamp, seconds.
    pub time: f64,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }
}

/// Knobs of the synthetic detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Zero-mean Gaussian jitter applied to box coordinates, pixels.
    #[serde(default = "default_pixel_noise")]
    pub pixel_noise: f64,
    /// Nominal confidence of a true detection.
    #[serde(default = "default_base_confidence")]
    pub base_confidence: f64,
    /// Half-width of the uniform confidence jitter.
    #[serde(default = "default_confidence_jitter")]
    pub confidence_jitter: f64,
    /// Detections below this confidence are discarded at inference time.
    #[serde(default = "default_confidence_threshold")]
    pub confidence_threshold: f64,
    /// Inference-time IoU threshold. The ground-truth renderer emits one box
    /// per object so no suppression runs here; the value is carried as
    /// metadata for the spurious-box injector.
    #[serde(default = "default_iou_threshold")]
    pub iou_threshold: f64,
}

fn default_pixel_noise() -> f64 {
    0.5
}
fn default_base_confidence() -> f64 {
    0.9
}
fn default_confidence_jitter() -> f64 {
    0.05
}
fn default_confidence_threshold() -> f64 {
    0.15
}
fn default_iou_threshold() -> f64 {
    0.45
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            pixel_noise: default_pixel_noise(),
            base_confidence: default_base_confidence(),
            confidence_jitter: default_confidence_jitter(),
            confidence_threshold: default_confidence_threshold(),
            iou_threshold: default_iou_threshold(),
        }
    }
}

/// Renders one detection per visible scene object from the true ego pose.
/// Box coordinates are jittered by Gaussian pixel noise and clipped to the
/// frame; boxes that collapse under clipping are dropped. Deterministic given
/// the RNG stream.
pub fn detect(
    ego_position: &Vector3<f64>,
    cam_from_world: &Rot3,
    scene: &[ObjectModel],
    intr: &CameraIntrinsics,
    cfg: &DetectorConfig,
    time: f64,
    rng: &mut impl Rng,
) -> DetectionSet {
    let noise = Normal::new(0.0, cfg.pixel_noise.max(0.0)).expect("pixel noise must be finite");
    let mut detections = Vec::new();
    for obj in scene {
        let rel = ego_position - obj.position;
        let Ok(bbox) = render_box(&rel, cam_from_world, intr, obj) else {
            continue;
        };
        let jittered = if cfg.pixel_noise > 0.0 {
            BoundingBox::new(
                bbox.cx + noise.sample(rng),
                bbox.cy + noise.sample(rng),
                (bbox.w + noise.sample(rng)).max(1e-3),
                (bbox.h + noise.sample(rng)).max(1e-3),
            )
        } else {
            bbox
        };
        let Some(clipped) = jittered.clip_to_frame(intr) else {
            continue;
        };
        let confidence = if cfg.confidence_jitter > 0.0 {
            let j = rng.random_range(-cfg.confidence_jitter..=cfg.confidence_jitter);
            (cfg.base_confidence + j).clamp(0.0, 1.0)
        } else {
            cfg.base_confidence.clamp(0.0, 1.0)
        };
        detections.push(Detection {
            bbox: clipped,
            class_id: obj.class_id,
            confidence,
        });
    }
    DetectionSet { time, detections }
}

/// Keeps detections at or above the confidence threshold, preserving order.
pub fn confidence_thresh_filter(ds: &DetectionSet, conf_thresh: f64) -> DetectionSet {
    DetectionSet {
        time: ds.time,
        detections: ds
            .detections
            .iter()
            .copied()
            .filter(|d| d.confidence >= conf_thresh)
            .collect(),
    }
}

/// Keeps detections of one class, preserving order.
pub fn class_filter(ds: &DetectionSet, class_id: u32) -> DetectionSet {
    DetectionSet {
        time: ds.time,
        detections: ds
            .detections
            .iter()
            .copied()
            .filter(|d| d.class_id == class_id)
            .collect(),
    }
}
