//! Detection-level attack injectors: misclassification (sporadic
//! measurements), mislocalization (spurious measurements), and the overload
//! cost model (latency). Injectors operate on detection sets, never on
//! pixels, and never mutate their inputs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::perception::{Detection, DetectionSet};

/// Block-structured misclassification schedule. The horizon is split into
/// `n_blocks` equal runs of consecutive steps and each block is attacked
/// independently with probability `p`, so fewer blocks at the same `p` mean
/// longer consecutive outages.
#[derive(Debug, Clone)]
pub struct MisclassSchedule {
    n_blocks: usize,
    p: f64,
    horizon_steps: usize,
    block_len: usize,
    realized: Vec<bool>,
}

impl MisclassSchedule {
    /// Draws all block outcomes up front from the given stream.
    pub fn draw(n_blocks: usize, p: f64, horizon_steps: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(n_blocks >= 1, "schedule needs at least one block");
        assert!(
            n_blocks <= horizon_steps,
            "more blocks than steps in the horizon"
        );
        assert!((0.0..=1.0).contains(&p), "probability out of range");
        let block_len = horizon_steps.div_ceil(n_blocks);
        let realized = (0..n_blocks).map(|_| rng.random_bool(p)).collect();
        Self {
            n_blocks,
            p,
            horizon_steps,
            block_len,
            realized,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn success_probability(&self) -> f64 {
        self.p
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Whether step `k` falls in an attacked block.
    pub fn is_attacked(&self, step: usize) -> bool {
        assert!(step < self.horizon_steps, "step beyond schedule horizon");
        self.realized[(step / self.block_len).min(self.n_blocks - 1)]
    }
}

/// Parameters of the spurious-box injector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MislocSpec {
    /// Number of spurious boxes appended per nominal target detection.
    pub b: usize,
    /// Corner perturbation magnitude as a fraction (0.30 = +/-30%).
    pub q: f64,
    /// Additive confidence bonus given to spurious boxes.
    #[serde(default = "default_conf_boost")]
    pub conf_boost: f64,
}

fn default_conf_boost() -> f64 {
    0.10
}

/// Per-frame processing cost: a base cost plus a per-detection cost, so
/// flooding the detector output inflates the iteration period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverloadModel {
    /// Seconds per frame independent of the detection count.
    #[serde(default = "default_base_cost")]
    pub base_cost: f64,
    /// Seconds per detection in the frame.
    #[serde(default = "default_per_box_cost")]
    pub per_box_cost: f64,
}

fn default_base_cost() -> f64 {
    0.034
}
fn default_per_box_cost() -> f64 {
    0.001
}

impl Default for OverloadModel {
    fn default() -> Self {
        Self {
            base_cost: default_base_cost(),
            per_box_cost: default_per_box_cost(),
        }
    }
}

impl OverloadModel {
    /// Iteration period implied by processing `m` detections.
    pub fn frame_latency(&self, m: usize) -> f64 {
        self.base_cost + m as f64 * self.per_box_cost
    }
}

/// Relabels every detection of the target class with the decoy class on
/// attacked steps; identity otherwise. Detections are kept, not deleted:
/// downstream class filtering is what turns the relabeling into a missed
/// measurement.
pub fn apply_misclassification(
    ds: &DetectionSet,
    sched: &MisclassSchedule,
    step: usize,
    target_class: u32,
    decoy_class: u32,
) -> DetectionSet {
    debug_assert_ne!(target_class, decoy_class, "decoy must differ from target");
    if !sched.is_attacked(step) {
        return ds.clone();
    }
    DetectionSet {
        time: ds.time,
        detections: ds
            .detections
            .iter()
            .map(|d| {
                if d.class_id == target_class {
                    Detection {
                        class_id: decoy_class,
                        ..*d
                    }
                } else {
                    *d
                }
            })
            .collect(),
    }
}

/// Outcome of one spurious-box injection pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MislocOutcome {
    pub set: DetectionSet,
    /// Spurious boxes abandoned after repeated degenerate redraws.
    pub skipped: usize,
}

const MAX_REDRAWS: usize = 10;

fn corner_scale<R: Rng + ?Sized>(q: f64, rng: &mut R) -> f64 {
    if q > 0.0 {
        rng.random_range(1.0 - q..=1.0 + q)
    } else {
        1.0
    }
}

/// Appends `b` spurious detections per nominal detection of the target
/// class. Each spurious box scales the nominal top-left/bottom-right corner
/// coordinates by independent uniform factors in [1-q, 1+q] (corners
/// re-ordered if they cross), keeps the class, and boosts the confidence.
/// Nominal detections are retained in place; spurious ones follow.
pub fn apply_mislocalization(
    ds: &DetectionSet,
    spec: &MislocSpec,
    target_class: u32,
    rng: &mut impl Rng,
) -> MislocOutcome {
    let mut detections = ds.detections.clone();
    let mut skipped = 0;
    for nominal in &ds.detections {
        if nominal.class_id != target_class {
            continue;
        }
        let [x1, y1, x2, y2] = nominal.bbox.corners();
        let confidence = (nominal.confidence + spec.conf_boost).clamp(0.0, 1.0);
        for _ in 0..spec.b {
            let mut placed = false;
            for _ in 0..MAX_REDRAWS {
                let mut px1 = x1 * corner_scale(spec.q, rng);
                let mut py1 = y1 * corner_scale(spec.q, rng);
                let mut px2 = x2 * corner_scale(spec.q, rng);
                let mut py2 = y2 * corner_scale(spec.q, rng);
                if px1 > px2 {
                    std::mem::swap(&mut px1, &mut px2);
                }
                if py1 > py2 {
                    std::mem::swap(&mut py1, &mut py2);
                }
                let bbox = crate::geometry::BoundingBox::from_corners(px1, py1, px2, py2);
                if bbox.is_valid() {
                    detections.push(Detection {
                        bbox,
                        class_id: nominal.class_id,
                        confidence,
                    });
                    placed = true;
                    break;
                }
            }
            if !placed {
                skipped += 1;
                log::debug!("spurious box skipped after {MAX_REDRAWS} degenerate redraws");
            }
        }
    }
    MislocOutcome {
        set: DetectionSet {
            time: ds.time,
            detections,
        },
        skipped,
    }
}

/// Detection-level attack distance for matched detection pairs across two
/// frames: infinite when the classes differ, otherwise the Euclidean distance
/// between the box corner vectors.
pub fn detection_distance(
    frame_a: &DetectionSet,
    frame_b: &DetectionSet,
    matched_pairs: &[(usize, usize)],
) -> Vec<f64> {
    matched_pairs
        .iter()
        .map(|&(i, j)| {
            let a = &frame_a.detections[i];
            let b = &frame_b.detections[j];
            if a.class_id != b.class_id {
                f64::INFINITY
            } else {
                let ca = a.bbox.corners();
                let cb = b.bbox.corners();
                ca.iter()
                    .zip(cb.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            }
        })
        .collect()
}
