//! Camera geometry: coordinate frames, pinhole projection, and recovery of a
//! 3D relative position from a bounding box of an object of known size.
//!
//! The world frame is anchored at the object of interest (object-centric map).
//! A relative position here is always "robot position minus object position",
//! expressed in the world frame. The camera frame follows the usual computer
//! vision convention: x right, y down, z forward along the optical axis.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

/// 3D rotation, re-exported so downstream modules share one type.
pub type Rot3 = Rotation3<f64>;

/// Compose the camera-from-world rotation out of the robot attitude
/// (body-to-world) and the fixed camera mount (camera-to-body).
pub fn camera_from_world(attitude: &Rot3, mount: &Rot3) -> Rot3 {
    mount.inverse() * attitude.inverse()
}

/// Canonical forward-pointing mount: camera z (optical axis) along body x,
/// camera x along body -y, camera y along body -z.
pub fn forward_mount() -> Rot3 {
    Rotation3::from_matrix_unchecked(Matrix3::new(
        0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0,
    ))
}

/// Checks orthonormality and positive determinant of a raw 3x3 matrix before
/// treating it as a rotation. Tolerance 1e-9 on both conditions.
pub fn validate_rotation(m: &Matrix3<f64>) -> bool {
    let orth = (m.transpose() * m - Matrix3::identity()).norm();
    orth <= 1e-9 && (m.determinant() - 1.0).abs() <= 1e-9
}

/// Calibrated pinhole intrinsics. The principal point sits at the image
/// center by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// Focal length in pixels.
    pub focal: f64,
    /// Principal point, pixels.
    pub cx: f64,
    pub cy: f64,
    /// Image size, pixels.
    pub width: f64,
    pub height: f64,
}

impl CameraIntrinsics {
    /// Intrinsics with the principal point at the image center.
    pub fn centered(focal: f64, width: f64, height: f64) -> Self {
        Self {
            focal,
            cx: width / 2.0,
            cy: height / 2.0,
            width,
            height,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.focal > 0.0
            && self.cx > 0.0
            && self.cx < self.width
            && self.cy > 0.0
            && self.cy < self.height
    }
}

/// Axis-aligned bounding box in image space, center parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    /// Center, pixels.
    pub cx: f64,
    pub cy: f64,
    /// Extent, pixels. Positive by invariant.
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    /// Lossless conversion from top-left/bottom-right corner form.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            cx: (x1 + x2) / 2.0,
            cy: (y1 + y2) / 2.0,
            w: x2 - x1,
            h: y2 - y1,
        }
    }

    /// Corner form (x1, y1, x2, y2).
    pub fn corners(&self) -> [f64; 4] {
        [
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        ]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.cx.is_finite() && self.cy.is_finite()
    }

    /// Fraction of the box area lying inside the image rectangle.
    pub fn in_frame_fraction(&self, intr: &CameraIntrinsics) -> f64 {
        let [x1, y1, x2, y2] = self.corners();
        let ix = (x2.min(intr.width) - x1.max(0.0)).max(0.0);
        let iy = (y2.min(intr.height) - y1.max(0.0)).max(0.0);
        ix * iy / self.area()
    }

    /// Intersects the box with the image rectangle. `None` when nothing is
    /// left.
    pub fn clip_to_frame(&self, intr: &CameraIntrinsics) -> Option<Self> {
        let [x1, y1, x2, y2] = self.corners();
        let cx1 = x1.max(0.0);
        let cy1 = y1.max(0.0);
        let cx2 = x2.min(intr.width);
        let cy2 = y2.min(intr.height);
        if cx2 > cx1 && cy2 > cy1 {
            Some(Self::from_corners(cx1, cy1, cx2, cy2))
        } else {
            None
        }
    }

    /// Intersection-over-union with another box.
    pub fn iou(&self, other: &Self) -> f64 {
        let [ax1, ay1, ax2, ay2] = self.corners();
        let [bx1, by1, bx2, by2] = other.corners();
        let ix = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
        let iy = (ay2.min(by2) - ay1.max(by1)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

/// Planar object of known physical size, anchored in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectModel {
    /// Physical width/height, meters.
    pub width: f64,
    pub height: f64,
    /// Object center in the world frame, meters.
    pub position: Vector3<f64>,
    pub class_id: u32,
}

/// Confidence-driven isotropic localization uncertainty:
/// cov = ((1 - pr) * scale + floor) * I.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyModel {
    /// Weight on (1 - confidence), m^2.
    pub scale: f64,
    /// Variance floor retained at full confidence, m^2.
    pub floor: f64,
}

impl UncertaintyModel {
    pub fn variance(&self, confidence: f64) -> f64 {
        (1.0 - confidence) * self.scale + self.floor
    }

    pub fn covariance(&self, confidence: f64) -> Matrix3<f64> {
        Matrix3::identity() * self.variance(confidence)
    }
}

/// One candidate 3D relative position derived from a detection, with the
/// isotropic covariance used downstream as the position measurement noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelPosMeasurement {
    /// Robot position relative to the object center, world frame, meters.
    pub position: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    /// Detection confidence the covariance was evaluated at.
    pub confidence: f64,
}

/// Why a projection produced no usable image evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum NotVisible {
    #[error("object behind the camera")]
    BehindCamera,
    #[error("projection outside the image frame")]
    OutOfFrame,
}

/// Result of projecting a relative position into the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Normalized image coordinates (x/z, y/z in the camera frame).
    pub x_norm: f64,
    pub y_norm: f64,
    /// Depth along the optical axis, meters. Positive in front of the camera.
    pub depth: f64,
    /// Pixel coordinates.
    pub px: f64,
    pub py: f64,
}

/// Camera-frame coordinates of the object as seen from a robot displaced by
/// `rel_pos` from the object center. The object sits at minus the relative
/// position in robot-centered coordinates, hence the sign flip.
fn object_in_camera(rel_pos: &Vector3<f64>, cam_from_world: &Rot3) -> Vector3<f64> {
    -(cam_from_world * rel_pos)
}

/// Pinhole projection of the object center. Errors when the object is behind
/// the camera or its projected center falls outside the frame.
pub fn project(
    rel_pos: &Vector3<f64>,
    cam_from_world: &Rot3,
    intr: &CameraIntrinsics,
) -> Result<Projection, NotVisible> {
    let p = project_unchecked(rel_pos, cam_from_world, intr)?;
    if p.px < 0.0 || p.px > intr.width || p.py < 0.0 || p.py > intr.height {
        return Err(NotVisible::OutOfFrame);
    }
    Ok(p)
}

/// Projection without the in-frame test; still rejects points behind the
/// camera.
fn project_unchecked(
    rel_pos: &Vector3<f64>,
    cam_from_world: &Rot3,
    intr: &CameraIntrinsics,
) -> Result<Projection, NotVisible> {
    let cam = object_in_camera(rel_pos, cam_from_world);
    if cam.z <= 0.0 {
        return Err(NotVisible::BehindCamera);
    }
    let x_norm = cam.x / cam.z;
    let y_norm = cam.y / cam.z;
    Ok(Projection {
        x_norm,
        y_norm,
        depth: cam.z,
        px: intr.focal * x_norm + intr.cx,
        py: intr.focal * y_norm + intr.cy,
    })
}

/// Minimum fraction of a rendered box that must lie inside the frame before
/// the synthetic detector reports the object at all.
pub const MIN_VISIBLE_FRACTION: f64 = 0.25;

/// Renders the ground-truth bounding box a detector would place around the
/// object: center at the projected object center, extent scaled by depth
/// (front-parallel planar object). Grazing views with less than
/// [`MIN_VISIBLE_FRACTION`] of the box in frame report not-visible.
pub fn render_box(
    rel_pos: &Vector3<f64>,
    cam_from_world: &Rot3,
    intr: &CameraIntrinsics,
    obj: &ObjectModel,
) -> Result<BoundingBox, NotVisible> {
    let p = project_unchecked(rel_pos, cam_from_world, intr)?;
    let bbox = BoundingBox::new(
        p.px,
        p.py,
        intr.focal * obj.width / p.depth,
        intr.focal * obj.height / p.depth,
    );
    if bbox.in_frame_fraction(intr) < MIN_VISIBLE_FRACTION {
        return Err(NotVisible::OutOfFrame);
    }
    Ok(bbox)
}

/// Recovers the relative position of the robot with respect to the object
/// center from one bounding box, assuming orthographic scaling of the known
/// object width. Depth comes from the width ratio only; the box height is
/// carried by the detection but does not enter the depth estimate.
///
/// Sign convention: the camera ray to the object is the negative of the
/// robot-relative-to-object vector, so the recovered position is
/// `-R_cw^T * depth * [x_norm, y_norm, 1]`.
pub fn localize_from_box(
    bbox: &BoundingBox,
    cam_from_world: &Rot3,
    intr: &CameraIntrinsics,
    obj: &ObjectModel,
    confidence: f64,
    uncertainty: &UncertaintyModel,
) -> RelPosMeasurement {
    let depth = intr.focal * obj.width / bbox.w;
    let x_norm = (bbox.cx - intr.cx) / intr.focal;
    let y_norm = (bbox.cy - intr.cy) / intr.focal;
    let ray = Vector3::new(x_norm, y_norm, 1.0) * depth;
    RelPosMeasurement {
        position: -(cam_from_world.inverse() * ray),
        covariance: uncertainty.covariance(confidence),
        confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_intrinsics() -> CameraIntrinsics {
        CameraIntrinsics::centered(400.0, 960.0, 720.0)
    }

    fn test_object() -> ObjectModel {
        ObjectModel {
            width: 0.5,
            height: 0.4,
            position: Vector3::zeros(),
            class_id: 2,
        }
    }

    /// Independent evaluation of the projection equations with plain array
    /// arithmetic, used as the oracle for `project`.
    fn project_oracle(rel: [f64; 3], r_cw: [[f64; 3]; 3], intr: &CameraIntrinsics) -> [f64; 3] {
        let mut cam = [0.0; 3];
        for (i, row) in r_cw.iter().enumerate() {
            cam[i] = -(row[0] * rel[0] + row[1] * rel[1] + row[2] * rel[2]);
        }
        let _ = intr;
        [cam[0] / cam[2], cam[1] / cam[2], cam[2]]
    }

    fn random_rotation(rng: &mut impl Rng) -> Rot3 {
        Rotation3::from_euler_angles(
            rng.random_range(-3.0..3.0),
            rng.random_range(-1.4..1.4),
            rng.random_range(-3.0..3.0),
        )
    }

    #[test]
    fn on_axis_projection() {
        // Robot displaced -d along the camera axis from the object.
        let intr = test_intrinsics();
        let p = project(&Vector3::new(0.0, 0.0, -2.5), &Rot3::identity(), &intr).unwrap();
        assert_relative_eq!(p.x_norm, 0.0);
        assert_relative_eq!(p.y_norm, 0.0);
        assert_relative_eq!(p.depth, 2.5);
        assert_relative_eq!(p.px, intr.cx);
        assert_relative_eq!(p.py, intr.cy);
    }

    #[test]
    fn unit_slope_ray_lands_focal_pixels_from_center() {
        // x_C = z_C means the normalized coordinate is 1, so the pixel sits
        // exactly one focal length right of the principal point.
        let intr = test_intrinsics();
        let depth = 1.7;
        let rel = Vector3::new(-depth, 0.0, -depth);
        let p = project(&rel, &Rot3::identity(), &intr).unwrap();
        assert_relative_eq!(p.px, intr.cx + intr.focal, epsilon = 1e-12);
    }

    #[test]
    fn behind_camera_and_out_of_frame_signal_not_visible() {
        let intr = test_intrinsics();
        assert_eq!(
            project(&Vector3::new(0.0, 0.0, 1.0), &Rot3::identity(), &intr),
            Err(NotVisible::BehindCamera)
        );
        // Steep lateral offset: in front, but far outside the frame.
        assert_eq!(
            project(&Vector3::new(-10.0, 0.0, -1.0), &Rot3::identity(), &intr),
            Err(NotVisible::OutOfFrame)
        );
    }

    #[test]
    fn projection_matches_independent_oracle() {
        let intr = test_intrinsics();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 100 {
            let r_cw = random_rotation(&mut rng);
            let rel = Vector3::new(
                rng.random_range(-4.0..4.0),
                rng.random_range(-4.0..4.0),
                rng.random_range(-4.0..4.0),
            );
            let mut m = [[0.0; 3]; 3];
            for r in 0..3 {
                for c in 0..3 {
                    m[r][c] = r_cw.matrix()[(r, c)];
                }
            }
            let cam_z = -(m[2][0] * rel.x + m[2][1] * rel.y + m[2][2] * rel.z);
            if cam_z <= 0.1 {
                continue;
            }
            let got = project_unchecked(&rel, &r_cw, &intr).unwrap();
            let want = project_oracle([rel.x, rel.y, rel.z], m, &intr);
            assert_relative_eq!(got.x_norm, want[0], epsilon = 1e-12);
            assert_relative_eq!(got.y_norm, want[1], epsilon = 1e-12);
            assert_relative_eq!(got.depth, want[2], epsilon = 1e-12);
            checked += 1;
        }
    }

    #[test]
    fn box_width_follows_depth_ratio() {
        let intr = CameraIntrinsics::centered(400.0, 960.0, 720.0);
        let obj = test_object();
        // f_c = 400 px, W_obj = 0.5 m, depth 2 m -> w = 100 px.
        let bbox = render_box(&Vector3::new(0.0, 0.0, -2.0), &Rot3::identity(), &intr, &obj)
            .unwrap();
        assert_relative_eq!(bbox.w, 100.0, epsilon = 1e-12);

        let far = render_box(&Vector3::new(0.0, 0.0, -4.0), &Rot3::identity(), &intr, &obj)
            .unwrap();
        assert_relative_eq!(far.w, bbox.w / 2.0, epsilon = 1e-12);
        assert_relative_eq!(far.h, bbox.h / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn mostly_clipped_box_reports_not_visible() {
        let intr = test_intrinsics();
        let obj = test_object();
        // Object projecting well past the left image edge: under a quarter
        // of the box area stays in frame.
        let depth = 0.3;
        let x_norm = -(intr.cx + 200.0) / intr.focal;
        let rel = -(Rot3::identity().inverse() * (Vector3::new(x_norm, 0.0, 1.0) * depth));
        assert_eq!(
            render_box(&rel, &Rot3::identity(), &intr, &obj),
            Err(NotVisible::OutOfFrame)
        );
    }

    #[test]
    fn on_axis_localization_inverts_projection() {
        let intr = test_intrinsics();
        let obj = test_object();
        let unc = UncertaintyModel {
            scale: 0.4,
            floor: 0.01,
        };
        let d = 3.0;
        let bbox = BoundingBox::new(intr.cx, intr.cy, intr.focal * obj.width / d, 40.0);
        let m = localize_from_box(&bbox, &Rot3::identity(), &intr, &obj, 0.9, &unc);
        assert_relative_eq!(m.position.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(m.position.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(m.position.z, -d, epsilon = 1e-12);
    }

    #[test]
    fn covariance_endpoints() {
        let intr = test_intrinsics();
        let obj = test_object();
        let unc = UncertaintyModel {
            scale: 0.4,
            floor: 0.01,
        };
        let bbox = BoundingBox::new(intr.cx, intr.cy, 80.0, 60.0);
        let full = localize_from_box(&bbox, &Rot3::identity(), &intr, &obj, 1.0, &unc);
        assert_relative_eq!(full.covariance, Matrix3::identity() * 0.01, epsilon = 1e-15);
        let zero = localize_from_box(&bbox, &Rot3::identity(), &intr, &obj, 0.0, &unc);
        assert_relative_eq!(zero.covariance, Matrix3::identity() * 0.41, epsilon = 1e-15);
    }

    #[test]
    fn widened_box_shrinks_depth_by_inverse_factor() {
        let intr = test_intrinsics();
        let obj = test_object();
        let unc = UncertaintyModel {
            scale: 0.4,
            floor: 0.01,
        };
        let bbox = BoundingBox::new(500.0, 380.0, 90.0, 70.0);
        let nominal = localize_from_box(&bbox, &Rot3::identity(), &intr, &obj, 0.9, &unc);
        let q = 0.30;
        let wide = BoundingBox::new(bbox.cx, bbox.cy, bbox.w * (1.0 + q), bbox.h);
        let perturbed = localize_from_box(&wide, &Rot3::identity(), &intr, &obj, 0.9, &unc);
        // Oracle: re-evaluating the depth formula with the perturbed width
        // scales the whole ray by 1/(1+q).
        assert_relative_eq!(
            perturbed.position.norm(),
            nominal.position.norm() / (1.0 + q),
            epsilon = 1e-12
        );
    }

    #[test]
    fn render_localize_round_trip_over_random_poses() {
        let intr = test_intrinsics();
        let obj = test_object();
        let unc = UncertaintyModel {
            scale: 0.4,
            floor: 0.01,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 100 {
            let r_cw = random_rotation(&mut rng);
            let depth = rng.random_range(0.5..6.0);
            let x_norm = rng.random_range(-0.8..0.8);
            let y_norm = rng.random_range(-0.6..0.6);
            let rel = -(r_cw.inverse() * (Vector3::new(x_norm, y_norm, 1.0) * depth));
            let bbox = match render_box(&rel, &r_cw, &intr, &obj) {
                Ok(b) => b,
                Err(_) => continue,
            };
            if bbox.in_frame_fraction(&intr) < 1.0 {
                continue;
            }
            let m = localize_from_box(&bbox, &r_cw, &intr, &obj, 0.9, &unc);
            assert!(
                (m.position - rel).norm() < 1e-9,
                "round trip error {} at depth {}",
                (m.position - rel).norm(),
                depth
            );
            checked += 1;
        }
    }

    #[test]
    fn frame_composition_identity() {
        // Camera-from-world must equal mount^T * attitude^T for any pair.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let attitude = random_rotation(&mut rng);
            let mount = random_rotation(&mut rng);
            let composed = camera_from_world(&attitude, &mount);
            let direct = mount.matrix().transpose() * attitude.matrix().transpose();
            assert_relative_eq!(composed.matrix(), &direct, epsilon = 1e-12);
        }
        assert!(validate_rotation(forward_mount().matrix()));
    }

    proptest! {
        #[test]
        fn corner_center_bijection(cx in -500.0..1500.0, cy in -500.0..1500.0,
                                   w in 1e-3..800.0, h in 1e-3..800.0) {
            let b = BoundingBox::new(cx, cy, w, h);
            let [x1, y1, x2, y2] = b.corners();
            let back = BoundingBox::from_corners(x1, y1, x2, y2);
            prop_assert!((back.cx - b.cx).abs() < 1e-9);
            prop_assert!((back.cy - b.cy).abs() < 1e-9);
            prop_assert!((back.w - b.w).abs() < 1e-9);
            prop_assert!((back.h - b.h).abs() < 1e-9);
        }

        #[test]
        fn uncertainty_affine_and_decreasing_in_confidence(
            pr1 in 0.0f64..1.0, pr2 in 0.0f64..1.0, scale in 1e-6f64..10.0, floor in 1e-9f64..1.0,
        ) {
            let unc = UncertaintyModel { scale, floor };
            let (lo, hi) = if pr1 <= pr2 { (pr1, pr2) } else { (pr2, pr1) };
            prop_assert!(unc.variance(hi) <= unc.variance(lo) + 1e-15);
            let mid = (lo + hi) / 2.0;
            let interp = (unc.variance(lo) + unc.variance(hi)) / 2.0;
            prop_assert!((unc.variance(mid) - interp).abs() < 1e-12);
        }
    }
}
