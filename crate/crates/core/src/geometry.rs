//! Planar poses, SE(2) composition and the pinhole camera model used to turn
//! image-space detections into map-frame ground points.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
    #[error("depth {depth} m is below the camera mount height {mount_height} m")]
    DegenerateDepth { depth: f64, mount_height: f64 },
    #[error("target coincides with the robot position")]
    CoincidentPoint,
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// A point on the ground plane, map frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroundPoint {
    pub x: f64,
    pub y: f64,
}

impl GroundPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &GroundPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(&self, other: &GroundPoint) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector in the same direction, `None` for the zero vector.
    pub fn unit(&self) -> Option<GroundPoint> {
        let n = self.norm();
        (n > 0.0).then(|| GroundPoint::new(self.x / n, self.y / n))
    }
}

impl Add for GroundPoint {
    type Output = GroundPoint;
    fn add(self, rhs: GroundPoint) -> GroundPoint {
        GroundPoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for GroundPoint {
    type Output = GroundPoint;
    fn sub(self, rhs: GroundPoint) -> GroundPoint {
        GroundPoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for GroundPoint {
    type Output = GroundPoint;
    fn mul(self, k: f64) -> GroundPoint {
        GroundPoint::new(self.x * k, self.y * k)
    }
}

impl fmt::Display for GroundPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Planar pose. The heading is kept in (−π, π] by every constructor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    x: f64,
    y: f64,
    theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn position(&self) -> GroundPoint {
        GroundPoint::new(self.x, self.y)
    }

    /// Unit vector along the heading.
    pub fn heading(&self) -> GroundPoint {
        GroundPoint::new(self.theta.cos(), self.theta.sin())
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self::new(self.x, self.y, theta)
    }

    pub fn inverse(&self) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Maps a point expressed in this pose's frame into the parent frame.
    pub fn transform_point(&self, local: GroundPoint) -> GroundPoint {
        let (s, c) = self.theta.sin_cos();
        GroundPoint::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
        )
    }

    /// Expresses a parent-frame point in this pose's frame.
    pub fn to_local(&self, point: GroundPoint) -> GroundPoint {
        let (s, c) = self.theta.sin_cos();
        let dx = point.x - self.x;
        let dy = point.y - self.y;
        GroundPoint::new(c * dx + s * dy, -s * dx + c * dy)
    }
}

impl fmt::Display for Pose2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3}, {:.3} rad)", self.x, self.y, self.theta)
    }
}

/// `base ∘ offset`: the offset's translation is rotated into the base frame.
pub fn compose(base: Pose2D, offset: Pose2D) -> Pose2D {
    let p = base.transform_point(offset.position());
    Pose2D::new(p.x, p.y, base.theta + offset.theta)
}

/// Ideal pinhole RGB-D camera mounted on the robot, zero tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub image_width: f64,
    pub image_height: f64,
    pub hfov: f64,
    pub vfov: f64,
    pub mount_height: f64,
    /// Camera position ahead of the robot base along the heading.
    pub forward_offset: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            image_width: 640.0,
            image_height: 480.0,
            hfov: 1.5,
            vfov: 1.2,
            mount_height: 0.3,
            forward_offset: 0.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: &str| Err(GeometryError::InvalidCamera(msg.to_string()));
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return bad("image dimensions must be positive");
        }
        if !(self.hfov > 0.0 && self.hfov < PI) {
            return bad("hfov must lie in (0, pi)");
        }
        if !(self.vfov > 0.0 && self.vfov < PI) {
            return bad("vfov must lie in (0, pi)");
        }
        if !(self.mount_height.is_finite() && self.mount_height >= 0.0) {
            return bad("mount_height must be non-negative");
        }
        if !self.forward_offset.is_finite() {
            return bad("forward_offset must be finite");
        }
        Ok(())
    }

    /// Horizontal focal length in pixels.
    pub fn focal_u(&self) -> f64 {
        self.image_width / (2.0 * (self.hfov / 2.0).tan())
    }

    pub fn focal_v(&self) -> f64 {
        self.image_height / (2.0 * (self.vfov / 2.0).tan())
    }

    /// Pose of the optical centre projected on the ground.
    pub fn camera_pose(&self, robot: Pose2D) -> Pose2D {
        compose(robot, Pose2D::new(self.forward_offset, 0.0, 0.0))
    }

    /// Closest visible ground distance straight ahead of the camera.
    pub fn min_ground_range(&self) -> f64 {
        self.mount_height / (self.vfov / 2.0).tan()
    }

    /// Inverse model: where a ground point lands in the image.
    ///
    /// Returns `None` when the point is outside the frustum. The box is
    /// centred on the projected point; `object_size` sets its metric width.
    pub fn render(
        &self,
        robot: Pose2D,
        point: GroundPoint,
        object_size: f64,
        confidence: f64,
    ) -> Option<BoundingBox> {
        let local = self.camera_pose(robot).to_local(point);
        if local.x <= 0.0 {
            return None;
        }
        let u_c = self.image_width / 2.0 - self.focal_u() * local.y / local.x;
        let v_c = self.image_height / 2.0 + self.focal_v() * self.mount_height / local.x;
        if !(u_c > 0.0 && u_c < self.image_width && v_c < self.image_height) {
            return None;
        }
        let half_u = (self.focal_u() * object_size / (2.0 * local.x))
            .min(u_c)
            .min(self.image_width - u_c);
        let half_v = (self.focal_v() * object_size / (2.0 * local.x))
            .min(v_c)
            .min(self.image_height - v_c);
        if half_u <= 0.0 || half_v <= 0.0 {
            return None;
        }
        let depth = (local.x * local.x + local.y * local.y + self.mount_height.powi(2)).sqrt();
        Some(BoundingBox {
            u_min: u_c - half_u,
            v_min: v_c - half_v,
            u_max: u_c + half_u,
            v_max: v_c + half_v,
            confidence: confidence.clamp(0.0, 1.0),
            depth,
        })
    }
}

/// Detector output: pixel box, confidence, and depth at the box centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
    pub confidence: f64,
    pub depth: f64,
}

impl BoundingBox {
    pub fn u_center(&self) -> f64 {
        (self.u_min + self.u_max) / 2.0
    }

    pub fn v_center(&self) -> f64 {
        (self.v_min + self.v_max) / 2.0
    }

    pub fn validate(&self, cam: &CameraModel) -> Result<(), GeometryError> {
        let bad = |msg: &str| Err(GeometryError::InvalidBox(msg.to_string()));
        if !(self.u_min >= 0.0 && self.u_min < self.u_max && self.u_max <= cam.image_width) {
            return bad("u extent outside the image or empty");
        }
        if !(self.v_min >= 0.0 && self.v_min < self.v_max && self.v_max <= cam.image_height) {
            return bad("v extent outside the image or empty");
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return bad("confidence outside [0, 1]");
        }
        if !(self.depth > 0.0 && self.depth.is_finite()) {
            return bad("depth must be positive");
        }
        Ok(())
    }
}

/// Horizontal bearing of the box centre relative to the optical axis,
/// counterclockwise (left) positive.
pub fn bearing_from_pixel(bbox: &BoundingBox, cam: &CameraModel) -> f64 {
    let u_c = bbox.u_center();
    ((0.5 - u_c / cam.image_width) * 2.0 * (cam.hfov / 2.0).tan()).atan()
}

/// Ground-plane position of a detection given the robot pose at capture time.
pub fn project_detection(
    robot: Pose2D,
    bbox: &BoundingBox,
    cam: &CameraModel,
) -> Result<GroundPoint, GeometryError> {
    if bbox.depth < cam.mount_height {
        return Err(GeometryError::DegenerateDepth {
            depth: bbox.depth,
            mount_height: cam.mount_height,
        });
    }
    let ground_range = (bbox.depth * bbox.depth - cam.mount_height * cam.mount_height)
        .max(0.0)
        .sqrt();
    let bearing = bearing_from_pixel(bbox, cam);
    let cam_pose = cam.camera_pose(robot);
    let dir = cam_pose.theta() + bearing;
    Ok(GroundPoint::new(
        cam_pose.x() + ground_range * dir.cos(),
        cam_pose.y() + ground_range * dir.sin(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Ahead,
}

pub fn left_or_right(robot: Pose2D, target: GroundPoint) -> Side {
    let d = target - robot.position();
    let h = robot.heading();
    let cross = h.x * d.y - h.y * d.x;
    if cross.abs() < 1e-12 {
        Side::Ahead
    } else if cross > 0.0 {
        Side::Left
    } else {
        Side::Right
    }
}

/// Shortest signed turn that makes the robot face `target`.
pub fn angle_to(robot: Pose2D, target: GroundPoint) -> Result<f64, GeometryError> {
    let d = target - robot.position();
    if d.norm() < 1e-9 {
        return Err(GeometryError::CoincidentPoint);
    }
    Ok(normalize_angle(d.y.atan2(d.x) - robot.theta()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn cam(hfov: f64) -> CameraModel {
        CameraModel {
            image_width: 640.0,
            image_height: 480.0,
            hfov,
            vfov: 1.2,
            mount_height: 0.0,
            forward_offset: 0.0,
        }
    }

    fn centered_box(u_c: f64, depth: f64) -> BoundingBox {
        BoundingBox {
            u_min: u_c - 1.0,
            v_min: 300.0,
            u_max: u_c + 1.0,
            v_max: 320.0,
            confidence: 0.9,
            depth,
        }
    }

    #[test]
    fn normalize_maps_into_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-FRAC_PI_2), -FRAC_PI_2);
        assert_eq!(normalize_angle(0.0), 0.0);
    }

    #[test]
    fn compose_examples() {
        let p = compose(Pose2D::identity(), Pose2D::new(1.0, 0.0, 0.0));
        assert_eq!(p, Pose2D::new(1.0, 0.0, 0.0));

        let p = compose(Pose2D::new(0.0, 0.0, FRAC_PI_2), Pose2D::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(p.x(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.theta(), FRAC_PI_2);

        // rotation matrix oracle: [c -s; s c] * (√2, 0) = (1, 1)
        let p = compose(Pose2D::new(2.0, 3.0, FRAC_PI_4), Pose2D::new(SQRT_2, 0.0, 0.0));
        assert_abs_diff_eq!(p.x(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.theta(), FRAC_PI_4);
    }

    #[test]
    fn bearing_examples() {
        let c = cam(FRAC_PI_2);
        assert_eq!(bearing_from_pixel(&centered_box(320.0, 1.0), &c), 0.0);
        assert_abs_diff_eq!(
            bearing_from_pixel(&centered_box(480.0, 1.0), &c),
            (-0.5f64).atan(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(-0.4636476090008061, (-0.5f64).atan(), epsilon = 1e-15);
        let edge = BoundingBox {
            u_min: 0.0,
            u_max: 0.0,
            ..centered_box(0.0, 1.0)
        };
        assert_abs_diff_eq!(bearing_from_pixel(&edge, &c), FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn project_straight_ahead_and_rotated() {
        let c = cam(1.2);
        let b = centered_box(320.0, 2.0);
        let p = project_detection(Pose2D::identity(), &b, &c).unwrap();
        assert_abs_diff_eq!(p.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);

        let p = project_detection(Pose2D::new(0.0, 0.0, FRAC_PI_2), &b, &c).unwrap();
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn project_rejects_depth_below_mount() {
        let c = CameraModel {
            mount_height: 0.3,
            ..cam(1.2)
        };
        let err = project_detection(Pose2D::identity(), &centered_box(320.0, 0.2), &c);
        assert!(matches!(err, Err(GeometryError::DegenerateDepth { .. })));
    }

    #[test]
    fn project_bearing_quarter_turn_round_trip() {
        // Robot at (1,1), trash planted at 45° left with mount height h.
        let h = 0.4;
        let c = CameraModel {
            hfov: 2.0,
            mount_height: h,
            ..cam(2.0)
        };
        let robot = Pose2D::new(1.0, 1.0, 0.0);
        let truth = GroundPoint::new(1.0 + 2.0 * h, 1.0 + 2.0 * h);
        let b = c.render(robot, truth, 0.1, 1.0).unwrap();
        assert_abs_diff_eq!(b.depth, 3.0 * h, epsilon = 1e-12);
        assert_abs_diff_eq!(bearing_from_pixel(&b, &c), FRAC_PI_4, epsilon = 1e-12);
        let p = project_detection(robot, &b, &c).unwrap();
        assert!(p.distance(&truth) < 1e-9);
    }

    #[test]
    fn side_examples() {
        let r = Pose2D::identity();
        assert_eq!(left_or_right(r, GroundPoint::new(1.0, 1.0)), Side::Left);
        assert_eq!(left_or_right(r, GroundPoint::new(1.0, -1.0)), Side::Right);
        assert_eq!(left_or_right(r, GroundPoint::new(5.0, 0.0)), Side::Ahead);
    }

    #[test]
    fn angle_to_examples() {
        let a = angle_to(Pose2D::identity(), GroundPoint::new(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(a, FRAC_PI_2);
        let a = angle_to(Pose2D::new(0.0, 0.0, PI), GroundPoint::new(1.0, 0.0)).unwrap();
        assert_eq!(a, PI);
        assert_eq!(
            angle_to(Pose2D::new(1.0, 2.0, 0.3), GroundPoint::new(1.0, 2.0)),
            Err(GeometryError::CoincidentPoint)
        );
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::default().validate().is_ok());
        assert!(CameraModel { hfov: PI, ..Default::default() }.validate().is_err());
        assert!(CameraModel { vfov: 0.0, ..Default::default() }.validate().is_err());
    }

    fn pose() -> impl Strategy<Value = Pose2D> {
        (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64).prop_map(|(x, y, t)| Pose2D::new(x, y, t))
    }

    proptest! {
        #[test]
        fn theta_always_normalized(p in pose(), q in pose()) {
            for r in [p, q, compose(p, q), p.inverse()] {
                prop_assert!(r.theta() > -PI && r.theta() <= PI);
            }
        }

        #[test]
        fn compose_with_inverse_is_identity(p in pose()) {
            let id = compose(p, p.inverse());
            prop_assert!(id.x().abs() < 1e-12 && id.y().abs() < 1e-12 && id.theta().abs() < 1e-12);
        }

        #[test]
        fn bearing_is_odd_about_midline(u in 1.0..639.0f64, hfov in 0.1..3.0f64) {
            let c = cam(hfov);
            let a = bearing_from_pixel(&centered_box(u, 1.0), &c);
            let b = bearing_from_pixel(&centered_box(640.0 - u, 1.0), &c);
            prop_assert!((a + b).abs() < 1e-12);
        }

        #[test]
        fn side_is_scale_invariant(p in pose(), dx in -10.0..10.0f64, dy in -10.0..10.0f64, k in 0.01..100.0f64) {
            prop_assume!(dx.abs() + dy.abs() > 1e-3);
            let t1 = p.position() + GroundPoint::new(dx, dy);
            let t2 = p.position() + GroundPoint::new(dx * k, dy * k);
            let (s1, s2) = (left_or_right(p, t1), left_or_right(p, t2));
            prop_assume!(s1 != Side::Ahead && s2 != Side::Ahead);
            prop_assert_eq!(s1, s2);
        }

        #[test]
        fn angle_to_matches_atan2_difference(p in pose(), dx in -10.0..10.0f64, dy in -10.0..10.0f64) {
            prop_assume!(dx.hypot(dy) > 1e-6);
            let t = p.position() + GroundPoint::new(dx, dy);
            let a = angle_to(p, t).unwrap();
            let direct = (t.y - p.y()).atan2(t.x - p.x()) - p.theta();
            let mut oracle = direct;
            while oracle > PI { oracle -= TAU; }
            while oracle <= -PI { oracle += TAU; }
            prop_assert!((a - oracle).abs() < 1e-12);
        }
    }
}
