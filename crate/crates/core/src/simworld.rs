//! Seeded 2D world: unicycle robot with odometry drift, synthetic RGB-D
//! sensing and trash detection, the aerial survey, a lossy delayed message
//! channel, and ground-truth collection.
//!
//! All randomness for one run comes from ChaCha streams derived from the
//! world seed, consumed in a fixed order, so a seed reproduces a run bit for
//! bit.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use crate::clusterfilter::RawDetection;
use crate::geometry::{BoundingBox, CameraModel, GroundPoint, Pose2D};
use crate::gridmap::Beam;
use crate::pickup::MotionCommand;

/// Heaviest item the collection mechanism can carry, kg.
pub const MAX_TRASH_MASS: f64 = 0.64;

/// Independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Layout = 1,
    Survey = 2,
    Ground = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, WorldError> {
    Err(WorldError::Invalid(msg.into()))
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: GroundPoint,
    pub max: GroundPoint,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            min: GroundPoint::new(x0.min(x1), y0.min(y1)),
            max: GroundPoint::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: GroundPoint) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    /// Euclidean distance from a point to the rectangle (0 inside).
    pub fn distance_to(&self, p: GroundPoint) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    pub fn expanded(&self, margin: f64) -> Rect {
        Rect::new(
            self.min.x - margin,
            self.min.y - margin,
            self.max.x + margin,
            self.max.y + margin,
        )
    }

    /// Parameter range `[t0, t1]` of `a + t (b − a)` inside the rectangle.
    fn clip(&self, a: GroundPoint, b: GroundPoint) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for (p, d, lo, hi) in [
            (a.x, b.x - a.x, self.min.x, self.max.x),
            (a.y, b.y - a.y, self.min.y, self.max.y),
        ] {
            if d == 0.0 {
                if p < lo || p > hi {
                    return None;
                }
            } else {
                let (u, v) = ((lo - p) / d, (hi - p) / d);
                t0 = t0.max(u.min(v));
                t1 = t1.min(u.max(v));
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }

    /// Whether the open segment passes through the interior.
    pub fn blocks_segment(&self, a: GroundPoint, b: GroundPoint) -> bool {
        match self.clip(a, b) {
            Some((t0, t1)) => t0.max(0.0) < t1.min(1.0) - 1e-12,
            None => false,
        }
    }

    /// Distance along the ray to its first entry into the rectangle.
    pub fn ray_entry(&self, origin: GroundPoint, dir: GroundPoint) -> Option<f64> {
        let (t0, t1) = self.clip(origin, origin + dir)?;
        (t1 >= 0.0).then_some(t0.max(0.0))
    }

    /// Distance along the ray until it leaves the rectangle.
    pub fn ray_exit(&self, origin: GroundPoint, dir: GroundPoint) -> Option<f64> {
        let (_, t1) = self.clip(origin, origin + dir)?;
        (t1 >= 0.0).then_some(t1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrashSpec {
    pub position: GroundPoint,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub arena: Rect,
    pub obstacles: Vec<Rect>,
    pub trash: Vec<TrashSpec>,
    pub seed: u64,
    pub dt: f64,
    pub robot_radius: f64,
    /// Distance of the brush axis ahead of the robot base.
    pub brush_offset: f64,
    /// Apparent size of a trash item, for rendering boxes.
    pub object_size: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            arena: Rect::new(0.0, 0.0, 8.0, 6.0),
            obstacles: Vec::new(),
            trash: Vec::new(),
            seed: 0,
            dt: 0.05,
            robot_radius: 0.18,
            brush_offset: 0.15,
            object_size: 0.2,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.arena.width() > 0.0 && self.arena.height() > 0.0) {
            return invalid("arena must have positive extent");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid("dt must be positive");
        }
        if !(self.robot_radius >= 0.0) {
            return invalid("robot_radius must be non-negative");
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !self.arena.contains_rect(o) {
                return invalid(format!("obstacle {i} lies outside the arena"));
            }
        }
        for (i, t) in self.trash.iter().enumerate() {
            if !self.arena.contains(t.position) {
                return invalid(format!("trash {i} lies outside the arena"));
            }
            if !(t.mass > 0.0 && t.mass <= MAX_TRASH_MASS) {
                return invalid(format!("trash {i} mass must lie in (0, {MAX_TRASH_MASS}] kg"));
            }
        }
        Ok(())
    }

    /// Whether a robot disc centred at `p` fits in free space.
    pub fn pose_is_free(&self, p: GroundPoint) -> bool {
        let r = self.robot_radius;
        p.x >= self.arena.min.x + r
            && p.x <= self.arena.max.x - r
            && p.y >= self.arena.min.y + r
            && p.y <= self.arena.max.y - r
            && self.obstacles.iter().all(|o| o.distance_to(p) >= r)
    }

    /// Exact ray cast against obstacles and the arena boundary.
    pub fn cast_ray(&self, origin: GroundPoint, angle: f64, max_range: f64) -> f64 {
        let dir = GroundPoint::new(angle.cos(), angle.sin());
        let mut best = self.arena.ray_exit(origin, dir).unwrap_or(0.0);
        for o in &self.obstacles {
            if let Some(t) = o.ray_entry(origin, dir) {
                best = best.min(t);
            }
        }
        best.min(max_range)
    }

    pub fn occluded(&self, a: GroundPoint, b: GroundPoint) -> bool {
        self.obstacles.iter().any(|o| o.blocks_segment(a, b))
    }
}

/// Detection probability `clamp(1 − slope·range, min, max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionProbability {
    pub slope: f64,
    pub min: f64,
    pub max: f64,
}

impl DetectionProbability {
    pub fn at(&self, range: f64) -> f64 {
        (1.0 - self.slope * range).clamp(self.min, self.max)
    }

    pub fn certain() -> Self {
        Self { slope: 0.0, min: 1.0, max: 1.0 }
    }
}

/// Detector confidence: `clamp(base − slope·range + N(0, sigma), 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceModel {
    pub base: f64,
    pub slope: f64,
    pub sigma: f64,
}

impl ConfidenceModel {
    pub fn mean_at(&self, range: f64) -> f64 {
        (self.base - self.slope * range).clamp(0.0, 1.0)
    }
}

/// Every noise and degradation knob of the simulator. The defaults are
/// calibration choices, not measured values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Systematic heading drift per metre driven, rad/m.
    pub odom_heading_bias: f64,
    /// Relative per-step Gaussian error on measured v and omega.
    pub odom_noise_sigma: f64,
    /// Position sigma of a detection at 1 m range, growing linearly with
    /// range. Aerial detections use it unscaled; ground frames apply it to
    /// the depth channel.
    pub detect_pos_sigma: f64,
    /// Horizontal pixel jitter of ground detection boxes.
    pub detect_pixel_sigma: f64,
    pub p_detect: DetectionProbability,
    pub confidence: ConfidenceModel,
    /// Spurious ground-camera detections per second of camera time.
    pub false_positive_rate: f64,
    /// Spurious aerial detections per second of flight.
    pub aerial_false_positive_rate: f64,
    pub detector_latency: f64,
    pub comm_latency: f64,
    pub comm_drop: f64,
    /// Position sigma of a fresh localization fix, metres.
    pub loc_sigma: f64,
    /// Heading sigma of a fresh localization fix, rad.
    pub loc_sigma_theta: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            odom_heading_bias: 0.02,
            odom_noise_sigma: 0.02,
            detect_pos_sigma: 0.15,
            detect_pixel_sigma: 12.0,
            p_detect: DetectionProbability { slope: 0.1, min: 0.3, max: 0.95 },
            confidence: ConfidenceModel { base: 0.95, slope: 0.1, sigma: 0.08 },
            false_positive_rate: 0.05,
            aerial_false_positive_rate: 0.05,
            detector_latency: 0.5,
            comm_latency: 0.1,
            comm_drop: 0.05,
            loc_sigma: 0.05,
            loc_sigma_theta: 0.02,
        }
    }
}

impl NoiseModel {
    /// Perfect sensing and odometry. Latencies are kept.
    pub fn zero() -> Self {
        Self {
            odom_heading_bias: 0.0,
            odom_noise_sigma: 0.0,
            detect_pos_sigma: 0.0,
            detect_pixel_sigma: 0.0,
            p_detect: DetectionProbability::certain(),
            confidence: ConfidenceModel { sigma: 0.0, ..Self::default().confidence },
            false_positive_rate: 0.0,
            aerial_false_positive_rate: 0.0,
            comm_drop: 0.0,
            loc_sigma: 0.0,
            loc_sigma_theta: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let probs = [
            ("p_detect.min", self.p_detect.min),
            ("p_detect.max", self.p_detect.max),
            ("comm_drop", self.comm_drop),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return invalid(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.p_detect.slope < 0.0 {
            return invalid("p_detect.slope must be non-negative");
        }
        let nonneg = [
            ("odom_noise_sigma", self.odom_noise_sigma),
            ("detect_pos_sigma", self.detect_pos_sigma),
            ("detect_pixel_sigma", self.detect_pixel_sigma),
            ("confidence.sigma", self.confidence.sigma),
            ("false_positive_rate", self.false_positive_rate),
            ("aerial_false_positive_rate", self.aerial_false_positive_rate),
            ("detector_latency", self.detector_latency),
            ("comm_latency", self.comm_latency),
            ("loc_sigma", self.loc_sigma),
            ("loc_sigma_theta", self.loc_sigma_theta),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be non-negative"));
            }
        }
        if !self.odom_heading_bias.is_finite() {
            return invalid("odom_heading_bias must be finite");
        }
        Ok(())
    }
}

fn gaussian<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    // always consume one draw so the stream layout does not depend on sigma
    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    z * sigma
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub true_pose: Pose2D,
    pub believed_pose: Pose2D,
    pub mechanism_on: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrashItem {
    pub position: GroundPoint,
    pub mass: f64,
    pub collected: bool,
}

/// One camera frame of detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub capture_time: f64,
    pub boxes: Vec<BoundingBox>,
}

/// Exact unicycle motion over `dt` at constant `(v, omega)`.
pub fn unicycle(pose: Pose2D, v: f64, omega: f64, dt: f64) -> Pose2D {
    let th = pose.theta();
    if omega.abs() < 1e-12 {
        Pose2D::new(pose.x() + v * dt * th.cos(), pose.y() + v * dt * th.sin(), th)
    } else {
        let th1 = th + omega * dt;
        let k = v / omega;
        Pose2D::new(
            pose.x() + k * (th1.sin() - th.sin()),
            pose.y() - k * (th1.cos() - th.cos()),
            th1,
        )
    }
}

fn point_segment_distance(p: GroundPoint, a: GroundPoint, b: GroundPoint) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(&ab);
    if len2 == 0.0 {
        return p.distance(&a);
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    p.distance(&(a + ab * t))
}

#[derive(Debug, Clone)]
pub struct World {
    cfg: WorldConfig,
    noise: NoiseModel,
    brush_halfwidth: f64,
    robot: RobotState,
    trash: Vec<TrashItem>,
    time: f64,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(
        cfg: WorldConfig,
        noise: NoiseModel,
        start: Pose2D,
        brush_halfwidth: f64,
    ) -> Result<Self, WorldError> {
        cfg.validate()?;
        noise.validate()?;
        if !cfg.pose_is_free(start.position()) {
            return invalid("robot start pose collides with an obstacle or the arena wall");
        }
        let trash = cfg
            .trash
            .iter()
            .map(|t| TrashItem { position: t.position, mass: t.mass, collected: false })
            .collect();
        let rng = stream_rng(cfg.seed, Stream::Ground);
        Ok(Self {
            cfg,
            noise,
            brush_halfwidth,
            robot: RobotState { true_pose: start, believed_pose: start, mechanism_on: false },
            trash,
            time: 0.0,
            rng,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn trash(&self) -> &[TrashItem] {
        &self.trash
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn collected_count(&self) -> usize {
        self.trash.iter().filter(|t| t.collected).count()
    }

    /// Places the robot, with a perfect belief. Used by mapping sweeps and
    /// trial setups.
    pub fn teleport(&mut self, pose: Pose2D) {
        self.robot.true_pose = pose;
        self.robot.believed_pose = pose;
    }

    /// Resets the believed pose to a fresh map-based fix around the truth.
    pub fn relocalize(&mut self) {
        let t = self.robot.true_pose;
        let (ex, ey) = (gaussian(&mut self.rng, self.noise.loc_sigma), gaussian(&mut self.rng, self.noise.loc_sigma));
        let eth = gaussian(&mut self.rng, self.noise.loc_sigma_theta);
        self.robot.believed_pose = Pose2D::new(t.x() + ex, t.y() + ey, t.theta() + eth);
    }

    /// Advances the world by one step under `cmd`.
    pub fn step(&mut self, cmd: MotionCommand, dt: f64) {
        let before = self.robot.true_pose;
        let mut next = unicycle(before, cmd.v, cmd.omega, dt);
        let mut v_realized = cmd.v;
        if !self.cfg.pose_is_free(next.position()) {
            // stopped at contact; rotation in place is still possible
            next = before.with_theta(next.theta());
            v_realized = 0.0;
        }
        self.robot.true_pose = next;

        let z_v = gaussian(&mut self.rng, self.noise.odom_noise_sigma);
        let z_w = gaussian(&mut self.rng, self.noise.odom_noise_sigma);
        let v_meas = v_realized * (1.0 + z_v);
        let w_meas = cmd.omega * (1.0 + z_w) + self.noise.odom_heading_bias * v_realized.abs();
        self.robot.believed_pose = unicycle(self.robot.believed_pose, v_meas, w_meas, dt);

        self.robot.mechanism_on = cmd.mechanism_on;
        if cmd.mechanism_on {
            let off = self.cfg.brush_offset;
            let a = before.position() + before.heading() * off;
            let b = next.position() + next.heading() * off;
            for item in self.trash.iter_mut().filter(|t| !t.collected) {
                if point_segment_distance(item.position, a, b) <= self.brush_halfwidth {
                    item.collected = true;
                }
            }
        }
        self.time += dt;
    }

    /// 2D range scan from the true pose.
    pub fn range_scan(&self, beams: usize, fov: f64, max_range: f64) -> Vec<Beam> {
        scan_from(&self.cfg, self.robot.true_pose, beams, fov, max_range)
    }

    /// One detector frame from the true pose: a box for each visible item
    /// that the detector picks up, plus spurious boxes.
    pub fn capture_frame(&mut self, cam: &CameraModel, frame_period: f64) -> Frame {
        let pose = self.robot.true_pose;
        let cam_pos = cam.camera_pose(pose).position();
        let mut boxes = Vec::new();
        for i in 0..self.trash.len() {
            let item = self.trash[i];
            if item.collected {
                continue;
            }
            if cam.render(pose, item.position, self.cfg.object_size, 1.0).is_none()
                || self.cfg.occluded(cam_pos, item.position)
            {
                continue;
            }
            let range = cam_pos.distance(&item.position);
            let hit: f64 = self.rng.random();
            let du = gaussian(&mut self.rng, self.noise.detect_pixel_sigma);
            let dd = gaussian(&mut self.rng, self.noise.detect_pos_sigma * range);
            let conf = (self.noise.confidence.mean_at(range)
                + gaussian(&mut self.rng, self.noise.confidence.sigma))
            .clamp(0.0, 1.0);
            if hit >= self.noise.p_detect.at(range) {
                continue;
            }
            if let Some(mut b) = cam.render(pose, item.position, self.cfg.object_size, conf) {
                b.u_min += du;
                b.u_max += du;
                b.depth = (b.depth + dd).max(cam.mount_height);
                boxes.push(b);
            }
        }
        let lambda = self.noise.false_positive_rate * frame_period;
        if lambda > 0.0 {
            let n = Poisson::new(lambda).expect("positive rate").sample(&mut self.rng) as usize;
            let (w, h) = (cam.image_width, cam.image_height);
            for _ in 0..n {
                let u = self.rng.random_range(0.05 * w..0.95 * w);
                let v = self.rng.random_range(0.55 * h..0.95 * h);
                let depth = self.rng.random_range(cam.mount_height + 0.2..4.0);
                let confidence: f64 = self.rng.random();
                boxes.push(BoundingBox {
                    u_min: u - 10.0,
                    v_min: v - 10.0,
                    u_max: u + 10.0,
                    v_max: v + 10.0,
                    confidence,
                    depth,
                });
            }
        }
        Frame { capture_time: self.time, boxes }
    }

    /// Range scan plus detector frame.
    pub fn sense(
        &mut self,
        cam: &CameraModel,
        frame_period: f64,
        beams: usize,
        max_range: f64,
    ) -> (Vec<Beam>, Frame) {
        let scan = self.range_scan(beams, cam.hfov, max_range);
        (scan, self.capture_frame(cam, frame_period))
    }

    /// Trash positions, obstacles and collected flags as plain text.
    pub fn write_ground_truth<W: Write>(&self, mut out: W) -> io::Result<()> {
        let a = self.cfg.arena;
        writeln!(out, "arena {} {} {} {}", a.min.x, a.min.y, a.max.x, a.max.y)?;
        for o in &self.cfg.obstacles {
            writeln!(out, "obstacle {} {} {} {}", o.min.x, o.min.y, o.max.x, o.max.y)?;
        }
        for t in &self.trash {
            writeln!(
                out,
                "trash {} {} {} {}",
                t.position.x,
                t.position.y,
                t.mass,
                u8::from(t.collected)
            )?;
        }
        Ok(())
    }
}

/// Exact range scan from `pose`. A full-circle `fov` spaces beams evenly
/// from −π; otherwise the first and last beams sit on the field edges.
pub fn scan_from(cfg: &WorldConfig, pose: Pose2D, beams: usize, fov: f64, max_range: f64) -> Vec<Beam> {
    (0..beams)
        .map(|i| {
            let bearing = if beams == 1 {
                0.0
            } else if (fov - std::f64::consts::TAU).abs() < 1e-12 {
                -std::f64::consts::PI + fov * i as f64 / beams as f64
            } else {
                -fov / 2.0 + fov * i as f64 / (beams - 1) as f64
            };
            let range = cfg.cast_ray(pose.position(), pose.theta() + bearing, max_range);
            Beam { bearing, range, max_range }
        })
        .collect()
}

/// In-process link with a fixed delivery delay and independent drops.
#[derive(Debug, Clone)]
pub struct MessageChannel<T> {
    latency: f64,
    drop_prob: f64,
    queue: VecDeque<(f64, T)>,
    sent: usize,
    dropped: usize,
}

impl<T> MessageChannel<T> {
    pub fn new(latency: f64, drop_prob: f64) -> Self {
        Self { latency, drop_prob, queue: VecDeque::new(), sent: 0, dropped: 0 }
    }

    pub fn send<R: Rng>(&mut self, now: f64, msg: T, rng: &mut R) {
        self.sent += 1;
        if self.drop_prob > 0.0 && rng.random::<f64>() < self.drop_prob {
            self.dropped += 1;
            return;
        }
        let ready = now + self.latency;
        // keep delivery order even if latency were ever made variable
        let pos = self.queue.partition_point(|(t, _)| *t <= ready);
        self.queue.insert(pos, (ready, msg));
    }

    /// Enqueues without a drop draw, for lossless links.
    pub fn push(&mut self, now: f64, msg: T) {
        self.sent += 1;
        let ready = now + self.latency;
        let pos = self.queue.partition_point(|(t, _)| *t <= ready);
        self.queue.insert(pos, (ready, msg));
    }

    /// Every message whose delivery time is at or before `now`.
    pub fn recv(&mut self, now: f64) -> Vec<T> {
        let mut out = Vec::new();
        while self.queue.front().is_some_and(|(t, _)| *t <= now + 1e-9) {
            out.push(self.queue.pop_front().expect("non-empty").1);
        }
        out
    }

    /// Drains everything, with delivery times.
    pub fn drain_all(&mut self) -> Vec<(f64, T)> {
        self.queue.drain(..).collect()
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn sent(&self) -> usize {
        self.sent
    }

    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn clear(&mut self) {
        self.queue.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurveyConfig {
    pub lane_spacing: f64,
    /// Side of the square ground footprint of one aerial frame.
    pub footprint: f64,
    pub frame_spacing: f64,
    pub speed: f64,
    pub altitude: f64,
}

impl Default for SurveyConfig {
    fn default() -> Self {
        Self { lane_spacing: 1.0, footprint: 2.0, frame_spacing: 0.5, speed: 1.0, altitude: 3.0 }
    }
}

impl SurveyConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        for (name, v) in [
            ("lane_spacing", self.lane_spacing),
            ("footprint", self.footprint),
            ("frame_spacing", self.frame_spacing),
            ("speed", self.speed),
            ("altitude", self.altitude),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("survey.{name} must be positive"));
            }
        }
        Ok(())
    }

    /// Frame centres and capture times of the boustrophedon pass.
    pub fn frames(&self, arena: &Rect) -> Vec<(f64, GroundPoint)> {
        let mut out = Vec::new();
        let n_cols = (arena.width() / self.frame_spacing).floor() as usize;
        let mut t = 0.0;
        let mut prev: Option<GroundPoint> = None;
        let mut lane = 0usize;
        loop {
            let y = arena.min.y + self.lane_spacing * (lane as f64 + 0.5);
            if y >= arena.max.y {
                break;
            }
            for j in 0..=n_cols {
                let k = if lane.is_multiple_of(2) { j } else { n_cols - j };
                let c = GroundPoint::new(arena.min.x + k as f64 * self.frame_spacing, y);
                if let Some(p) = prev {
                    t += p.distance(&c) / self.speed;
                }
                out.push((t, c));
                prev = Some(c);
            }
            lane += 1;
        }
        out
    }

    pub fn covers(&self, centre: GroundPoint, p: GroundPoint) -> bool {
        let h = self.footprint / 2.0;
        (p.x - centre.x).abs() <= h && (p.y - centre.y).abs() <= h
    }
}

/// Simulates the drone pass and returns the detections the ground robot
/// receives, in delivery order, paired with their delivery times.
pub fn aerial_survey<R: Rng>(
    cfg: &WorldConfig,
    survey: &SurveyConfig,
    noise: &NoiseModel,
    rng: &mut R,
) -> Vec<(f64, RawDetection)> {
    let mut link = MessageChannel::new(noise.comm_latency, noise.comm_drop);
    let p_hit = noise.p_detect.at(survey.altitude);
    let frame_interval = survey.frame_spacing / survey.speed;
    let fp_lambda = noise.aerial_false_positive_rate * frame_interval;
    let half = survey.footprint / 2.0;
    for (t, centre) in survey.frames(&cfg.arena) {
        for item in &cfg.trash {
            if !survey.covers(centre, item.position) {
                continue;
            }
            let hit: f64 = rng.random();
            let noisy = item.position
                + GroundPoint::new(
                    gaussian(rng, noise.detect_pos_sigma),
                    gaussian(rng, noise.detect_pos_sigma),
                );
            let confidence = (noise.confidence.mean_at(survey.altitude)
                + gaussian(rng, noise.confidence.sigma))
            .clamp(0.0, 1.0);
            if hit < p_hit {
                link.send(t, RawDetection { t, point: noisy, confidence }, rng);
            }
        }
        if fp_lambda > 0.0 {
            let n = Poisson::new(fp_lambda).expect("positive rate").sample(rng) as usize;
            for _ in 0..n {
                let x = rng.random_range((centre.x - half).max(cfg.arena.min.x)..(centre.x + half).min(cfg.arena.max.x));
                let y = rng.random_range((centre.y - half).max(cfg.arena.min.y)..(centre.y + half).min(cfg.arena.max.y));
                let confidence: f64 = rng.random();
                link.send(t, RawDetection { t, point: GroundPoint::new(x, y), confidence }, rng);
            }
        }
    }
    link.drain_all()
}

/// Random obstacle and trash layout for a seed. Trash items are placed one
/// after another after all obstacles, so the first `k` items of a layout
/// with `n > k` items match the layout generated with `k` items.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutSpec {
    pub min_obstacles: usize,
    pub max_obstacles: usize,
    pub n_trash: usize,
    pub obstacle_min_side: f64,
    pub obstacle_max_side: f64,
    /// Minimum trash–obstacle clearance.
    pub trash_clearance: f64,
    pub trash_spacing: f64,
    /// Keep-out radius around the robot start.
    pub start_clearance: f64,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self {
            min_obstacles: 4,
            max_obstacles: 8,
            n_trash: 0,
            obstacle_min_side: 0.3,
            obstacle_max_side: 1.0,
            trash_clearance: 0.6,
            trash_spacing: 1.0,
            start_clearance: 1.0,
        }
    }
}

/// Fills `cfg.obstacles` and `cfg.trash` from the layout stream of `cfg.seed`.
/// Every item is reachable from `start` for a robot of `cfg.robot_radius`
/// plus a 0.1 m margin.
pub fn generate_layout(cfg: &mut WorldConfig, spec: &LayoutSpec, start: GroundPoint) {
    let mut rng = stream_rng(cfg.seed, Stream::Layout);
    let arena = cfg.arena;
    let n_obs = if spec.max_obstacles > spec.min_obstacles {
        rng.random_range(spec.min_obstacles..=spec.max_obstacles)
    } else {
        spec.min_obstacles
    };
    for _ in 0..n_obs {
        for _attempt in 0..100 {
            let w = rng.random_range(spec.obstacle_min_side..=spec.obstacle_max_side);
            let h = rng.random_range(spec.obstacle_min_side..=spec.obstacle_max_side);
            let x = rng.random_range(arena.min.x + 0.3..arena.max.x - 0.3 - w);
            let y = rng.random_range(arena.min.y + 0.3..arena.max.y - 0.3 - h);
            let r = Rect::new(x, y, x + w, y + h);
            if r.distance_to(start) < spec.start_clearance {
                continue;
            }
            cfg.obstacles.push(r);
            break;
        }
    }
    let reach = Reachability::new(cfg, start, cfg.robot_radius + 0.1);
    for _ in 0..spec.n_trash {
        for _attempt in 0..1000 {
            let margin = 0.5;
            let p = GroundPoint::new(
                rng.random_range(arena.min.x + margin..arena.max.x - margin),
                rng.random_range(arena.min.y + margin..arena.max.y - margin),
            );
            let ok = p.distance(&start) >= spec.start_clearance
                && cfg.obstacles.iter().all(|o| o.distance_to(p) >= spec.trash_clearance)
                && cfg.trash.iter().all(|t| t.position.distance(&p) >= spec.trash_spacing)
                && reach.reachable(p);
            if ok {
                let mass = rng.random_range(0.05..=MAX_TRASH_MASS);
                cfg.trash.push(TrashSpec { position: p, mass });
                break;
            }
        }
    }
}

/// Flood fill over a fine lattice of collision-free robot positions.
struct Reachability {
    origin: GroundPoint,
    step: f64,
    w: usize,
    h: usize,
    seen: Vec<bool>,
}

impl Reachability {
    fn new(cfg: &WorldConfig, start: GroundPoint, radius: f64) -> Self {
        let step = 0.05;
        let origin = cfg.arena.min;
        let w = (cfg.arena.width() / step).ceil() as usize;
        let h = (cfg.arena.height() / step).ceil() as usize;
        let centre = |c: usize, r: usize| {
            GroundPoint::new(origin.x + (c as f64 + 0.5) * step, origin.y + (r as f64 + 0.5) * step)
        };
        let ok = |p: GroundPoint| {
            p.x >= cfg.arena.min.x + radius
                && p.x <= cfg.arena.max.x - radius
                && p.y >= cfg.arena.min.y + radius
                && p.y <= cfg.arena.max.y - radius
                && cfg.obstacles.iter().all(|o| o.distance_to(p) >= radius)
        };
        let mut seen = vec![false; w * h];
        let sc = (((start.x - origin.x) / step).floor() as usize).min(w - 1);
        let sr = (((start.y - origin.y) / step).floor() as usize).min(h - 1);
        let mut stack = vec![(sc, sr)];
        seen[sr * w + sc] = true;
        while let Some((c, r)) = stack.pop() {
            for (dc, dr) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let (nc, nr) = (c as i64 + dc, r as i64 + dr);
                if nc < 0 || nr < 0 || nc >= w as i64 || nr >= h as i64 {
                    continue;
                }
                let (nc, nr) = (nc as usize, nr as usize);
                if !seen[nr * w + nc] && ok(centre(nc, nr)) {
                    seen[nr * w + nc] = true;
                    stack.push((nc, nr));
                }
            }
        }
        Self { origin, step, w, h, seen }
    }

    fn reachable(&self, p: GroundPoint) -> bool {
        let c = ((p.x - self.origin.x) / self.step).floor();
        let r = ((p.y - self.origin.y) / self.step).floor();
        if c < 0.0 || r < 0.0 || c as usize >= self.w || r as usize >= self.h {
            return false;
        }
        self.seen[r as usize * self.w + c as usize]
    }
}
