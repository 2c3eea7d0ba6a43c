//! Greedy Pickup: spin toward the expected trash point until the detector
//! re-identifies it above a confidence threshold, turn to face it, then drive
//! a fixed overshoot past it with the collection mechanism running.
//!
//! The machine is a pure step function. Sightings arrive already projected to
//! the ground through the pose the robot believed it had at capture time.

use std::fmt;

use thiserror::Error;

use crate::geometry::{angle_to, left_or_right, normalize_angle, GroundPoint, Pose2D, Side};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PickupError {
    #[error("expected trash is {distance:.3} m away, beyond the activation radius {limit:.3} m")]
    TooFar { distance: f64, limit: f64 },
    #[error("invalid pickup config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PickupConfig {
    pub timeout: f64,
    pub confidence_threshold: f64,
    pub overshoot: f64,
    pub spin_rate: f64,
    pub drive_speed: f64,
    pub brush_halfwidth: f64,
    pub activation_radius: f64,
    /// Slack on the activation radius for navigation error.
    pub activation_tolerance: f64,
    /// Heading error at which Align hands over to DriveThrough.
    pub align_tolerance: f64,
    /// Proportional gain of the heading hold while driving through.
    pub heading_gain: f64,
    /// When false the robot skips re-identification and drives to the
    /// expected point.
    pub reidentify: bool,
}

impl Default for PickupConfig {
    fn default() -> Self {
        Self {
            timeout: 30.0,
            confidence_threshold: 0.6,
            overshoot: 0.2,
            spin_rate: 0.5,
            drive_speed: 0.2,
            brush_halfwidth: 0.15,
            activation_radius: 2.0,
            activation_tolerance: 0.1,
            align_tolerance: 0.05,
            heading_gain: 2.0,
            reidentify: true,
        }
    }
}

impl PickupConfig {
    pub fn validate(&self) -> Result<(), PickupError> {
        let positive = [
            ("timeout", self.timeout),
            ("overshoot", self.overshoot),
            ("spin_rate", self.spin_rate),
            ("drive_speed", self.drive_speed),
            ("brush_halfwidth", self.brush_halfwidth),
            ("activation_radius", self.activation_radius),
            ("align_tolerance", self.align_tolerance),
            ("heading_gain", self.heading_gain),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PickupError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(PickupError::InvalidConfig(
                "confidence_threshold must lie in [0, 1]".into(),
            ));
        }
        if !(self.activation_tolerance >= 0.0) {
            return Err(PickupError::InvalidConfig(
                "activation_tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Sightings farther than this from the robot are ignored.
    pub fn reach(&self) -> f64 {
        self.activation_radius + self.activation_tolerance
    }

    /// Upper bound on the length of one episode, in seconds.
    pub fn episode_bound(&self) -> f64 {
        self.timeout
            + (self.reach() + self.overshoot) / self.drive_speed
            + std::f64::consts::PI / self.spin_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    SpinSearch,
    Align,
    DriveThrough,
    Done,
    TimedOut,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::TimedOut)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::SpinSearch => "SpinSearch",
            Phase::Align => "Align",
            Phase::DriveThrough => "DriveThrough",
            Phase::Done => "Done",
            Phase::TimedOut => "TimedOut",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionCommand {
    pub v: f64,
    pub omega: f64,
    pub mechanism_on: bool,
}

impl MotionCommand {
    pub fn stop() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PickupState {
    phase: Phase,
    elapsed: f64,
    spin_sign: f64,
    expected: GroundPoint,
    locked_target: Option<GroundPoint>,
    drive_goal: Option<GroundPoint>,
    /// Unit vector from the robot to the drive goal when driving started.
    approach_axis: Option<GroundPoint>,
    hold_heading: f64,
    drive_elapsed: f64,
    drive_budget: f64,
}

impl PickupState {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    pub fn expected(&self) -> GroundPoint {
        self.expected
    }

    pub fn locked_target(&self) -> Option<GroundPoint> {
        self.locked_target
    }

    pub fn drive_goal(&self) -> Option<GroundPoint> {
        self.drive_goal
    }

    /// +1 for a counter-clockwise search, −1 for clockwise.
    pub fn spin_sign(&self) -> f64 {
        self.spin_sign
    }

    pub fn is_terminal(&self) -> bool {
        self.phase.is_terminal()
    }

    fn lock(&mut self, robot: Pose2D, target: GroundPoint, cfg: &PickupConfig) {
        let dir = (target - robot.position())
            .unit()
            .unwrap_or_else(|| robot.heading());
        self.locked_target = Some(target);
        self.drive_goal = Some(target + dir * cfg.overshoot);
        self.phase = Phase::Align;
    }
}

fn check_reach(robot: Pose2D, expected: GroundPoint, cfg: &PickupConfig) -> Result<(), PickupError> {
    let distance = robot.position().distance(&expected);
    if distance > cfg.reach() {
        return Err(PickupError::TooFar { distance, limit: cfg.reach() });
    }
    Ok(())
}

/// Begins an episode by spinning toward the side the expected point is on.
pub fn start_pickup(
    robot: Pose2D,
    expected: GroundPoint,
    cfg: &PickupConfig,
) -> Result<PickupState, PickupError> {
    check_reach(robot, expected, cfg)?;
    let spin_sign = match left_or_right(robot, expected) {
        Side::Right => -1.0,
        Side::Left | Side::Ahead => 1.0,
    };
    Ok(PickupState {
        phase: Phase::SpinSearch,
        elapsed: 0.0,
        spin_sign,
        expected,
        locked_target: None,
        drive_goal: None,
        approach_axis: None,
        hold_heading: robot.theta(),
        drive_elapsed: 0.0,
        drive_budget: 0.0,
    })
}

/// Begins an episode that commits to `expected` without looking for it.
pub fn start_blind(
    robot: Pose2D,
    expected: GroundPoint,
    cfg: &PickupConfig,
) -> Result<PickupState, PickupError> {
    let mut s = start_pickup(robot, expected, cfg)?;
    s.lock(robot, expected, cfg);
    Ok(s)
}

/// Starts an episode according to `cfg.reidentify`.
pub fn start(robot: Pose2D, expected: GroundPoint, cfg: &PickupConfig) -> Result<PickupState, PickupError> {
    if cfg.reidentify {
        start_pickup(robot, expected, cfg)
    } else {
        start_blind(robot, expected, cfg)
    }
}

fn spin_toward(err: f64, cfg: &PickupConfig, dt: f64) -> f64 {
    if err.abs() <= cfg.spin_rate * dt {
        err / dt
    } else {
        cfg.spin_rate * err.signum()
    }
}

/// Advances the machine by one control period.
///
/// `sightings` are ground points with detector confidence, delivered this
/// period. Terminal states stay put and emit a stop command.
pub fn step(
    mut s: PickupState,
    robot: Pose2D,
    sightings: &[(GroundPoint, f64)],
    cfg: &PickupConfig,
    dt: f64,
) -> (PickupState, MotionCommand) {
    assert!(dt > 0.0, "dt must be positive");
    if s.phase.is_terminal() {
        return (s, MotionCommand::stop());
    }
    s.elapsed += dt;
    match s.phase {
        Phase::SpinSearch => {
            let pos = robot.position();
            let best = sightings
                .iter()
                .filter(|(p, c)| *c >= cfg.confidence_threshold && p.distance(&pos) <= cfg.reach())
                .min_by(|a, b| a.0.distance(&s.expected).total_cmp(&b.0.distance(&s.expected)));
            if let Some((p, _)) = best {
                s.lock(robot, *p, cfg);
                return (s, MotionCommand::stop());
            }
            if s.elapsed > cfg.timeout {
                s.phase = Phase::TimedOut;
                return (s, MotionCommand::stop());
            }
            let cmd = MotionCommand { v: 0.0, omega: s.spin_sign * cfg.spin_rate, mechanism_on: false };
            (s, cmd)
        }
        Phase::Align => {
            let goal = s.drive_goal.expect("goal set in Align");
            let err = angle_to(robot, goal).unwrap_or(0.0);
            if err.abs() <= cfg.align_tolerance {
                let axis = (goal - robot.position()).unit().unwrap_or_else(|| robot.heading());
                let length = (goal - robot.position()).dot(&axis);
                s.approach_axis = Some(axis);
                s.hold_heading = robot.theta() + err;
                s.drive_elapsed = 0.0;
                s.drive_budget = 1.5 * length.max(0.0) / cfg.drive_speed + 2.0;
                s.phase = Phase::DriveThrough;
                return drive(s, robot, cfg, dt);
            }
            let cmd = MotionCommand { v: 0.0, omega: spin_toward(err, cfg, dt), mechanism_on: false };
            (s, cmd)
        }
        Phase::DriveThrough => drive(s, robot, cfg, dt),
        Phase::Done | Phase::TimedOut => unreachable!(),
    }
}

fn drive(
    mut s: PickupState,
    robot: Pose2D,
    cfg: &PickupConfig,
    dt: f64,
) -> (PickupState, MotionCommand) {
    let goal = s.drive_goal.expect("goal set in DriveThrough");
    let axis = s.approach_axis.expect("axis set in DriveThrough");
    // blocked robots never pass the goal; give up once well over budget
    if (robot.position() - goal).dot(&axis) >= 0.0 || s.drive_elapsed > s.drive_budget {
        s.phase = Phase::Done;
        return (s, MotionCommand::stop());
    }
    s.drive_elapsed += dt;
    let err = normalize_angle(s.hold_heading - robot.theta());
    let omega = (cfg.heading_gain * err).clamp(-cfg.spin_rate, cfg.spin_rate);
    (s, MotionCommand { v: cfg.drive_speed, omega, mechanism_on: true })
}

/// `t phase v omega mech x y theta`
pub fn episode_line(t: f64, phase: Phase, cmd: &MotionCommand, pose: Pose2D) -> String {
    format!(
        "{:.3} {} {:.4} {:.4} {} {:.4} {:.4} {:.4}",
        t,
        phase,
        cmd.v,
        cmd.omega,
        u8::from(cmd.mechanism_on),
        pose.x(),
        pose.y(),
        pose.theta()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cfg() -> PickupConfig {
        PickupConfig::default()
    }

    // exact unicycle integration, independent of the simulator
    fn integrate(p: Pose2D, c: &MotionCommand, dt: f64) -> Pose2D {
        let th = p.theta();
        if c.omega.abs() < 1e-12 {
            Pose2D::new(p.x() + c.v * dt * th.cos(), p.y() + c.v * dt * th.sin(), th)
        } else {
            let r = c.v / c.omega;
            let th1 = th + c.omega * dt;
            Pose2D::new(p.x() + r * (th1.sin() - th.sin()), p.y() - r * (th1.cos() - th.cos()), th1)
        }
    }

    #[test]
    fn spin_direction_follows_side() {
        let robot = Pose2D::identity();
        let left = start_pickup(robot, GroundPoint::new(1.0, 1.0), &cfg()).unwrap();
        let (_, c) = step(left, robot, &[], &cfg(), 0.05);
        assert!(c.omega > 0.0);
        let right = start_pickup(robot, GroundPoint::new(1.0, -1.0), &cfg()).unwrap();
        let (_, c) = step(right, robot, &[], &cfg(), 0.05);
        assert!(c.omega < 0.0);
        let ahead = start_pickup(robot, GroundPoint::new(1.0, 0.0), &cfg()).unwrap();
        assert_eq!(ahead.spin_sign(), 1.0);
    }

    #[test]
    fn too_far_is_rejected() {
        let err = start_pickup(Pose2D::identity(), GroundPoint::new(3.0, 0.0), &cfg()).unwrap_err();
        assert!(matches!(err, PickupError::TooFar { .. }));
        assert!(start_blind(Pose2D::identity(), GroundPoint::new(3.0, 0.0), &cfg()).is_err());
    }

    #[test]
    fn confident_detection_ahead_locks_immediately() {
        let robot = Pose2D::identity();
        let t = GroundPoint::new(1.0, 0.0);
        let s = start_pickup(robot, t, &cfg()).unwrap();
        let (s, c) = step(s, robot, &[(t, 0.9)], &cfg(), 0.05);
        assert_eq!(s.phase(), Phase::Align);
        assert_eq!(c.omega, 0.0);
        assert_eq!(s.locked_target(), Some(t));
        assert_abs_diff_eq!(s.drive_goal().unwrap().x, 1.2, epsilon = 1e-12);
    }

    #[test]
    fn low_confidence_is_ignored() {
        let robot = Pose2D::identity();
        let t = GroundPoint::new(1.0, 0.0);
        let s = start_pickup(robot, t, &cfg()).unwrap();
        let (s, c) = step(s, robot, &[(t, 0.59)], &cfg(), 0.05);
        assert_eq!(s.phase(), Phase::SpinSearch);
        assert_eq!(c.omega, 0.5);
    }

    #[test]
    fn nothing_seen_times_out() {
        let c = cfg();
        let mut robot = Pose2D::identity();
        let mut s = start_pickup(robot, GroundPoint::new(1.0, 0.5), &c).unwrap();
        let mut steps = 0;
        let mut spun = 0.0;
        while !s.is_terminal() {
            let (ns, cmd) = step(s, robot, &[], &c, 0.05);
            robot = integrate(robot, &cmd, 0.05);
            spun += cmd.omega.abs() * 0.05;
            s = ns;
            steps += 1;
        }
        assert_eq!(s.phase(), Phase::TimedOut);
        assert!(s.locked_target().is_none());
        // 30 s at 0.05 s per step, give or take float accumulation
        assert!((600..=602).contains(&steps), "{steps}");
        assert!(spun >= 2.0 * PI);
    }

    #[test]
    fn trash_one_metre_ahead_ends_at_overshoot() {
        let c = cfg();
        let dt = 0.05;
        let t = GroundPoint::new(1.0, 0.0);
        let mut robot = Pose2D::identity();
        let mut s = start_pickup(robot, t, &c).unwrap();
        let mut n = 0;
        while !s.is_terminal() {
            let (ns, cmd) = step(s, robot, &[(t, 0.9)], &c, dt);
            assert!(!cmd.mechanism_on || ns.phase() == Phase::DriveThrough);
            robot = integrate(robot, &cmd, dt);
            s = ns;
            n += 1;
            assert!(n < 10_000);
        }
        assert_eq!(s.phase(), Phase::Done);
        // the last drive step may carry the robot up to v·dt past the goal
        assert!(robot.x() >= 1.2 && robot.x() <= 1.2 + c.drive_speed * dt + 1e-9, "{}", robot.x());
        assert_abs_diff_eq!(robot.y(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn align_turns_toward_goal_without_exceeding_rate() {
        let c = cfg();
        let dt = 0.05;
        let t = GroundPoint::new(0.0, 1.0);
        let mut robot = Pose2D::identity();
        let mut s = start_blind(robot, t, &c).unwrap();
        assert_eq!(s.phase(), Phase::Align);
        while s.phase() == Phase::Align {
            let (ns, cmd) = step(s, robot, &[], &c, dt);
            assert!(cmd.omega.abs() <= c.spin_rate + 1e-12);
            if ns.phase() == Phase::Align {
                assert_eq!(cmd.v, 0.0);
            }
            robot = integrate(robot, &cmd, dt);
            s = ns;
        }
        assert_eq!(s.phase(), Phase::DriveThrough);
        assert!((robot.theta() - PI / 2.0).abs() <= c.align_tolerance + 1e-9, "{robot:?}");
    }

    fn sighting() -> impl Strategy<Value = Vec<(GroundPoint, f64)>> {
        proptest::collection::vec(
            ((-2.0..2.0f64), (-2.0..2.0f64), (0.0..1.0f64))
                .prop_map(|(x, y, c)| (GroundPoint::new(x, y), c)),
            0..3,
        )
    }

    proptest! {
        #[test]
        fn state_invariants_hold(
            ex in -1.4..1.4f64, ey in -1.4..1.4f64, th in -3.1..3.1f64,
            frames in proptest::collection::vec(sighting(), 1..40),
        ) {
            let c = cfg();
            let dt = 0.05;
            let mut robot = Pose2D::new(0.0, 0.0, th);
            let mut s = start_pickup(robot, GroundPoint::new(ex, ey), &c).unwrap();
            let mut locked = None;
            let mut t = 0.0;
            let mut i = 0;
            while !s.is_terminal() {
                let frame: &[(GroundPoint, f64)] = if i < frames.len() { &frames[i] } else { &[] };
                let (ns, cmd) = step(s, robot, frame, &c, dt);
                prop_assert!(cmd.v.abs() <= c.drive_speed + 1e-12);
                prop_assert!(cmd.omega.abs() <= c.spin_rate + 1e-12);
                prop_assert_eq!(cmd.mechanism_on, ns.phase() == Phase::DriveThrough);
                let has_lock = matches!(ns.phase(), Phase::Align | Phase::DriveThrough | Phase::Done);
                prop_assert_eq!(ns.locked_target().is_some(), has_lock);
                if ns.phase() == Phase::SpinSearch {
                    prop_assert!(ns.elapsed() <= c.timeout);
                }
                if let Some(l) = locked {
                    prop_assert_eq!(ns.locked_target(), Some(l));
                }
                locked = ns.locked_target();
                robot = integrate(robot, &cmd, dt);
                s = ns;
                t += dt;
                i += 1;
            }
            prop_assert!(t <= c.episode_bound() + 3.0 * dt, "episode lasted {t}");
        }
    }
}
