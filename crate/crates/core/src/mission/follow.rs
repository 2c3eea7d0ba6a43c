//! Waypoint pursuit on the believed pose: turn in place toward the next
//! waypoint, then drive at it with proportional heading correction.

use crate::geometry::{normalize_angle, GroundPoint, Pose2D};
use crate::pickup::MotionCommand;
use crate::planner::PathPlan;

use super::config::NavConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FollowStatus {
    Active(MotionCommand),
    Arrived,
    /// No believed progress for the configured stuck time.
    Stuck,
}

/// Drops the start cell and every waypoint that lies on a straight run.
pub fn corner_points(waypoints: &[GroundPoint]) -> Vec<GroundPoint> {
    match waypoints.len() {
        0 => return Vec::new(),
        1 => return vec![waypoints[0]],
        2 => return vec![waypoints[1]],
        _ => {}
    }
    let mut out = Vec::new();
    for i in 1..waypoints.len() - 1 {
        let a = waypoints[i] - waypoints[i - 1];
        let b = waypoints[i + 1] - waypoints[i];
        let cross = a.x * b.y - a.y * b.x;
        if cross.abs() > 1e-12 || a.dot(&b) < 0.0 {
            out.push(waypoints[i]);
        }
    }
    out.push(*waypoints.last().expect("non-empty"));
    out
}

#[derive(Debug, Clone)]
pub struct PathFollower {
    waypoints: Vec<GroundPoint>,
    index: usize,
    cfg: NavConfig,
    reach: f64,
    anchor: GroundPoint,
    anchor_t: f64,
}

impl PathFollower {
    pub fn new(plan: &PathPlan, cfg: NavConfig, resolution: f64, start: Pose2D, t: f64) -> Self {
        Self {
            waypoints: corner_points(&plan.waypoints),
            index: 0,
            cfg,
            reach: cfg.reach_factor * resolution,
            anchor: start.position(),
            anchor_t: t,
        }
    }

    pub fn waypoints(&self) -> &[GroundPoint] {
        &self.waypoints
    }

    /// Index of the waypoint being pursued.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn update(&mut self, believed: Pose2D, t: f64) -> FollowStatus {
        let pos = believed.position();
        while self.index < self.waypoints.len()
            && pos.distance(&self.waypoints[self.index]) <= self.reach
        {
            self.index += 1;
        }
        if self.index >= self.waypoints.len() {
            return FollowStatus::Arrived;
        }
        if pos.distance(&self.anchor) >= self.cfg.stuck_distance {
            self.anchor = pos;
            self.anchor_t = t;
        } else if t - self.anchor_t >= self.cfg.stuck_time {
            return FollowStatus::Stuck;
        }
        let target = self.waypoints[self.index];
        let bearing = (target.y - pos.y).atan2(target.x - pos.x);
        let err = normalize_angle(bearing - believed.theta());
        let omega = (self.cfg.heading_gain * err).clamp(-self.cfg.turn_rate, self.cfg.turn_rate);
        let v = if err.abs() > self.cfg.heading_tolerance { 0.0 } else { self.cfg.speed };
        FollowStatus::Active(MotionCommand { v, omega, mechanism_on: false })
    }
}

/// Turn-in-place command toward `heading`, or `None` once within `tol`.
pub fn face(believed: Pose2D, heading: f64, cfg: &NavConfig, tol: f64, dt: f64) -> Option<MotionCommand> {
    let err = normalize_angle(heading - believed.theta());
    if err.abs() <= tol {
        return None;
    }
    let omega = if err.abs() <= cfg.turn_rate * dt {
        err / dt
    } else {
        cfg.turn_rate * err.signum()
    };
    Some(MotionCommand { v: 0.0, omega, mechanism_on: false })
}
