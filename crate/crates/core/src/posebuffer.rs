//! Time-stamped trajectory storage with interpolated lookup.
//!
//! Detections arrive after the detector's processing delay; the frame's
//! capture time is resolved against the stored trajectory so that each
//! detection is projected from where the robot actually was.

use std::collections::VecDeque;
use std::io::{self, Write};

use thiserror::Error;

use crate::geometry::{normalize_angle, Pose2D};

pub const DEFAULT_HORIZON: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseBufferError {
    #[error("timestamp {t} is not after the newest stored entry {newest}")]
    NonMonotonicTime { t: f64, newest: f64 },
    #[error("timestamp {0} must be finite and non-negative")]
    InvalidTime(f64),
    #[error("no stored pose covers t = {t} (stored span {oldest}..{newest})")]
    OutOfRange { t: f64, oldest: f64, newest: f64 },
    #[error("the buffer is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampedPose {
    pub t: f64,
    pub pose: Pose2D,
}

impl StampedPose {
    pub fn new(t: f64, pose: Pose2D) -> Self {
        Self { t, pose }
    }
}

#[derive(Debug, Clone)]
pub struct PoseBuffer {
    entries: VecDeque<StampedPose>,
    horizon: f64,
}

impl Default for PoseBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_HORIZON)
    }
}

impl PoseBuffer {
    pub fn new(horizon: f64) -> Self {
        Self {
            entries: VecDeque::new(),
            horizon,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn oldest(&self) -> Option<&StampedPose> {
        self.entries.front()
    }

    pub fn newest(&self) -> Option<&StampedPose> {
        self.entries.back()
    }

    pub fn iter(&self) -> impl Iterator<Item = &StampedPose> {
        self.entries.iter()
    }

    /// Appends an entry and evicts everything older than `newest − horizon`.
    pub fn insert(&mut self, sp: StampedPose) -> Result<(), PoseBufferError> {
        if !(sp.t.is_finite() && sp.t >= 0.0) {
            return Err(PoseBufferError::InvalidTime(sp.t));
        }
        if let Some(newest) = self.entries.back() {
            if sp.t <= newest.t {
                return Err(PoseBufferError::NonMonotonicTime {
                    t: sp.t,
                    newest: newest.t,
                });
            }
        }
        self.entries.push_back(sp);
        let cutoff = sp.t - self.horizon;
        while self.entries.front().is_some_and(|e| e.t < cutoff) {
            self.entries.pop_front();
        }
        Ok(())
    }

    /// Robot pose at time `t`, linearly interpolated between the bracketing
    /// entries. Heading follows the shorter arc.
    pub fn pose_at(&self, t: f64) -> Result<Pose2D, PoseBufferError> {
        let (oldest, newest) = match (self.entries.front(), self.entries.back()) {
            (Some(o), Some(n)) => (o.t, n.t),
            _ => return Err(PoseBufferError::Empty),
        };
        if !(t >= oldest && t <= newest) {
            return Err(PoseBufferError::OutOfRange { t, oldest, newest });
        }
        // first entry with entry.t >= t
        let idx = self.entries.partition_point(|e| e.t < t);
        let hi = self.entries[idx];
        if hi.t == t || idx == 0 {
            return Ok(hi.pose);
        }
        let lo = self.entries[idx - 1];
        let frac = (t - lo.t) / (hi.t - lo.t);
        Ok(interpolate(lo.pose, hi.pose, frac))
    }

    /// Writes `t x y theta` lines.
    pub fn write_trajectory<W: Write>(&self, out: W) -> io::Result<()> {
        write_trajectory(self.entries.iter(), out)
    }
}

pub fn interpolate(a: Pose2D, b: Pose2D, frac: f64) -> Pose2D {
    let dtheta = normalize_angle(b.theta() - a.theta());
    Pose2D::new(
        a.x() + frac * (b.x() - a.x()),
        a.y() + frac * (b.y() - a.y()),
        a.theta() + frac * dtheta,
    )
}

pub fn write_trajectory<'a, W: Write>(
    entries: impl IntoIterator<Item = &'a StampedPose>,
    mut out: W,
) -> io::Result<()> {
    for e in entries {
        writeln!(
            out,
            "{:.3} {:.6} {:.6} {:.6}",
            e.t,
            e.pose.x(),
            e.pose.y(),
            e.pose.theta()
        )?;
    }
    Ok(())
}
