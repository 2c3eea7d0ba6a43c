//! Anti-clustering filter for repeated trash sightings.
//!
//! Each incoming detection is either folded into the nearest existing
//! hypothesis whose square window contains it, updating the running mean
//! `p ← (p·a + q) / (a + 1)`, or starts a new hypothesis. Only hypotheses
//! averaged more than `accept_threshold` times are reported as confirmed.

use std::io::{self, Write};

use thiserror::Error;

use crate::geometry::GroundPoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterConfigError {
    #[error("cluster_radius must be positive, got {0}")]
    Radius(f64),
    #[error("accept_threshold must be at least 1, got {0}")]
    Threshold(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Half-width of the axis-aligned match window, metres.
    pub cluster_radius: f64,
    /// A hypothesis is confirmed once its count exceeds this.
    pub accept_threshold: u32,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            cluster_radius: 0.5,
            accept_threshold: 2,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterConfigError> {
        if !(self.cluster_radius > 0.0 && self.cluster_radius.is_finite()) {
            return Err(FilterConfigError::Radius(self.cluster_radius));
        }
        if self.accept_threshold < 1 {
            return Err(FilterConfigError::Threshold(self.accept_threshold));
        }
        Ok(())
    }
}

/// A single projected sighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawDetection {
    /// Capture time, seconds.
    pub t: f64,
    pub point: GroundPoint,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrashHypothesis {
    pub point: GroundPoint,
    /// Number of detections averaged into `point`.
    pub count: u32,
}

impl TrashHypothesis {
    pub fn is_confirmed(&self, cfg: &FilterConfig) -> bool {
        self.count > cfg.accept_threshold
    }

    fn window_contains(&self, p: GroundPoint, radius: f64) -> bool {
        (p.x - self.point.x).abs() <= radius && (p.y - self.point.y).abs() <= radius
    }
}

/// Index of the hypothesis a detection at `p` would merge into.
pub fn match_index(state: &[TrashHypothesis], p: GroundPoint, radius: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, h) in state.iter().enumerate() {
        if !h.window_contains(p, radius) {
            continue;
        }
        let d = h.point.distance(&p);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Folds one detection into the filter state.
pub fn ingest(state: &mut Vec<TrashHypothesis>, d: &RawDetection, cfg: &FilterConfig) {
    match match_index(state, d.point, cfg.cluster_radius) {
        Some(i) => {
            let h = &mut state[i];
            let a = h.count as f64;
            h.point = GroundPoint::new(
                (h.point.x * a + d.point.x) / (a + 1.0),
                (h.point.y * a + d.point.y) / (a + 1.0),
            );
            h.count += 1;
        }
        None => state.push(TrashHypothesis {
            point: d.point,
            count: 1,
        }),
    }
}

/// Confirmed hypothesis points in insertion order.
pub fn confirmed(state: &[TrashHypothesis], cfg: &FilterConfig) -> Vec<GroundPoint> {
    state
        .iter()
        .filter(|h| h.is_confirmed(cfg))
        .map(|h| h.point)
        .collect()
}

/// Filter state with its configuration.
#[derive(Debug, Clone, Default)]
pub struct ClusterFilter {
    cfg: FilterConfig,
    hypotheses: Vec<TrashHypothesis>,
    ingested: usize,
}

impl ClusterFilter {
    pub fn new(cfg: FilterConfig) -> Self {
        Self {
            cfg,
            hypotheses: Vec::new(),
            ingested: 0,
        }
    }

    pub fn config(&self) -> &FilterConfig {
        &self.cfg
    }

    pub fn ingest(&mut self, d: &RawDetection) {
        ingest(&mut self.hypotheses, d, &self.cfg);
        self.ingested += 1;
    }

    pub fn hypotheses(&self) -> &[TrashHypothesis] {
        &self.hypotheses
    }

    pub fn ingested(&self) -> usize {
        self.ingested
    }

    pub fn confirmed(&self) -> Vec<GroundPoint> {
        confirmed(&self.hypotheses, &self.cfg)
    }

    /// `x y a confirmed` lines.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for h in &self.hypotheses {
            writeln!(
                out,
                "{:.6} {:.6} {} {}",
                h.point.x,
                h.point.y,
                h.count,
                u8::from(h.is_confirmed(&self.cfg))
            )?;
        }
        Ok(())
    }
}
