//! Per-run outcome record and its `key = value` text form.

use std::fmt;
use std::io::{self, Write};

use crate::clusterfilter::TrashHypothesis;
use crate::geometry::GroundPoint;

/// Maximum distance at which a hypothesis is credited to a trash item.
pub const MATCH_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Collected,
    /// The pickup search never re-identified the item.
    TimedOut,
    /// No standoff goal, no path, or navigation got stuck.
    Unreachable,
    /// No confirmed hypothesis within the match radius.
    Undetected,
    /// The drive-through completed without collecting the item.
    Missed,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Collected => "Collected",
            Outcome::TimedOut => "TimedOut",
            Outcome::Unreachable => "Unreachable",
            Outcome::Undetected => "Undetected",
            Outcome::Missed => "Missed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrashResult {
    pub truth: GroundPoint,
    pub hypothesis: Option<GroundPoint>,
    pub map_error: Option<f64>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionReport {
    pub seed: u64,
    pub mode: &'static str,
    /// Map file name relative to the output directory.
    pub map_file: Option<String>,
    pub hypotheses: Vec<TrashHypothesis>,
    pub n_confirmed: usize,
    pub per_trash: Vec<TrashResult>,
    pub success: bool,
    /// Simulated seconds of ground-robot operation.
    pub wall_time: f64,
}

impl MissionReport {
    pub fn n_trash(&self) -> usize {
        self.per_trash.len()
    }

    pub fn n_collected(&self) -> usize {
        self.per_trash
            .iter()
            .filter(|t| t.outcome == Outcome::Collected)
            .count()
    }

    /// Mean over items that were matched to a hypothesis.
    pub fn mean_map_error(&self) -> Option<f64> {
        let errs: Vec<f64> = self.per_trash.iter().filter_map(|t| t.map_error).collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "seed = {}", self.seed)?;
        writeln!(out, "mode = {}", self.mode)?;
        writeln!(out, "success = {}", self.success)?;
        writeln!(out, "n_trash = {}", self.n_trash())?;
        writeln!(out, "n_collected = {}", self.n_collected())?;
        writeln!(out, "n_hypotheses = {}", self.hypotheses.len())?;
        writeln!(out, "n_confirmed = {}", self.n_confirmed)?;
        writeln!(out, "wall_time_s = {:.3}", self.wall_time)?;
        writeln!(out, "map_file = {}", self.map_file.as_deref().unwrap_or("none"))?;
        writeln!(out, "mean_map_error_m = {}", fmt_opt(self.mean_map_error()))?;
        for (i, t) in self.per_trash.iter().enumerate() {
            writeln!(out, "trash.{i}.truth = {:.6} {:.6}", t.truth.x, t.truth.y)?;
            match t.hypothesis {
                Some(h) => writeln!(out, "trash.{i}.hypothesis = {:.6} {:.6}", h.x, h.y)?,
                None => writeln!(out, "trash.{i}.hypothesis = none")?,
            }
            writeln!(out, "trash.{i}.map_error_m = {}", fmt_opt(t.map_error))?;
            writeln!(out, "trash.{i}.outcome = {}", t.outcome)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"))
}

/// Greedy nearest pairing of ground-truth items to hypotheses within
/// `radius`: the globally closest free pair is matched first.
pub fn match_hypotheses(
    truth: &[GroundPoint],
    hypotheses: &[GroundPoint],
    radius: f64,
) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, h) in hypotheses.iter().enumerate() {
            let d = t.distance(h);
            if d <= radius {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; truth.len()];
    let mut used = vec![false; hypotheses.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used[j] {
            out[i] = Some(j);
            used[j] = true;
        }
    }
    out
}
