//! Seed × parameter-grid experiments with CSV output.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::par::{map_ordered, Execution};

use super::config::{ConfigError, MissionConfig};
use super::report::{fmt_opt, MissionReport};
use super::run::simulate;

/// One swept key and its values, from `key=v1,v2,...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSpec {
    pub key: String,
    pub values: Vec<String>,
}

pub fn parse_sweep(s: &str) -> Result<SweepSpec, ConfigError> {
    let (key, values) = s
        .split_once('=')
        .ok_or_else(|| ConfigError::new("--sweep", format!("expected key=v1,v2,..., got `{s}`")))?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(ConfigError::new(key.trim(), "sweep needs at least one value"));
    }
    Ok(SweepSpec { key: key.trim().to_string(), values })
}

/// `a..b` (exclusive), `a..=b`, or a single seed.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = || ConfigError::new("--seeds", format!("expected a..b, a..=b or n, got `{s}`"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        vec![num(s)?]
    };
    if seeds.is_empty() {
        return Err(ConfigError::new("--seeds", "seed range is empty"));
    }
    Ok(seeds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    /// Sweep values in key order.
    pub point: Vec<String>,
    pub success: bool,
    pub n_collected: usize,
    pub n_trash: usize,
    pub mean_map_error: Option<f64>,
    pub wall_time: f64,
}

impl RunRecord {
    fn from_report(point: &[String], r: &MissionReport) -> Self {
        Self {
            seed: r.seed,
            point: point.to_vec(),
            success: r.success,
            n_collected: r.n_collected(),
            n_trash: r.n_trash(),
            mean_map_error: r.mean_map_error(),
            wall_time: r.wall_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub point: Vec<String>,
    pub runs: usize,
    pub successes: usize,
    pub mean_map_error: Option<f64>,
    pub mean_wall_time: f64,
}

impl AggregateRow {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.runs as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub keys: Vec<String>,
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRow>,
}

fn grid_points(sweeps: &[SweepSpec]) -> Vec<Vec<String>> {
    let mut points = vec![Vec::new()];
    for s in sweeps {
        points = points
            .into_iter()
            .flat_map(|p| {
                s.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    points
}

/// Runs every (sweep point, seed) pair. Rows are ordered by sweep point,
/// then by seed, whatever the execution mode.
pub fn run_batch(
    template: &MissionConfig,
    seeds: &[u64],
    sweeps: &[SweepSpec],
    exec: Execution,
) -> Result<BatchResult, ConfigError> {
    if seeds.is_empty() {
        return Err(ConfigError::new("--seeds", "no seeds given"));
    }
    let points = grid_points(sweeps);
    let mut configs = Vec::with_capacity(points.len());
    for p in &points {
        let mut cfg = template.clone();
        for (s, v) in sweeps.iter().zip(p) {
            cfg.set(&s.key, v)?;
        }
        cfg.validate()?;
        configs.push(cfg);
    }
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| seeds.iter().map(move |s| (i, *s)))
        .collect();
    let reports = map_ordered(&jobs, exec, |(i, seed)| {
        let mut cfg = configs[*i].clone();
        cfg.set_seed(*seed);
        simulate(&cfg).map(|run| run.report)
    });
    let mut runs = Vec::with_capacity(jobs.len());
    for ((i, _), r) in jobs.iter().zip(reports) {
        runs.push(RunRecord::from_report(&points[*i], &r?));
    }
    let aggregates = points
        .iter()
        .map(|p| {
            let rows: Vec<&RunRecord> = runs.iter().filter(|r| &r.point == p).collect();
            let errs: Vec<f64> = rows.iter().filter_map(|r| r.mean_map_error).collect();
            AggregateRow {
                point: p.clone(),
                runs: rows.len(),
                successes: rows.iter().filter(|r| r.success).count(),
                mean_map_error: (!errs.is_empty())
                    .then(|| errs.iter().sum::<f64>() / errs.len() as f64),
                mean_wall_time: rows.iter().map(|r| r.wall_time).sum::<f64>() / rows.len() as f64,
            }
        })
        .collect();
    Ok(BatchResult {
        keys: sweeps.iter().map(|s| s.key.clone()).collect(),
        runs,
        aggregates,
    })
}

impl BatchResult {
    pub fn write_runs_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = vec!["seed".to_string()];
        header.extend(self.keys.iter().cloned());
        header.extend(
            ["success", "n_collected", "n_trash", "mean_map_error_m", "wall_time_s"]
                .map(String::from),
        );
        writeln!(out, "{}", header.join(","))?;
        for r in &self.runs {
            let mut row = vec![r.seed.to_string()];
            row.extend(r.point.iter().cloned());
            row.push(u8::from(r.success).to_string());
            row.push(r.n_collected.to_string());
            row.push(r.n_trash.to_string());
            row.push(fmt_opt(r.mean_map_error));
            row.push(format!("{:.3}", r.wall_time));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_aggregate_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = self.keys.clone();
        header.extend(
            ["runs", "success_rate", "mean_map_error_m", "mean_wall_time_s"].map(String::from),
        );
        writeln!(out, "{}", header.join(","))?;
        for a in &self.aggregates {
            let mut row = a.point.clone();
            row.push(a.runs.to_string());
            row.push(format!("{:.4}", a.success_rate()));
            row.push(fmt_opt(a.mean_map_error));
            row.push(format!("{:.3}", a.mean_wall_time));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Writes `runs.csv` and `aggregate.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        self.write_runs_csv(&mut buf)?;
        fs::write(dir.join("runs.csv"), &buf)?;
        let mut buf = Vec::new();
        self.write_aggregate_csv(&mut buf)?;
        fs::write(dir.join("aggregate.csv"), &buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("3..6").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_seeds("3..=4").unwrap(), vec![3, 4]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert!(parse_seeds("5..5").is_err());
        assert!(parse_seeds("a..b").is_err());
    }

    #[test]
    fn sweep_parsing_and_grid() {
        let s = parse_sweep("trial.distance=0.5,1.0, 2.0").unwrap();
        assert_eq!(s.key, "trial.distance");
        assert_eq!(s.values, vec!["0.5", "1.0", "2.0"]);
        assert!(parse_sweep("novalue").is_err());
        let t = parse_sweep("world.n_trash=1,2").unwrap();
        let g = grid_points(&[s, t]);
        assert_eq!(g.len(), 6);
        assert_eq!(g[1], vec!["0.5".to_string(), "2".to_string()]);
        assert_eq!(grid_points(&[]), vec![Vec::<String>::new()]);
    }

    #[test]
    fn single_run_matches_report() {
        let cfg = MissionConfig::default();
        let b = run_batch(&cfg, &[4], &[], Execution::Sequential).unwrap();
        assert_eq!(b.runs.len(), 1);
        let mut c = cfg.clone();
        c.set_seed(4);
        let r = simulate(&c).unwrap().report;
        assert_eq!(b.runs[0], RunRecord::from_report(&[], &r));
        assert_eq!(b.aggregates[0].runs, 1);
    }

    #[test]
    fn unknown_sweep_key_is_config_error() {
        let s = parse_sweep("pickup.nonsense=1").unwrap();
        let err = run_batch(&MissionConfig::default(), &[1], &[s], Execution::Sequential).unwrap_err();
        assert_eq!(err.key, "pickup.nonsense");
    }

    #[test]
    fn csv_layout() {
        let mut cfg = MissionConfig::default();
        cfg.set("mission.mode", "pickup_trial").unwrap();
        let s = parse_sweep("trial.distance=0.5,1").unwrap();
        let b = run_batch(&cfg, &[1, 2], &[s], Execution::Parallel).unwrap();
        let mut out = Vec::new();
        b.write_runs_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "seed,trial.distance,success,n_collected,n_trash,mean_map_error_m,wall_time_s");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("1,0.5,"));
        assert!(lines[4].starts_with("2,1,"));
    }
}
