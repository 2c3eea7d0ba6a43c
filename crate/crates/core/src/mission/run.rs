//! One mission: survey, map, plan, navigate and pick up, in that order.

use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::clusterfilter::ClusterFilter;
use crate::geometry::{project_detection, GroundPoint, Pose2D};
use crate::gridmap::{morph_close_open, save_map, Cell, MapIoError, OccupancyGrid};
use crate::pickup::{self, episode_line, MotionCommand, Phase};
use crate::planner::{approach_goal, astar, nearest_free_cell, order_waypoints, PathPlan};
use crate::posebuffer::{self, PoseBuffer, StampedPose, DEFAULT_HORIZON};
use crate::simworld::{
    aerial_survey, generate_layout, scan_from, stream_rng, Frame, MessageChannel, Stream, TrashSpec,
    World, WorldConfig,
};

use super::config::{ConfigError, Layout, MissionConfig, Mode};
use super::follow::{face, FollowStatus, PathFollower};
use super::report::{match_hypotheses, MissionReport, Outcome, TrashResult, MATCH_RADIUS};

pub const MAP_FILE: &str = "map.gridmap";

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Map(#[from] MapIoError),
}

impl MissionError {
    pub fn is_config(&self) -> bool {
        matches!(self, MissionError::Config(_))
    }
}

/// Everything a run produces besides the report.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub map: Option<OccupancyGrid>,
    pub filter: ClusterFilter,
    pub trajectory: Vec<StampedPose>,
    pub episodes: Vec<String>,
    pub paths: Vec<PathPlan>,
    pub ground_truth: String,
}

#[derive(Debug, Clone)]
pub struct MissionRun {
    pub report: MissionReport,
    pub artifacts: Artifacts,
}

/// Resolved world for a config: explicit lists, or the seeded layout.
pub fn build_world(cfg: &MissionConfig) -> Result<WorldConfig, ConfigError> {
    cfg.validate()?;
    let mut world = cfg.world.clone();
    if cfg.layout == Layout::Random {
        world.obstacles.clear();
        world.trash.clear();
        generate_layout(&mut world, &cfg.layout_spec, cfg.start.position());
    }
    world
        .validate()
        .map_err(|e| ConfigError::new("world", e.to_string()))?;
    Ok(world)
}

/// Lawnmower mapping sweep with 360° scans from every reachable station,
/// followed by closing and opening.
pub fn build_map(cfg: &MissionConfig, world: &WorldConfig) -> OccupancyGrid {
    let m = &cfg.mapping;
    let a = world.arena;
    let w = (a.width() / m.resolution).round() as usize;
    let h = (a.height() / m.resolution).round() as usize;
    let origin = Pose2D::new(a.min.x, a.min.y, 0.0);
    let mut grid = OccupancyGrid::new(w, h, m.resolution, origin, Cell::Unknown)
        .expect("validated resolution");
    let cols = (a.width() / m.lane_spacing).floor().max(1.0) as usize;
    let rows = (a.height() / m.lane_spacing).floor().max(1.0) as usize;
    for r in 0..rows {
        for k in 0..cols {
            let c = if r % 2 == 0 { k } else { cols - 1 - k };
            let p = GroundPoint::new(
                a.min.x + m.lane_spacing * (c as f64 + 0.5),
                a.min.y + m.lane_spacing * (r as f64 + 0.5),
            );
            if !world.pose_is_free(p) {
                continue;
            }
            let pose = Pose2D::new(p.x, p.y, 0.0);
            let scan = scan_from(world, pose, m.beams, std::f64::consts::TAU, m.max_range);
            grid.integrate_scan(pose, &scan);
        }
    }
    morph_close_open(&grid, m.element)
}

// Ground robot with its camera pipeline and pose history.
struct Ground<'a> {
    cfg: &'a MissionConfig,
    world: World,
    buffer: PoseBuffer,
    trajectory: Vec<StampedPose>,
    detector: MessageChannel<Frame>,
    episodes: Vec<String>,
    frame_every: u64,
    steps: u64,
    camera_on: bool,
}

enum PickupEnd {
    Done,
    TimedOut,
    Refused,
}

impl<'a> Ground<'a> {
    fn new(cfg: &'a MissionConfig, world: World) -> Self {
        let start = world.robot().believed_pose;
        let mut buffer = PoseBuffer::new(DEFAULT_HORIZON);
        let first = StampedPose::new(world.time(), start);
        buffer.insert(first).expect("empty buffer");
        Self {
            cfg,
            world,
            buffer,
            trajectory: vec![first],
            detector: MessageChannel::new(cfg.noise.detector_latency, 0.0),
            episodes: Vec::new(),
            frame_every: (cfg.frame_period / cfg.world.dt).round().max(1.0) as u64,
            steps: 0,
            camera_on: false,
        }
    }

    fn dt(&self) -> f64 {
        self.world.config().dt
    }

    fn believed(&self) -> Pose2D {
        self.world.robot().believed_pose
    }

    fn advance(&mut self, cmd: MotionCommand) {
        let dt = self.dt();
        self.world.step(cmd, dt);
        self.steps += 1;
        let sp = StampedPose::new(self.world.time(), self.believed());
        if self.buffer.insert(sp).is_ok() {
            self.trajectory.push(sp);
        }
        if self.camera_on && self.steps.is_multiple_of(self.frame_every) {
            let frame = self.world.capture_frame(&self.cfg.camera, self.cfg.frame_period);
            self.detector.push(frame.capture_time, frame);
        }
    }

    /// Detections delivered by now, projected through the believed pose at
    /// their capture time.
    fn sightings(&mut self) -> Vec<(GroundPoint, f64)> {
        let mut out = Vec::new();
        for frame in self.detector.recv(self.world.time()) {
            let Ok(pose) = self.buffer.pose_at(frame.capture_time) else {
                continue;
            };
            for b in &frame.boxes {
                if let Ok(p) = project_detection(pose, b, &self.cfg.camera) {
                    out.push((p, b.confidence));
                }
            }
        }
        out
    }

    fn navigate(&mut self, plan: &PathPlan, heading: f64) -> bool {
        let t0 = self.world.time();
        let mut follower = PathFollower::new(
            plan,
            self.cfg.nav,
            self.cfg.mapping.resolution,
            self.believed(),
            t0,
        );
        loop {
            if self.world.time() - t0 > self.cfg.nav.leg_time_limit {
                return false;
            }
            match follower.update(self.believed(), self.world.time()) {
                FollowStatus::Active(cmd) => self.advance(cmd),
                FollowStatus::Arrived => break,
                FollowStatus::Stuck => return false,
            }
        }
        let dt = self.dt();
        for _ in 0..1000 {
            match face(self.believed(), heading, &self.cfg.nav, 0.02, dt) {
                Some(cmd) => self.advance(cmd),
                None => break,
            }
        }
        true
    }

    fn pickup(&mut self, expected: GroundPoint) -> PickupEnd {
        let pc = &self.cfg.pickup;
        let Ok(mut state) = pickup::start(self.believed(), expected, pc) else {
            return PickupEnd::Refused;
        };
        self.detector.clear();
        self.camera_on = pc.reidentify;
        let dt = self.dt();
        let t_end = self.world.time() + pc.episode_bound() + 5.0;
        while !state.is_terminal() && self.world.time() < t_end {
            let seen = self.sightings();
            let (next, cmd) = pickup::step(state, self.believed(), &seen, pc, dt);
            state = next;
            self.episodes.push(episode_line(self.world.time(), state.phase(), &cmd, self.believed()));
            self.advance(cmd);
        }
        self.camera_on = false;
        match state.phase() {
            Phase::Done => PickupEnd::Done,
            _ => PickupEnd::TimedOut,
        }
    }

    fn into_artifacts(self, filter: ClusterFilter, map: Option<OccupancyGrid>, paths: Vec<PathPlan>) -> (World, Artifacts) {
        let mut gt = Vec::new();
        self.world.write_ground_truth(&mut gt).expect("in-memory write");
        let artifacts = Artifacts {
            map,
            filter,
            trajectory: self.trajectory,
            episodes: self.episodes,
            paths,
            ground_truth: String::from_utf8(gt).expect("ascii"),
        };
        (self.world, artifacts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StopResult {
    Unreachable,
    TimedOut,
    Done,
}

/// Runs a mission in memory.
pub fn simulate(cfg: &MissionConfig) -> Result<MissionRun, ConfigError> {
    match cfg.mode {
        Mode::Mission => simulate_mission(cfg),
        Mode::PickupTrial => simulate_trial(cfg),
    }
}

fn simulate_mission(cfg: &MissionConfig) -> Result<MissionRun, ConfigError> {
    let world_cfg = build_world(cfg)?;
    let seed = world_cfg.seed;

    // survey and fusion
    let mut survey_rng = stream_rng(seed, Stream::Survey);
    let stream = aerial_survey(&world_cfg, &cfg.survey, &cfg.noise, &mut survey_rng);
    let mut filter = ClusterFilter::new(cfg.filter);
    for (_, d) in &stream {
        filter.ingest(d);
    }
    let confirmed = filter.confirmed();

    // map
    let map = build_map(cfg, &world_cfg);
    let nav_grid = map.inflate(world_cfg.robot_radius + cfg.nav.inflation_margin);

    // plan
    let world = World::new(world_cfg.clone(), cfg.noise, cfg.start, cfg.pickup.brush_halfwidth)
        .map_err(|e| ConfigError::new("world", e.to_string()))?;
    let mut ground = Ground::new(cfg, world);
    let tour = order_waypoints(ground.believed().position(), &confirmed, &nav_grid);

    // navigate and pick up
    let mut results: Vec<Option<StopResult>> = vec![None; confirmed.len()];
    let mut paths = Vec::new();
    for stop in &tour {
        ground.world.relocalize();
        let result = visit(&mut ground, &nav_grid, stop.point, &mut paths);
        results[stop.index] = Some(result);
    }

    let (world, artifacts) = ground.into_artifacts(filter, Some(map), paths);
    let truth: Vec<GroundPoint> = world.trash().iter().map(|t| t.position).collect();
    let matches = match_hypotheses(&truth, &confirmed, MATCH_RADIUS);
    let per_trash: Vec<TrashResult> = world
        .trash()
        .iter()
        .zip(&matches)
        .map(|(item, m)| {
            let hypothesis = m.map(|j| confirmed[j]);
            let outcome = if item.collected {
                Outcome::Collected
            } else {
                match m {
                    None => Outcome::Undetected,
                    Some(j) => match results[*j] {
                        Some(StopResult::Done) => Outcome::Missed,
                        Some(StopResult::TimedOut) => Outcome::TimedOut,
                        Some(StopResult::Unreachable) | None => Outcome::Unreachable,
                    },
                }
            };
            TrashResult {
                truth: item.position,
                hypothesis,
                map_error: hypothesis.map(|h| h.distance(&item.position)),
                outcome,
            }
        })
        .collect();
    let success = per_trash.iter().all(|t| t.outcome == Outcome::Collected);
    let report = MissionReport {
        seed,
        mode: "mission",
        map_file: Some(MAP_FILE.to_string()),
        hypotheses: artifacts.filter.hypotheses().to_vec(),
        n_confirmed: confirmed.len(),
        per_trash,
        success,
        wall_time: world.time(),
    };
    Ok(MissionRun { report, artifacts })
}

fn visit(
    ground: &mut Ground<'_>,
    grid: &OccupancyGrid,
    target: GroundPoint,
    paths: &mut Vec<PathPlan>,
) -> StopResult {
    let cfg = ground.cfg;
    let mut arrived = false;
    for attempt in 0..=cfg.nav.recoveries {
        if attempt > 0 {
            ground.world.relocalize();
        }
        let believed = ground.believed();
        let Ok(goal) = approach_goal(target, grid, believed, cfg.standoff) else {
            return StopResult::Unreachable;
        };
        let mut start = believed.position();
        if grid.world_to_cell(start).is_none_or(|(c, r)| !grid.is_free(c, r)) {
            match nearest_free_cell(grid, start, 0.5) {
                Some((c, r)) => start = grid.cell_center(c, r),
                None => return StopResult::Unreachable,
            }
        }
        let Ok(plan) = astar(grid, start, goal.pose.position()) else {
            return StopResult::Unreachable;
        };
        arrived = ground.navigate(&plan, goal.pose.theta());
        paths.push(plan);
        if arrived {
            break;
        }
    }
    if !arrived {
        return StopResult::Unreachable;
    }
    match ground.pickup(target) {
        PickupEnd::Done => StopResult::Done,
        PickupEnd::TimedOut => StopResult::TimedOut,
        PickupEnd::Refused => StopResult::Unreachable,
    }
}

// One Greedy Pickup episode in an open arena from a fixed distance.
fn simulate_trial(cfg: &MissionConfig) -> Result<MissionRun, ConfigError> {
    cfg.validate()?;
    let seed = cfg.seed();
    let mut rng = stream_rng(seed, Stream::Layout);
    let arena = cfg.world.arena;
    let centre = GroundPoint::new(
        (arena.min.x + arena.max.x) / 2.0,
        (arena.min.y + arena.max.y) / 2.0,
    );
    let trash = centre + GroundPoint::new(rng.random_range(-0.5..=0.5), rng.random_range(-0.5..=0.5));
    let phi: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let d = cfg.trial.distance;
    let robot_pos = trash - GroundPoint::new(phi.cos(), phi.sin()) * d;
    let spread = cfg.trial.heading_spread;
    let offset = if spread > 0.0 { rng.random_range(-spread..=spread) } else { 0.0 };
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let sigma = cfg.trial.expected_sigma;
    let expected = trash
        + GroundPoint::new(normal.sample(&mut rng) * sigma, normal.sample(&mut rng) * sigma);

    let world_cfg = WorldConfig {
        obstacles: Vec::new(),
        trash: vec![TrashSpec { position: trash, mass: rng.random_range(0.05..=0.64) }],
        ..cfg.world.clone()
    };
    let start = Pose2D::new(robot_pos.x, robot_pos.y, phi + offset);
    let mut world = World::new(world_cfg, cfg.noise, start, cfg.pickup.brush_halfwidth)
        .map_err(|e| ConfigError::new("trial", e.to_string()))?;
    world.relocalize();
    let mut ground = Ground::new(cfg, world);
    let end = ground.pickup(expected);

    let (world, artifacts) = ground.into_artifacts(ClusterFilter::new(cfg.filter), None, Vec::new());
    let item = world.trash()[0];
    let outcome = match (item.collected, end) {
        (true, _) => Outcome::Collected,
        (false, PickupEnd::Done) => Outcome::Missed,
        (false, PickupEnd::TimedOut) => Outcome::TimedOut,
        (false, PickupEnd::Refused) => Outcome::Unreachable,
    };
    let report = MissionReport {
        seed,
        mode: "pickup_trial",
        map_file: None,
        hypotheses: Vec::new(),
        n_confirmed: 0,
        per_trash: vec![TrashResult {
            truth: item.position,
            hypothesis: Some(expected),
            map_error: Some(expected.distance(&item.position)),
            outcome,
        }],
        success: outcome == Outcome::Collected,
        wall_time: world.time(),
    };
    Ok(MissionRun { report, artifacts })
}

/// Writes the report and every dump into `dir`.
pub fn write_outputs(run: &MissionRun, dir: &Path) -> Result<(), MissionError> {
    fs::create_dir_all(dir)?;
    let a = &run.artifacts;
    if let (Some(map), Some(name)) = (&a.map, &run.report.map_file) {
        save_map(map, dir.join(name))?;
    }
    let mut buf = Vec::new();
    posebuffer::write_trajectory(a.trajectory.iter(), &mut buf)?;
    fs::write(dir.join("trajectory.txt"), &buf)?;
    let mut buf = Vec::new();
    a.filter.write_dump(&mut buf)?;
    fs::write(dir.join("hypotheses.txt"), &buf)?;
    let mut episodes = a.episodes.join("\n");
    if !episodes.is_empty() {
        episodes.push('\n');
    }
    fs::write(dir.join("episodes.txt"), episodes)?;
    let mut buf = Vec::new();
    for (i, p) in a.paths.iter().enumerate() {
        io::Write::write_all(&mut buf, format!("# leg {i}\n").as_bytes())?;
        p.write_dump(&mut buf)?;
    }
    fs::write(dir.join("paths.txt"), &buf)?;
    fs::write(dir.join("ground_truth.txt"), &a.ground_truth)?;
    fs::write(dir.join("report.txt"), run.report.to_text())?;
    Ok(())
}

/// Simulates and, when `out` is given, writes all outputs there.
pub fn run_mission(cfg: &MissionConfig, out: Option<&Path>) -> Result<MissionReport, MissionError> {
    let run = simulate(cfg)?;
    if let Some(dir) = out {
        write_outputs(&run, dir)?;
    }
    Ok(run.report)
}
