//! Scenario files: one `section.key = value` per line, `#` starts a comment.
//! Unknown keys are errors.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::clusterfilter::FilterConfig;
use crate::geometry::{CameraModel, GroundPoint, Pose2D};
use crate::gridmap::{StructuringElement, DEFAULT_RESOLUTION};
use crate::pickup::PickupConfig;
use crate::planner::DEFAULT_STANDOFF;
use crate::simworld::{LayoutSpec, NoiseModel, Rect, SurveyConfig, TrashSpec, WorldConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    /// Dotted path of the offending field.
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { line: None, key: key.into(), message: message.into() }
    }

    fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// The full survey, map, plan, navigate, pickup pipeline.
    Mission,
    /// One Greedy Pickup episode from a fixed distance.
    PickupTrial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Obstacles and trash drawn from the seed.
    Random,
    /// Obstacles and trash as listed in the config.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingConfig {
    pub resolution: f64,
    /// Spacing of the lawnmower scan stations.
    pub lane_spacing: f64,
    pub beams: usize,
    pub max_range: f64,
    pub element: StructuringElement,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            lane_spacing: 1.0,
            beams: 360,
            max_range: 4.0,
            element: StructuringElement::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavConfig {
    pub speed: f64,
    pub turn_rate: f64,
    /// Heading error above which the robot turns in place.
    pub heading_tolerance: f64,
    pub heading_gain: f64,
    /// Waypoint acceptance radius in grid cells.
    pub reach_factor: f64,
    pub stuck_time: f64,
    pub stuck_distance: f64,
    /// Clearance added to the robot radius when inflating the map.
    pub inflation_margin: f64,
    pub leg_time_limit: f64,
    /// Relocalize-and-replan attempts after a stuck or timed-out leg.
    pub recoveries: usize,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            speed: 0.4,
            turn_rate: 1.0,
            heading_tolerance: 0.35,
            heading_gain: 2.0,
            reach_factor: 1.5,
            stuck_time: 10.0,
            stuck_distance: 0.05,
            inflation_margin: 0.07,
            leg_time_limit: 300.0,
            recoveries: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    /// Robot-to-trash distance at the start of the episode.
    pub distance: f64,
    /// Start heading is offset from facing the trash by up to this much.
    pub heading_spread: f64,
    /// Error of the expected point handed to the FSM.
    pub expected_sigma: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self { distance: 1.0, heading_spread: FRAC_PI_2, expected_sigma: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    pub mode: Mode,
    pub world: WorldConfig,
    pub layout: Layout,
    pub layout_spec: LayoutSpec,
    pub start: Pose2D,
    pub noise: NoiseModel,
    pub camera: CameraModel,
    pub filter: FilterConfig,
    pub pickup: PickupConfig,
    pub survey: SurveyConfig,
    pub mapping: MappingConfig,
    pub nav: NavConfig,
    pub trial: TrialConfig,
    pub standoff: f64,
    /// Detector frame period of the ground camera.
    pub frame_period: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Mission,
            world: WorldConfig::default(),
            layout: Layout::Random,
            layout_spec: LayoutSpec { n_trash: 2, ..Default::default() },
            start: Pose2D::new(0.5, 0.5, 0.0),
            noise: NoiseModel::default(),
            camera: CameraModel::default(),
            filter: FilterConfig::default(),
            pickup: PickupConfig::default(),
            survey: SurveyConfig::default(),
            mapping: MappingConfig::default(),
            nav: NavConfig::default(),
            trial: TrialConfig::default(),
            standoff: DEFAULT_STANDOFF,
            frame_period: 0.2,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError::new(key, format!("expected a number, got `{v}`")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>()
        .map_err(|_| ConfigError::new(key, format!("expected a non-negative integer, got `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::new(key, format!("expected true or false, got `{v}`"))),
    }
}

// `a b c d; a b c d; ...`, or `none`
fn parse_tuples(key: &str, v: &str, arity: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
    if v == "none" || v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(';')
        .map(|group| {
            let nums = group
                .split_whitespace()
                .map(|t| parse_f64(key, t))
                .collect::<Result<Vec<_>, _>>()?;
            if nums.len() != arity {
                return Err(ConfigError::new(
                    key,
                    format!("each entry needs {arity} numbers, got `{}`", group.trim()),
                ));
            }
            Ok(nums)
        })
        .collect()
}

impl MissionConfig {
    pub fn seed(&self) -> u64 {
        self.world.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.world.seed = seed;
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let f = |v: &str| parse_f64(key, v);
        match key {
            "mission.mode" => {
                self.mode = match v {
                    "mission" => Mode::Mission,
                    "pickup_trial" => Mode::PickupTrial,
                    _ => return Err(ConfigError::new(key, "expected mission or pickup_trial")),
                }
            }
            "mission.seed" => {
                self.world.seed = v
                    .parse()
                    .map_err(|_| ConfigError::new(key, format!("expected an integer seed, got `{v}`")))?
            }
            "mission.standoff" => self.standoff = f(v)?,
            "mission.frame_period" => self.frame_period = f(v)?,

            "world.arena_width" => {
                let w = f(v)?;
                self.world.arena.max.x = self.world.arena.min.x + w;
            }
            "world.arena_height" => {
                let h = f(v)?;
                self.world.arena.max.y = self.world.arena.min.y + h;
            }
            "world.dt" => self.world.dt = f(v)?,
            "world.robot_radius" => self.world.robot_radius = f(v)?,
            "world.brush_offset" => self.world.brush_offset = f(v)?,
            "world.object_size" => self.world.object_size = f(v)?,
            "world.start_x" => self.start = Pose2D::new(f(v)?, self.start.y(), self.start.theta()),
            "world.start_y" => self.start = Pose2D::new(self.start.x(), f(v)?, self.start.theta()),
            "world.start_theta" => self.start = self.start.with_theta(f(v)?),
            "world.layout" => {
                self.layout = match v {
                    "random" => Layout::Random,
                    "explicit" => Layout::Explicit,
                    _ => return Err(ConfigError::new(key, "expected random or explicit")),
                }
            }
            "world.n_trash" => self.layout_spec.n_trash = parse_usize(key, v)?,
            "world.min_obstacles" => self.layout_spec.min_obstacles = parse_usize(key, v)?,
            "world.max_obstacles" => self.layout_spec.max_obstacles = parse_usize(key, v)?,
            "world.obstacle_min_side" => self.layout_spec.obstacle_min_side = f(v)?,
            "world.obstacle_max_side" => self.layout_spec.obstacle_max_side = f(v)?,
            "world.trash_clearance" => self.layout_spec.trash_clearance = f(v)?,
            "world.trash_spacing" => self.layout_spec.trash_spacing = f(v)?,
            "world.start_clearance" => self.layout_spec.start_clearance = f(v)?,
            "world.obstacles" => {
                self.world.obstacles = parse_tuples(key, v, 4)?
                    .into_iter()
                    .map(|t| Rect::new(t[0], t[1], t[2], t[3]))
                    .collect()
            }
            "world.trash" => {
                self.world.trash = parse_tuples(key, v, 3)?
                    .into_iter()
                    .map(|t| TrashSpec { position: GroundPoint::new(t[0], t[1]), mass: t[2] })
                    .collect()
            }

            "noise.profile" => {
                self.noise = match v {
                    "zero" => NoiseModel::zero(),
                    "default" => NoiseModel::default(),
                    _ => return Err(ConfigError::new(key, "expected zero or default")),
                }
            }
            "noise.odom_heading_bias" => self.noise.odom_heading_bias = f(v)?,
            "noise.odom_noise_sigma" => self.noise.odom_noise_sigma = f(v)?,
            "noise.detect_pos_sigma" => self.noise.detect_pos_sigma = f(v)?,
            "noise.detect_pixel_sigma" => self.noise.detect_pixel_sigma = f(v)?,
            "noise.p_detect_slope" => self.noise.p_detect.slope = f(v)?,
            "noise.p_detect_min" => self.noise.p_detect.min = f(v)?,
            "noise.p_detect_max" => self.noise.p_detect.max = f(v)?,
            "noise.confidence_base" => self.noise.confidence.base = f(v)?,
            "noise.confidence_slope" => self.noise.confidence.slope = f(v)?,
            "noise.confidence_sigma" => self.noise.confidence.sigma = f(v)?,
            "noise.false_positive_rate" => self.noise.false_positive_rate = f(v)?,
            "noise.detector_latency" => self.noise.detector_latency = f(v)?,
            "noise.comm_latency" => self.noise.comm_latency = f(v)?,
            "noise.comm_drop" => self.noise.comm_drop = f(v)?,
            "noise.loc_sigma" => self.noise.loc_sigma = f(v)?,
            "noise.loc_sigma_theta" => self.noise.loc_sigma_theta = f(v)?,

            "camera.image_width" => self.camera.image_width = f(v)?,
            "camera.image_height" => self.camera.image_height = f(v)?,
            "camera.hfov" => self.camera.hfov = f(v)?,
            "camera.vfov" => self.camera.vfov = f(v)?,
            "camera.mount_height" => self.camera.mount_height = f(v)?,
            "camera.forward_offset" => self.camera.forward_offset = f(v)?,

            "filter.cluster_radius" => self.filter.cluster_radius = f(v)?,
            "filter.accept_threshold" => {
                self.filter.accept_threshold = v
                    .parse()
                    .map_err(|_| ConfigError::new(key, format!("expected an integer, got `{v}`")))?
            }

            "pickup.timeout" => self.pickup.timeout = f(v)?,
            "pickup.confidence_threshold" => self.pickup.confidence_threshold = f(v)?,
            "pickup.overshoot" => self.pickup.overshoot = f(v)?,
            "pickup.spin_rate" => self.pickup.spin_rate = f(v)?,
            "pickup.drive_speed" => self.pickup.drive_speed = f(v)?,
            "pickup.brush_halfwidth" => self.pickup.brush_halfwidth = f(v)?,
            "pickup.activation_radius" => self.pickup.activation_radius = f(v)?,
            "pickup.activation_tolerance" => self.pickup.activation_tolerance = f(v)?,
            "pickup.align_tolerance" => self.pickup.align_tolerance = f(v)?,
            "pickup.heading_gain" => self.pickup.heading_gain = f(v)?,
            "pickup.reidentify" => self.pickup.reidentify = parse_bool(key, v)?,

            "survey.lane_spacing" => self.survey.lane_spacing = f(v)?,
            "survey.footprint" => self.survey.footprint = f(v)?,
            "survey.frame_spacing" => self.survey.frame_spacing = f(v)?,
            "survey.speed" => self.survey.speed = f(v)?,
            "survey.altitude" => self.survey.altitude = f(v)?,
            "noise.aerial_false_positive_rate" => self.noise.aerial_false_positive_rate = f(v)?,

            "mapping.resolution" => self.mapping.resolution = f(v)?,
            "mapping.lane_spacing" => self.mapping.lane_spacing = f(v)?,
            "mapping.beams" => self.mapping.beams = parse_usize(key, v)?,
            "mapping.max_range" => self.mapping.max_range = f(v)?,
            "mapping.element" => {
                self.mapping.element = StructuringElement::square(parse_usize(key, v)?)
                    .ok_or_else(|| ConfigError::new(key, "element side must be odd and positive"))?
            }

            "nav.speed" => self.nav.speed = f(v)?,
            "nav.turn_rate" => self.nav.turn_rate = f(v)?,
            "nav.heading_tolerance" => self.nav.heading_tolerance = f(v)?,
            "nav.heading_gain" => self.nav.heading_gain = f(v)?,
            "nav.reach_factor" => self.nav.reach_factor = f(v)?,
            "nav.stuck_time" => self.nav.stuck_time = f(v)?,
            "nav.stuck_distance" => self.nav.stuck_distance = f(v)?,
            "nav.inflation_margin" => self.nav.inflation_margin = f(v)?,
            "nav.leg_time_limit" => self.nav.leg_time_limit = f(v)?,
            "nav.recoveries" => self.nav.recoveries = parse_usize(key, v)?,

            "trial.distance" => self.trial.distance = f(v)?,
            "trial.heading_spread" => self.trial.heading_spread = f(v)?,
            "trial.expected_sigma" => self.trial.expected_sigma = f(v)?,

            _ => return Err(ConfigError::new(key, "unknown key")),
        }
        Ok(())
    }

    /// Parses a scenario on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::new("", format!("expected `key = value`, got `{line}`")).at_line(i + 1)
            })?;
            self.set(key.trim(), value).map_err(|e| e.at_line(i + 1))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(&text)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok { Ok(()) } else { Err(ConfigError::new(key, msg)) }
        };
        let mut world = self.world.clone();
        world.trash.clear();
        world.obstacles.clear();
        world.validate().map_err(|e| ConfigError::new("world", e.to_string()))?;
        if self.layout == Layout::Explicit {
            self.world.validate().map_err(|e| ConfigError::new("world", e.to_string()))?;
        } else {
            let s = &self.layout_spec;
            check(s.min_obstacles <= s.max_obstacles, "world.max_obstacles", "must be at least min_obstacles")?;
            check(
                s.obstacle_min_side > 0.0 && s.obstacle_min_side <= s.obstacle_max_side,
                "world.obstacle_min_side",
                "must be positive and at most obstacle_max_side",
            )?;
            check(
                s.obstacle_max_side + 0.6 < self.world.arena.width().min(self.world.arena.height()),
                "world.obstacle_max_side",
                "obstacles do not fit in the arena",
            )?;
        }
        check(
            world.pose_is_free(self.start.position()) || self.mode == Mode::PickupTrial,
            "world.start_x",
            "start pose is outside the arena",
        )?;
        self.noise.validate().map_err(|e| ConfigError::new("noise", e.to_string()))?;
        self.camera.validate().map_err(|e| ConfigError::new("camera", e.to_string()))?;
        self.filter.validate().map_err(|e| ConfigError::new("filter", e.to_string()))?;
        self.pickup.validate().map_err(|e| ConfigError::new("pickup", e.to_string()))?;
        self.survey.validate().map_err(|e| ConfigError::new("survey", e.to_string()))?;
        let m = &self.mapping;
        check(m.resolution > 0.0, "mapping.resolution", "must be positive")?;
        check(m.lane_spacing > 0.0, "mapping.lane_spacing", "must be positive")?;
        check(m.beams > 0, "mapping.beams", "must be positive")?;
        check(m.max_range > 0.0, "mapping.max_range", "must be positive")?;
        let n = &self.nav;
        for (key, v) in [
            ("nav.speed", n.speed),
            ("nav.turn_rate", n.turn_rate),
            ("nav.heading_tolerance", n.heading_tolerance),
            ("nav.heading_gain", n.heading_gain),
            ("nav.reach_factor", n.reach_factor),
            ("nav.stuck_time", n.stuck_time),
            ("nav.stuck_distance", n.stuck_distance),
            ("nav.leg_time_limit", n.leg_time_limit),
        ] {
            check(v > 0.0, key, "must be positive")?;
        }
        check(n.inflation_margin >= 0.0, "nav.inflation_margin", "must be non-negative")?;
        check(self.standoff > 0.0, "mission.standoff", "must be positive")?;
        check(self.frame_period > 0.0, "mission.frame_period", "must be positive")?;
        if self.mode == Mode::PickupTrial {
            check(
                self.trial.distance > 0.0 && self.trial.distance <= self.pickup.reach(),
                "trial.distance",
                "must be positive and within the pickup activation radius",
            )?;
            check(self.trial.heading_spread >= 0.0, "trial.heading_spread", "must be non-negative")?;
            check(self.trial.expected_sigma >= 0.0, "trial.expected_sigma", "must be non-negative")?;
        }
        Ok(())
    }
}
