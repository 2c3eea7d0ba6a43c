//! Mission orchestration, scenario configs and batch experiments.

mod batch;
mod config;
mod follow;
mod report;
mod run;

pub use batch::{
    parse_seeds, parse_sweep, run_batch, AggregateRow, BatchResult, RunRecord, SweepSpec,
};
pub use config::{
    ConfigError, Layout, LoadError, MappingConfig, MissionConfig, Mode, NavConfig, TrialConfig,
};
pub use follow::{corner_points, face, FollowStatus, PathFollower};
pub use report::{match_hypotheses, MissionReport, Outcome, TrashResult, MATCH_RADIUS};
pub use run::{
    build_map, build_world, run_mission, simulate, write_outputs, Artifacts, MissionError,
    MissionRun, MAP_FILE,
};
