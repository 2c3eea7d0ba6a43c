use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use litter_sim::gridmap::save_map;
use litter_sim::mission::{
    build_map, build_world, parse_seeds, parse_sweep, run_batch, run_mission, ConfigError,
    LoadError, MissionConfig, MissionError, SweepSpec,
};
use litter_sim::par::Execution;

#[derive(Parser)]
#[command(name = "litter-sim", version, about = "Seeded litter-collection mission simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mission and write the report, map and dumps.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seed range over a parameter grid and write runs.csv.
    Batch {
        #[arg(long)]
        config: PathBuf,
        /// `a..b`, `a..=b` or a single seed.
        #[arg(long)]
        seeds: String,
        /// `key=v1,v2,...`; repeat for a grid.
        #[arg(long)]
        sweep: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Run on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Run the mapping phase only and write the map file.
    Map {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io { .. } => Failure::Io(e.to_string()),
            LoadError::Config(c) => c.into(),
        }
    }
}

impl From<MissionError> for Failure {
    fn from(e: MissionError) -> Self {
        match e {
            MissionError::Config(c) => c.into(),
            other => Failure::Io(other.to_string()),
        }
    }
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<MissionConfig, Failure> {
    let mut cfg = MissionConfig::load(path)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, seed, out } => {
            let cfg = load(&config, seed)?;
            let report = run_mission(&cfg, Some(&out))?;
            println!(
                "seed {}: {} of {} collected, success = {}",
                report.seed,
                report.n_collected(),
                report.n_trash(),
                report.success
            );
        }
        Command::Batch { config, seeds, sweep, out, sequential } => {
            let cfg = load(&config, None)?;
            let seeds = parse_seeds(&seeds)?;
            let sweeps = sweep
                .iter()
                .map(|s| parse_sweep(s))
                .collect::<Result<Vec<SweepSpec>, _>>()?;
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            let result = run_batch(&cfg, &seeds, &sweeps, exec)?;
            result.write(&out).map_err(|e| Failure::Io(e.to_string()))?;
            for a in &result.aggregates {
                let point: Vec<String> = result
                    .keys
                    .iter()
                    .zip(&a.point)
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect();
                println!("{} runs={} success_rate={:.4}", point.join(" "), a.runs, a.success_rate());
            }
        }
        Command::Map { config, seed, out } => {
            let cfg = load(&config, seed)?;
            let world = build_world(&cfg)?;
            let grid = build_map(&cfg, &world);
            if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Failure::Io(e.to_string()))?;
            }
            save_map(&grid, &out).map_err(|e| Failure::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Io(m)) => {
            eprintln!("I/O error: {m}");
            ExitCode::from(2)
        }
    }
}
