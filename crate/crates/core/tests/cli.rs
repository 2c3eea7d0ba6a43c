use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_litter-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios/default.cfg")
        .display()
        .to_string()
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = sim(&["run", "--config", &scenario(), "--seed", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.txt", "map.gridmap", "trajectory.txt", "hypotheses.txt", "episodes.txt", "paths.txt", "ground_truth.txt"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.starts_with("seed = 5\n"));
    let map = fs::read(out.join("map.gridmap")).unwrap();
    assert!(map.starts_with(b"GRIDMAP v1"));
}

#[test]
fn batch_writes_runs_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("batch");
    let o = sim(&[
        "batch", "--config", &scenario(), "--seeds", "0..3",
        "--sweep", "world.n_trash=1,2", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("runs.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "seed,world.n_trash,success,n_collected,n_trash,mean_map_error_m,wall_time_s");
    assert_eq!(lines.len(), 7);
}

#[test]
fn sequential_and_parallel_batches_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let common = ["--config", &scenario(), "--seeds", "0..4", "--sweep", "world.n_trash=1,3"];
    let mut args = vec!["batch"];
    args.extend(common);
    let mut seq = args.clone();
    seq.extend(["--out", a.to_str().unwrap(), "--sequential"]);
    args.extend(["--out", b.to_str().unwrap()]);
    assert_eq!(sim(&seq).status.code(), Some(0));
    assert_eq!(sim(&args).status.code(), Some(0));
    assert_eq!(fs::read(a.join("runs.csv")).unwrap(), fs::read(b.join("runs.csv")).unwrap());
}

#[test]
fn map_command_writes_gridmap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/map.gridmap");
    let o = sim(&["map", "--config", &scenario(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let loaded = litter_sim::gridmap::load_map(&out).unwrap();
    assert_eq!((loaded.width(), loaded.height()), (160, 120));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "world.n_trash = 2\npickup.warp_drive = on\n").unwrap();
    let out = dir.path().join("o");
    let o = sim(&["run", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = sim(&["batch", "--config", &scenario(), "--seeds", "9..2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = sim(&["batch", "--config", &scenario(), "--seeds", "0..2", "--sweep", "noise.comm_drop=2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(sim(&["run", "--bogus"]).status.code(), Some(1));
}

#[test]
fn io_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    let out = dir.path().join("o");
    let o = sim(&["run", "--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    // output path below a regular file
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = sim(&["run", "--config", &scenario(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    assert_eq!(sim(&["--help"]).status.code(), Some(0));
}
