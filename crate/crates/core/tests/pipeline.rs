use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};

use histmatch::inversion::Quantity;
use histmatch::pipeline::io::{read_observations_csv, write_observations_csv};
use histmatch::pipeline::{data_layout, read_toml, InversionSummary, Manifest, PipelineConfig, Run};
use histmatch::Error;

const TINY: &str = r#"
seed = 5
[grid]
nx = 8
ny = 8
nz = 1
dx = 50.0
dy = 50.0
dz = 20.0
[wells]
injection_rate = 150.0
[sim]
total_time = 600.0
report_step = 100.0
initial_pressure = 1000.0
initial_sw = 0.2
saturation_substeps = 4
[prior]
rank = 6
[prior.kernel]
variance = 0.5
corr_x = 3.0
corr_y = 3.0
[surrogate]
runs = 3
[inversion]
members = 12
max_iter = 3
"#;

fn tiny() -> PipelineConfig {
    PipelineConfig::from_toml(TINY).unwrap()
}

#[test]
fn config_round_trips_and_hash_ignores_output() {
    let cfg = tiny();
    let again = PipelineConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, again);
    let mut moved = cfg.clone();
    moved.output = "elsewhere".into();
    assert_eq!(cfg.hash().unwrap(), moved.hash().unwrap());
    let mut reseeded = cfg.clone();
    reseeded.seed += 1;
    assert_ne!(cfg.hash().unwrap(), reseeded.hash().unwrap());
    assert_eq!(cfg.assimilation_steps(), 4);
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    assert!(matches!(PipelineConfig::from_toml(&format!("{TINY}\nbogus = 1\n")), Err(Error::Config(_))));
    let bad = TINY.replace("members = 12", "members = 1");
    assert!(matches!(PipelineConfig::from_toml(&bad), Err(Error::Config(_))));
    assert!(matches!(
        PipelineConfig::load(Path::new("/nonexistent/cfg.toml")),
        Err(Error::MissingArtifact(_))
    ));
}

#[test]
fn data_layout_orders_producers_then_injectors() {
    let cfg = tiny();
    let wells = cfg.wells.wells(&cfg.grid).unwrap();
    let meta = data_layout(&cfg.grid, &wells, 2);
    assert_eq!(meta.len(), 2 * (4 * 3 + 4));
    assert_eq!(meta[0].well, "P1");
    assert_eq!(meta[0].quantity, Quantity::OilRate);
    assert_eq!(meta[2].quantity, Quantity::WaterCut);
    assert_eq!(meta[12].well, "I1");
    assert_eq!(meta[12].quantity, Quantity::InjectorBhp);
    assert_eq!(meta[16].step, 1);
}

#[test]
fn stages_refuse_to_run_out_of_order() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(tiny(), dir.path()).unwrap();
    assert!(matches!(run.simulate(), Err(Error::MissingArtifact(_))));
    run.gen_prior().unwrap();
    assert!(matches!(run.invert(), Err(Error::Config(_))));

    // A different config may not reuse the directory.
    let mut other = tiny();
    other.seed = 6;
    let stale = Run::new(other, dir.path()).unwrap();
    assert!(matches!(stale.simulate(), Err(Error::Config(_))));

    // Tampered upstream artifacts are detected.
    run.simulate().unwrap();
    fs::write(dir.path().join("prior/truth.csv"), "member,u0\n0,1\n").unwrap();
    assert!(matches!(run.invert(), Err(Error::Config(_))));
}

#[test]
fn zero_iterations_return_the_prior_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.inversion.max_iter = 0;
    let run = Run::new(cfg, dir.path()).unwrap();
    run.gen_prior().unwrap();
    run.simulate().unwrap();
    run.invert().unwrap();
    let prior = fs::read(dir.path().join("prior/ensemble.csv")).unwrap();
    let post = fs::read(dir.path().join("posterior/ensemble.csv")).unwrap();
    assert_eq!(prior, post);
    let s: InversionSummary = read_toml(&dir.path().join("posterior/summary.toml")).unwrap();
    assert_eq!(s.iterations, 0);
}

#[test]
fn full_pipeline_with_surrogate_forward() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.inversion.forward = histmatch::pipeline::ForwardMode::Surrogate;
    let run = Run::new(cfg, dir.path()).unwrap();
    run.gen_prior().unwrap();
    run.simulate().unwrap();
    assert!(run.invert().is_err(), "surrogate forward needs train-ccr first");
    run.run_all().unwrap();

    let m = Manifest::load(dir.path()).unwrap();
    let names: Vec<&str> = m.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["gen-prior", "simulate", "train-ccr", "invert", "metrics", "plot-data"]);
    for stage in &names {
        m.require(dir.path(), run.config_hash(), stage).unwrap();
    }
    let s: InversionSummary = read_toml(&dir.path().join("posterior/summary.toml")).unwrap();
    assert!(s.iterations >= 1 && s.iterations <= 3);
    let posterior = fs::read_to_string(dir.path().join("metrics/posterior.csv")).unwrap();
    assert_eq!(posterior.lines().count(), 13);
    let envelopes = fs::read_to_string(dir.path().join("plots/envelopes.csv")).unwrap();
    assert_eq!(envelopes.lines().count(), 1 + 4 * 16);
}

#[test]
fn observations_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(tiny(), dir.path()).unwrap();
    run.gen_prior().unwrap();
    run.simulate().unwrap();
    let path = dir.path().join("observations.csv");
    let (obs, truth) = read_observations_csv(&path).unwrap();
    assert_eq!(obs.steps, 4);
    assert!(obs.gamma.iter().all(|g| *g > 0.0));
    let copy = dir.path().join("copy.csv");
    write_observations_csv(&copy, &obs, &truth).unwrap();
    let (again, truth2) = read_observations_csv(&copy).unwrap();
    assert_eq!(again.y, obs.y);
    assert_eq!(again.meta, obs.meta);
    assert_eq!(truth2, truth);
}

#[test]
fn cli_reports_machine_readable_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_histmatch"))
        .args(["--config", "/nonexistent.toml", "--out"])
        .arg(dir.path())
        .arg("gen-prior")
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().last().unwrap();
    let record: serde_json::Value = serde_json::from_str(line).unwrap();
    assert_eq!(record["error"], "missing_artifact");

    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let run_dir = dir.path().join("run");
    let status = |cmd: &str| {
        Command::new(env!("CARGO_BIN_EXE_histmatch"))
            .args(["--config", cfg.to_str().unwrap(), "--out", run_dir.to_str().unwrap(), "--seed", "9", cmd])
            .env("RUST_LOG", "warn")
            .stderr(Stdio::null())
            .status()
            .unwrap()
            .success()
    };
    assert!(!status("metrics"));
    assert!(status("gen-prior"));
    assert!(status("simulate"));
    let config = fs::read_to_string(run_dir.join("config.toml")).unwrap();
    assert!(config.contains("seed = 9"));
}
