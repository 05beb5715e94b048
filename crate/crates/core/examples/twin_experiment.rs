//! The full twin experiment from a config file: prior, truth, observations,
//! inversion, metrics and plot data under one run directory.
//!
//! ```text
//! cargo run --release --example twin_experiment -- [config.toml] [run-dir]
//! ```
//!
//! Defaults to `examples/config/twin.toml` and `target/twin`. Takes a few
//! minutes on one core.

use std::path::PathBuf;

use histmatch::pipeline::{read_toml, InversionSummary, MetricsSummary, PipelineConfig, Run};

fn main() -> histmatch::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/config/twin.toml"));
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("target/twin"));

    let run = Run::new(PipelineConfig::load(&config)?, &dir)?;
    run.run_all()?;

    let inv: InversionSummary = read_toml(&run.path("posterior/summary.toml"))?;
    let m: MetricsSummary = read_toml(&run.path("metrics/summary.toml"))?;
    println!("run directory        {}", dir.display());
    println!("iterations           {} ({:?})", inv.iterations, inv.termination);
    println!("sum of 1/alpha       {:.15}", inv.alpha_inverse_sum);
    println!("mean RMSE            {:.3} -> {:.3} (ratio {:.3})", m.prior_rmse_mean, m.posterior_rmse_mean, m.rmse_ratio);
    println!("phi(SSIM) prior mean {:.3}", m.prior_phi_ssim_mean);
    println!("phi(SSIM) MAP        {:.3} (member {}, ratio {:.3})", m.map_phi_ssim, m.map_member, m.map_phi_ratio);
    Ok(())
}
