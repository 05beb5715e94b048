//! Command-line front end of the twin-experiment pipeline.
//!
//! ```text
//! histmatch --config examples/config/twin.toml --out run gen-prior
//! histmatch --config examples/config/twin.toml --out run simulate
//! histmatch --config examples/config/twin.toml --out run invert
//! ```
//!
//! Failures print one JSON error record on stderr and exit nonzero.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use histmatch::pipeline::{PipelineConfig, Run};

#[derive(Parser)]
#[command(version, about = "Reservoir history matching pipeline")]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run directory; defaults to the configured output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample the prior ensemble and the truth.
    GenPrior,
    /// Simulate the truth and draw noisy observations.
    Simulate,
    /// Build the well-rate dataset and fit the CCR surrogate.
    TrainCcr,
    /// Run adaptive regularized ensemble Kalman inversion.
    Invert,
    /// RMSE and SSIM of the prior and posterior ensembles.
    Metrics,
    /// Percentile envelopes, misfit history and field maps.
    PlotData,
    /// Every stage in order.
    All,
}

fn run(cli: &Cli) -> histmatch::Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| histmatch::Error::Config("--config is required".into()))?;
    let mut config = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let dir = cli.out.clone().unwrap_or_else(|| config.output.clone());
    let run = Run::new(config, dir)?;

    let job = || match cli.command {
        Command::GenPrior => run.gen_prior(),
        Command::Simulate => run.simulate(),
        Command::TrainCcr => run.train_ccr(),
        Command::Invert => run.invert(),
        Command::Metrics => run.metrics(),
        Command::PlotData => run.plot_data(),
        Command::All => run.run_all(),
    };
    match cli.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| histmatch::Error::Config(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
