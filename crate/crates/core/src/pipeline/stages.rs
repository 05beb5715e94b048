//! The six pipeline stages over one run directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ForwardMode, PipelineConfig};
use super::forward::{extract_data, synthesize_observations, ForwardModel};
use super::io::{read_ensemble_csv, read_observations_csv, write_ensemble_csv, write_observations_csv};
use super::manifest::Manifest;
use crate::error::{Error, Result};
use crate::grid::{read_field, write_field, ScalarField};
use crate::inversion::{ensemble_mean, run_inversion, InversionConfig, Locations, Termination};
use crate::metrics::{percentile_curves, rmse, ssim, write_metrics_csv, MemberMetrics};
use crate::rng::Stream;
use crate::surrogate::{build_features, generate_labels, train_surrogate, write_dataset_csv, FeatureSchema, RatesDataset, Surrogate};

const TIMINGS_FILE: &str = "timings.csv";

/// Bookkeeping of a finished inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionSummary {
    pub termination: Termination,
    pub iterations: usize,
    pub s: f64,
    pub alpha_inverse_sum: f64,
    pub map_member: usize,
    pub prior_misfit_mean: f64,
    pub posterior_misfit_mean: f64,
}

/// Ensemble averages written by the metrics stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub prior_rmse_mean: f64,
    pub posterior_rmse_mean: f64,
    /// Posterior over prior mean RMSE.
    pub rmse_ratio: f64,
    pub prior_phi_ssim_mean: f64,
    pub posterior_phi_ssim_mean: f64,
    pub map_member: usize,
    pub map_rmse: f64,
    pub map_ssim: f64,
    pub map_phi_ssim: f64,
    /// MAP over prior-mean φ(SSIM).
    pub map_phi_ratio: f64,
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// A configuration bound to its run directory.
pub struct Run {
    pub config: PipelineConfig,
    pub dir: PathBuf,
    hash: String,
}

impl Run {
    pub fn new(config: PipelineConfig, dir: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let hash = config.hash()?;
        Ok(Run {
            config,
            dir: dir.into(),
            hash,
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn mkdirs(&self, sub: &[&str]) -> Result<()> {
        for s in sub {
            let p = self.path(s);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    fn manifest_requiring(&self, stages: &[&str]) -> Result<Manifest> {
        let m = Manifest::load(&self.dir)?;
        for s in stages {
            m.require(&self.dir, &self.hash, s)?;
        }
        Ok(m)
    }

    fn finish(&self, mut manifest: Manifest, stage: &str, files: &[String], started: Instant) -> Result<()> {
        manifest.record(&self.dir, stage, files)?;
        manifest.save(&self.dir)?;
        // Wall-clock lives outside the manifest so artifacts stay reproducible.
        let path = self.path(TIMINGS_FILE);
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        writeln!(f, "{stage},{:.3}", started.elapsed().as_secs_f64()).map_err(|e| Error::io(&path, e))?;
        log::info!("{stage} finished in {:.2?}", started.elapsed());
        Ok(())
    }

    fn forward_model(&self, manifest: &Manifest) -> Result<ForwardModel> {
        let surrogate = match self.config.inversion.forward {
            ForwardMode::Fvm => None,
            ForwardMode::Surrogate => {
                manifest.require(&self.dir, &self.hash, "train-ccr")?;
                Some(Surrogate::load(&self.path("surrogate"))?)
            }
        };
        ForwardModel::new(&self.config, surrogate)
    }

    /// Prior ensemble, the hidden truth and a copy of the resolved config.
    pub fn gen_prior(&self) -> Result<()> {
        let started = Instant::now();
        self.mkdirs(&["", "prior", "truth"])?;
        let manifest = Manifest::open_or_new(&self.dir, &self.hash)?;
        let fm = ForwardModel::new(&self.config, None)?;
        let cfg = &self.config;

        let ensemble = fm.prior.sample(cfg.inversion.members, cfg.seed);
        let truth = fm.prior.draw(cfg.seed, Stream::Truth, 0);
        let (perm, poro) = fm.prior.decode(&truth)?;

        let config_path = self.path("config.toml");
        fs::write(&config_path, cfg.to_toml()?).map_err(|e| Error::io(&config_path, e))?;
        write_ensemble_csv(&self.path("prior/ensemble.csv"), "u", &ensemble)?;
        write_ensemble_csv(&self.path("prior/truth.csv"), "u", &[truth])?;
        write_field(&self.path("truth/perm.txt"), &perm)?;
        write_field(&self.path("truth/poro.txt"), &poro)?;
        let files = ["config.toml", "prior/ensemble.csv", "prior/truth.csv", "truth/perm.txt", "truth/poro.txt"];
        self.finish(manifest, "gen-prior", &files.map(String::from), started)
    }

    fn truth_params(&self) -> Result<Vec<f64>> {
        read_ensemble_csv(&self.path("prior/truth.csv"))?
            .pop()
            .ok_or_else(|| Error::Format("prior/truth.csv is empty".into()))
    }

    /// Full-horizon truth run and noisy observations over the assimilation
    /// window.
    pub fn simulate(&self) -> Result<()> {
        let started = Instant::now();
        let manifest = self.manifest_requiring(&["gen-prior"])?;
        let fm = ForwardModel::new(&self.config, None)?;
        let truth = self.truth_params()?;
        let (_, out) = fm.simulate(&truth, &self.config.sim)?;
        out.write_rates_csv(&self.path("truth/rates.csv"))?;

        let steps = self.config.assimilation_steps();
        let d = extract_data(&out, &fm.wells, steps, None)?;
        let obs = synthesize_observations(&d, fm.layout(steps), steps, &self.config.observations, self.config.seed)?;
        write_observations_csv(&self.path("observations.csv"), &obs, &d)?;
        let files = ["truth/rates.csv", "observations.csv"];
        self.finish(manifest, "simulate", &files.map(String::from), started)
    }

    /// Simulator runs on fresh prior draws, their feature/label dataset and
    /// the fitted per-channel CCR models.
    pub fn train_ccr(&self) -> Result<()> {
        let started = Instant::now();
        let manifest = self.manifest_requiring(&["gen-prior"])?;
        self.mkdirs(&["surrogate"])?;
        let fm = ForwardModel::new(&self.config, None)?;
        let cfg = &self.config;
        let schema = FeatureSchema::from_wells(&fm.wells)?;

        let runs = (0..cfg.surrogate.runs)
            .into_par_iter()
            .map(|r| {
                let u = fm.prior.draw(cfg.seed, Stream::Training, r);
                let (res, out) = fm.simulate(&u, &cfg.sim).map_err(|e| Error::Forward {
                    member: r,
                    source: Box::new(e),
                })?;
                let features = build_features(&out, &res.perm, &fm.wells, &schema)?;
                let labels = generate_labels(&out, &res, &schema)?;
                Ok((features.rows, labels))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = RatesDataset::new(schema);
        for (x, y) in runs {
            data.push_run(x, y)?;
        }
        write_dataset_csv(&self.path("surrogate/dataset.csv"), &data)?;
        let surrogate = train_surrogate(&data, &cfg.ccr)?;
        surrogate.save(&self.path("surrogate"))?;
        for ch in &surrogate.channels {
            log::info!("channel {}: validation relative L2 {:.4}", ch.name, ch.validation_rel_l2);
        }

        let mut files = vec!["surrogate/dataset.csv".to_string(), "surrogate/schema.txt".to_string()];
        files.extend(surrogate.channels.iter().map(|c| format!("surrogate/ccr_{}.txt", c.name)));
        self.finish(manifest, "train-ccr", &files, started)
    }

    /// aREKI from the prior ensemble against the stored observations.
    pub fn invert(&self) -> Result<()> {
        let started = Instant::now();
        let manifest = self.manifest_requiring(&["gen-prior", "simulate"])?;
        self.mkdirs(&["posterior"])?;
        let fm = self.forward_model(&manifest)?;
        let cfg = &self.config;
        let prior = read_ensemble_csv(&self.path("prior/ensemble.csv"))?;
        let (obs, _) = read_observations_csv(&self.path("observations.csv"))?;
        if obs.steps != cfg.assimilation_steps() {
            return Err(Error::Config("observations do not cover the configured assimilation window".into()));
        }

        let icfg = InversionConfig {
            max_iter: cfg.inversion.max_iter,
            localization: cfg.inversion.localization,
        };
        let cells = fm.prior.param_cells();
        let locations = cfg.inversion.localization.enabled.then(|| Locations {
            grid: &cfg.grid,
            param_cells: &cells,
        });
        let out = run_inversion(&prior, &obs, &|_, u: &[f64]| fm.data(u), &icfg, locations, cfg.seed)?;

        write_ensemble_csv(&self.path("posterior/ensemble.csv"), "u", &out.posterior)?;
        write_ensemble_csv(&self.path("posterior/prior_outputs.csv"), "d", &out.prior_outputs)?;
        write_ensemble_csv(&self.path("posterior/outputs.csv"), "d", &out.outputs)?;
        let log_path = self.path("posterior/areki.csv");
        let mut w = csv::Writer::from_path(&log_path)?;
        for r in &out.state.history {
            w.serialize(r)?;
        }
        if out.state.history.is_empty() {
            w.write_record(["iteration", "phi_mean", "phi_var", "alpha", "s"])?;
        }
        w.flush().map_err(|e| Error::io(&log_path, e))?;

        let map = out.map_index();
        let (map_perm, map_poro) = fm.prior.decode(&out.posterior[map])?;
        let (mean_perm, _) = fm.prior.decode(&out.mean())?;
        write_field(&self.path("posterior/map_perm.txt"), &map_perm)?;
        write_field(&self.path("posterior/map_poro.txt"), &map_poro)?;
        write_field(&self.path("posterior/mean_perm.txt"), &mean_perm)?;
        write_toml(
            &self.path("posterior/summary.toml"),
            &InversionSummary {
                termination: out.state.termination,
                iterations: out.state.n,
                s: out.state.s,
                alpha_inverse_sum: out.state.alpha_inverse_sum(),
                map_member: map,
                prior_misfit_mean: mean(&out.prior_misfits),
                posterior_misfit_mean: mean(&out.misfits),
            },
        )?;
        log::info!(
            "inversion stopped after {} iterations ({:?}), mean misfit {:.3e} -> {:.3e}",
            out.state.n,
            out.state.termination,
            mean(&out.prior_misfits),
            mean(&out.misfits)
        );
        let files = [
            "posterior/ensemble.csv",
            "posterior/prior_outputs.csv",
            "posterior/outputs.csv",
            "posterior/areki.csv",
            "posterior/map_perm.txt",
            "posterior/map_poro.txt",
            "posterior/mean_perm.txt",
            "posterior/summary.toml",
        ];
        self.finish(manifest, "invert", &files.map(String::from), started)
    }

    fn log_perm_fields(&self, fm: &ForwardModel, ensemble: &[Vec<f64>]) -> Result<Vec<ScalarField>> {
        ensemble
            .iter()
            .map(|u| ScalarField::new(self.config.grid, fm.prior.log_perm(u)?))
            .collect()
    }

    /// Per-member RMSE against the observations and SSIM of log-permeability
    /// against the truth, for the prior and posterior ensembles.
    pub fn metrics(&self) -> Result<()> {
        let started = Instant::now();
        let manifest = self.manifest_requiring(&["gen-prior", "simulate", "invert"])?;
        self.mkdirs(&["metrics"])?;
        let fm = ForwardModel::new(&self.config, None)?;
        let (obs, _) = read_observations_csv(&self.path("observations.csv"))?;
        let sigma: Vec<f64> = obs.gamma.iter().map(|g| g.sqrt()).collect();
        let truth = ScalarField::new(self.config.grid, fm.prior.log_perm(&self.truth_params()?)?)?;
        let summary: InversionSummary = read_toml(&self.path("posterior/summary.toml"))?;
        let ssim_cfg = &self.config.metrics.ssim;

        let rows = |ensemble: &str, outputs: &str| -> Result<Vec<MemberMetrics>> {
            let fields = self.log_perm_fields(&fm, &read_ensemble_csv(&self.path(ensemble))?)?;
            let outputs_rows = read_ensemble_csv(&self.path(outputs))?;
            if fields.len() != outputs_rows.len() {
                return Err(Error::Dimension(format!("{ensemble} and {outputs} have different member counts")));
            }
            fields
                .iter()
                .zip(&outputs_rows)
                .enumerate()
                .map(|(m, (f, g))| {
                    Ok(MemberMetrics::new(
                        m.to_string(),
                        rmse(&obs.y, g, &sigma, obs.steps)?,
                        ssim(&truth, f, ssim_cfg)?,
                    ))
                })
                .collect()
        };
        let prior = rows("prior/ensemble.csv", "posterior/prior_outputs.csv")?;
        let posterior = rows("posterior/ensemble.csv", "posterior/outputs.csv")?;
        write_metrics_csv(&self.path("metrics/prior.csv"), &prior)?;
        write_metrics_csv(&self.path("metrics/posterior.csv"), &posterior)?;

        let avg = |rows: &[MemberMetrics], f: fn(&MemberMetrics) -> f64| mean(&rows.iter().map(f).collect::<Vec<_>>());
        let map = posterior
            .get(summary.map_member)
            .ok_or_else(|| Error::Format("MAP member index out of range".into()))?;
        let prior_phi = avg(&prior, |r| r.phi_ssim);
        let prior_rmse = avg(&prior, |r| r.rmse);
        let post_rmse = avg(&posterior, |r| r.rmse);
        let out = MetricsSummary {
            prior_rmse_mean: prior_rmse,
            posterior_rmse_mean: post_rmse,
            rmse_ratio: post_rmse / prior_rmse,
            prior_phi_ssim_mean: prior_phi,
            posterior_phi_ssim_mean: avg(&posterior, |r| r.phi_ssim),
            map_member: summary.map_member,
            map_rmse: map.rmse,
            map_ssim: map.ssim,
            map_phi_ssim: map.phi_ssim,
            map_phi_ratio: map.phi_ssim / prior_phi,
        };
        write_toml(&self.path("metrics/summary.toml"), &out)?;
        log::info!(
            "RMSE {:.3} -> {:.3}, MAP phi(SSIM) {:.3} vs prior mean {:.3}",
            out.prior_rmse_mean,
            out.posterior_rmse_mean,
            out.map_phi_ssim,
            out.prior_phi_ssim_mean
        );
        let files = ["metrics/prior.csv", "metrics/posterior.csv", "metrics/summary.toml"];
        self.finish(manifest, "metrics", &files.map(String::from), started)
    }

    /// P10/P50/P90 data envelopes, the misfit history, log-permeability maps
    /// and a full-horizon forecast of the MAP member against the truth.
    pub fn plot_data(&self) -> Result<()> {
        let started = Instant::now();
        let manifest = self.manifest_requiring(&["gen-prior", "simulate", "invert"])?;
        self.mkdirs(&["plots"])?;
        let fm = ForwardModel::new(&self.config, None)?;
        let cfg = &self.config;
        let (obs, truth_data) = read_observations_csv(&self.path("observations.csv"))?;
        let ps = [10.0, 50.0, 90.0];
        let prior_env = percentile_curves(&read_ensemble_csv(&self.path("posterior/prior_outputs.csv"))?, &ps)?;
        let post_env = percentile_curves(&read_ensemble_csv(&self.path("posterior/outputs.csv"))?, &ps)?;

        let path = self.path("plots/envelopes.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "well", "quantity", "day", "observed", "sigma", "truth", "prior_p10", "prior_p50", "prior_p90", "post_p10",
            "post_p50", "post_p90",
        ])?;
        for (i, m) in obs.meta.iter().enumerate() {
            let mut rec = vec![
                m.well.clone(),
                m.quantity.as_str().to_string(),
                ((m.step + 1) as f64 * cfg.sim.report_step).to_string(),
                obs.y[i].to_string(),
                obs.gamma[i].sqrt().to_string(),
                truth_data[i].to_string(),
            ];
            rec.extend(prior_env.iter().chain(&post_env).map(|p| p[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = self.path("plots/misfit.csv");
        fs::copy(self.path("posterior/areki.csv"), &path).map_err(|e| Error::io(&path, e))?;

        let summary: InversionSummary = read_toml(&self.path("posterior/summary.toml"))?;
        let prior = read_ensemble_csv(&self.path("prior/ensemble.csv"))?;
        let posterior = read_ensemble_csv(&self.path("posterior/ensemble.csv"))?;
        let map = posterior
            .get(summary.map_member)
            .ok_or_else(|| Error::Format("MAP member index out of range".into()))?;
        let truth = self.truth_params()?;
        let field_mean = |ens: &[Vec<f64>]| -> Result<Vec<f64>> {
            Ok(ensemble_mean(&ens.iter().map(|u| fm.prior.log_perm(u)).collect::<Result<Vec<_>>>()?))
        };
        let columns = [
            fm.prior.log_perm(&truth)?,
            field_mean(&prior)?,
            field_mean(&posterior)?,
            fm.prior.log_perm(map)?,
        ];
        let path = self.path("plots/fields.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["i", "j", "k", "truth", "prior_mean", "posterior_mean", "map"])?;
        for cell in 0..cfg.grid.cell_count() {
            let (i, j, k) = cfg.grid.coords(cell);
            let mut rec = vec![i.to_string(), j.to_string(), k.to_string()];
            rec.extend(columns.iter().map(|c| c[cell].to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let (_, truth_run) = fm.simulate(&truth, &cfg.sim)?;
        let (_, map_run) = fm.simulate(map, &cfg.sim)?;
        let path = self.path("plots/forecast.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["well", "day", "truth_oil", "truth_water", "map_oil", "map_water"])?;
        for p in &truth_run.producers {
            let q = map_run
                .producer(&p.name)
                .ok_or_else(|| Error::Config(format!("producer {} missing from MAP run", p.name)))?;
            for (t, day) in truth_run.times.iter().enumerate() {
                w.write_record([
                    p.name.clone(),
                    day.to_string(),
                    p.oil[t].to_string(),
                    p.water[t].to_string(),
                    q.oil[t].to_string(),
                    q.water[t].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let files = ["plots/envelopes.csv", "plots/misfit.csv", "plots/fields.csv", "plots/forecast.csv"];
        self.finish(manifest, "plot-data", &files.map(String::from), started)
    }

    /// Every stage in order; surrogate training only when the inversion uses it.
    pub fn run_all(&self) -> Result<()> {
        self.gen_prior()?;
        self.simulate()?;
        if self.config.inversion.forward == ForwardMode::Surrogate {
            self.train_ccr()?;
        }
        self.invert()?;
        self.metrics()?;
        self.plot_data()
    }
}

/// Permeability map written by a stage, e.g. `posterior/map_perm.txt`.
pub fn read_run_field(run: &Run, rel: &str) -> Result<ScalarField> {
    read_field(&run.path(rel), &run.config.grid)
}
