//! Observation layout and the parameter-to-data forward map.

use rand_distr::{Distribution, StandardNormal};

use super::config::{ForwardMode, ObservationConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, RelPermTable, WellKind, WellSpec};
use crate::inversion::{DatumMeta, Observations, Quantity};
use crate::prior::Prior;
use crate::rng::{self, Stream};
use crate::sim::{run_simulation, water_cut, Reservoir, SimConfig, SimulationResult};
use crate::surrogate::{build_features, FeatureSchema, Surrogate};

/// Producers then injectors, each sorted by name.
fn ordered(wells: &[WellSpec]) -> (Vec<&WellSpec>, Vec<&WellSpec>) {
    let mut prod: Vec<&WellSpec> = wells.iter().filter(|w| w.kind == WellKind::Producer).collect();
    let mut inj: Vec<&WellSpec> = wells.iter().filter(|w| w.kind == WellKind::Injector).collect();
    prod.sort_by(|a, b| a.name.cmp(&b.name));
    inj.sort_by(|a, b| a.name.cmp(&b.name));
    (prod, inj)
}

/// Metadata of the data vector: per step, producer `(oil, water, water cut)`
/// then injector BHP.
pub fn data_layout(grid: &GridSpec, wells: &[WellSpec], steps: usize) -> Vec<DatumMeta> {
    let (prod, inj) = ordered(wells);
    let mut meta = Vec::new();
    let cell = |w: &WellSpec| Some(grid.index(w.i, w.j, w.k_range.0));
    for step in 0..steps {
        for w in &prod {
            for q in [Quantity::OilRate, Quantity::WaterRate, Quantity::WaterCut] {
                meta.push(DatumMeta {
                    well: w.name.clone(),
                    step,
                    quantity: q,
                    cell: cell(w),
                });
            }
        }
        for w in &inj {
            meta.push(DatumMeta {
                well: w.name.clone(),
                step,
                quantity: Quantity::InjectorBhp,
                cell: cell(w),
            });
        }
    }
    meta
}

/// Data vector of the first `steps` reports of `result` in [`data_layout`]
/// order. `rates`, when given, replaces the producer rates (per step,
/// `(oil, water)` per producer in name order).
pub fn extract_data(result: &SimulationResult, wells: &[WellSpec], steps: usize, rates: Option<&[Vec<f64>]>) -> Result<Vec<f64>> {
    if result.report_count() < steps {
        return Err(Error::Dimension(format!(
            "result has {} report steps, {steps} requested",
            result.report_count()
        )));
    }
    let (prod, inj) = ordered(wells);
    let find_p = |name: &str| {
        result
            .producer(name)
            .ok_or_else(|| Error::Config(format!("producer {name} missing from result")))
    };
    let find_i = |name: &str| {
        result
            .injectors
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Config(format!("injector {name} missing from result")))
    };
    let mut out = Vec::with_capacity(steps * (3 * prod.len() + inj.len()));
    for t in 0..steps {
        for (n, w) in prod.iter().enumerate() {
            let (oil, water) = match rates {
                Some(r) => (r[t][2 * n], r[t][2 * n + 1]),
                None => {
                    let s = find_p(&w.name)?;
                    (s.oil[t], s.water[t])
                }
            };
            out.extend([oil, water, water_cut(oil, water)]);
        }
        for w in &inj {
            out.push(find_i(&w.name)?.bhp[t]);
        }
    }
    Ok(out)
}

pub fn noise_std(value: f64, quantity: Quantity, cfg: &ObservationConfig) -> f64 {
    let floor = match quantity {
        Quantity::OilRate => cfg.oil_floor,
        Quantity::WaterRate => cfg.water_floor,
        Quantity::WaterCut => cfg.water_cut_floor,
        Quantity::InjectorBhp => cfg.bhp_floor,
    };
    (cfg.relative_noise * value.abs()).max(floor)
}

/// Noisy observations of `truth`: `y = d + σ z`, `σ = max(rel |d|, floor)`.
pub fn synthesize_observations(
    truth: &[f64],
    meta: Vec<DatumMeta>,
    steps: usize,
    cfg: &ObservationConfig,
    seed: u64,
) -> Result<Observations> {
    let mut rng = rng::stream(seed, Stream::ObservationNoise, 0, 0);
    let mut y = Vec::with_capacity(truth.len());
    let mut gamma = Vec::with_capacity(truth.len());
    for (d, m) in truth.iter().zip(&meta) {
        let sd = noise_std(*d, m.quantity, cfg);
        let z: f64 = StandardNormal.sample(&mut rng);
        y.push(d + sd * z);
        gamma.push(sd * sd);
    }
    Observations::new(y, gamma, meta, steps)
}

/// Everything needed to turn a parameter vector into simulated data.
pub struct ForwardModel {
    pub prior: Prior,
    pub relperm: RelPermTable,
    pub config: PipelineConfig,
    pub wells: Vec<WellSpec>,
    pub surrogate: Option<Surrogate>,
}

impl ForwardModel {
    /// `surrogate` supplies producer rates in surrogate forward mode; without
    /// it, data requests in that mode fail.
    pub fn new(config: &PipelineConfig, surrogate: Option<Surrogate>) -> Result<Self> {
        Ok(ForwardModel {
            prior: Prior::new(config.grid, config.prior.clone())?,
            relperm: config.rock.table()?,
            wells: config.wells.wells(&config.grid)?,
            config: config.clone(),
            surrogate,
        })
    }

    pub fn reservoir(&self, params: &[f64]) -> Result<Reservoir> {
        let (perm, poro) = self.prior.decode(params)?;
        Ok(Reservoir {
            grid: self.config.grid,
            perm,
            poro,
            relperm: self.relperm.clone(),
            fluid: self.config.fluid,
            wells: self.wells.clone(),
        })
    }

    pub fn simulate(&self, params: &[f64], sim: &SimConfig) -> Result<(Reservoir, SimulationResult)> {
        let res = self.reservoir(params)?;
        let out = run_simulation(&res, sim)?;
        Ok((res, out))
    }

    pub fn layout(&self, steps: usize) -> Vec<DatumMeta> {
        data_layout(&self.config.grid, &self.wells, steps)
    }

    /// Data of a finished run under the configured forward mode.
    pub fn data_from(&self, res: &Reservoir, out: &SimulationResult, steps: usize) -> Result<Vec<f64>> {
        match (&self.config.inversion.forward, &self.surrogate) {
            (ForwardMode::Surrogate, Some(s)) => {
                let schema = FeatureSchema::from_wells(&self.wells)?;
                let table = build_features(out, &res.perm, &self.wells, &schema)?;
                let rates = s.infer_rates(&table)?;
                extract_data(out, &self.wells, steps, Some(&rates))
            }
            (ForwardMode::Surrogate, None) => Err(Error::Config("surrogate forward mode needs a trained surrogate".into())),
            (ForwardMode::Fvm, _) => extract_data(out, &self.wells, steps, None),
        }
    }

    /// Predicted data over the assimilation window.
    pub fn data(&self, params: &[f64]) -> Result<Vec<f64>> {
        let sim = self.config.assimilation_sim();
        let (res, out) = self.simulate(params, &sim)?;
        self.data_from(&res, &out, self.config.assimilation_steps())
    }
}
