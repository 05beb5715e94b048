use std::fs;
use std::path::Path;

use super::Discretization;
use crate::error::{Error, Result};
use crate::grid::{write_field, GridSpec, ScalarField};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProducerSeries {
    pub name: String,
    pub oil: Vec<f64>,
    pub water: Vec<f64>,
    pub water_cut: Vec<f64>,
    pub bhp: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InjectorSeries {
    pub name: String,
    pub rate: f64,
    pub bhp: Vec<f64>,
}

/// Water accounting accumulated from the simulator's own fluxes, bbl.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MassBalance {
    pub initial_water_in_place: f64,
    pub final_water_in_place: f64,
    pub cumulative_injected: f64,
    pub cumulative_produced_water: f64,
    pub cumulative_produced_oil: f64,
    /// Total saturation mass removed or added by bound clamping (should be ~0).
    pub clamped: f64,
}

impl MassBalance {
    /// `|injected - produced - change in place| / injected`.
    pub fn relative_error(&self) -> f64 {
        let delta = self.final_water_in_place - self.initial_water_in_place;
        let err = self.cumulative_injected - self.cumulative_produced_water - delta;
        err.abs() / self.cumulative_injected.abs().max(f64::MIN_POSITIVE)
    }
}

/// Last explicit step of a report interval: enough to re-evaluate the
/// discrete residuals exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub pressure: Vec<f64>,
    pub sw_old: Vec<f64>,
    pub sw_new: Vec<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub pressure: Vec<ScalarField>,
    pub sw: Vec<ScalarField>,
    /// Producers in well-list order.
    pub producers: Vec<ProducerSeries>,
    pub injectors: Vec<InjectorSeries>,
    pub balance: MassBalance,
    /// Macro steps taken in each report interval.
    pub macro_steps: Vec<usize>,
    pub last_steps: Vec<Option<StepRecord>>,
}

impl SimulationResult {
    pub(crate) fn empty(disc: &Discretization<'_>, reports: usize) -> Self {
        let mut producers = Vec::new();
        let mut injectors = Vec::new();
        for w in &disc.wells {
            if let Some(bhp) = w.bhp() {
                producers.push(ProducerSeries {
                    name: w.spec.name.clone(),
                    bhp,
                    ..Default::default()
                });
            } else {
                injectors.push(InjectorSeries {
                    name: w.spec.name.clone(),
                    rate: w.rate().unwrap_or(0.0),
                    bhp: Vec::with_capacity(reports),
                });
            }
        }
        SimulationResult {
            grid: disc.res.grid,
            times: Vec::with_capacity(reports),
            pressure: Vec::with_capacity(reports),
            sw: Vec::with_capacity(reports),
            producers,
            injectors,
            balance: MassBalance::default(),
            macro_steps: Vec::with_capacity(reports),
            last_steps: Vec::with_capacity(reports),
        }
    }

    pub(crate) fn record(&mut self, disc: &Discretization<'_>, t: f64, p: &[f64], sw: &[f64], macro_steps: usize, last: Option<StepRecord>) {
        let lt = disc.total_mobility(sw);
        let (mut pi, mut ii) = (0, 0);
        for w in &disc.wells {
            if w.bhp().is_some() {
                let (oil, water) = w.producer_rates(&disc.res.relperm, &disc.res.fluid, p, sw);
                let series = &mut self.producers[pi];
                series.oil.push(oil);
                series.water.push(water);
                series.water_cut.push(water_cut(oil, water));
                pi += 1;
            } else {
                self.injectors[ii].bhp.push(w.injector_bhp(&lt, p));
                ii += 1;
            }
        }
        self.times.push(t);
        self.pressure.push(ScalarField {
            grid: self.grid,
            values: p.to_vec(),
        });
        self.sw.push(ScalarField {
            grid: self.grid,
            values: sw.to_vec(),
        });
        self.macro_steps.push(macro_steps);
        self.last_steps.push(last);
    }

    pub fn report_count(&self) -> usize {
        self.times.len()
    }

    pub fn producer(&self, name: &str) -> Option<&ProducerSeries> {
        self.producers.iter().find(|p| p.name == name)
    }

    /// Write `pressure_NNN.txt`, `sw_NNN.txt` per report step and `rates.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (k, (p, s)) in self.pressure.iter().zip(&self.sw).enumerate() {
            write_field(&dir.join(format!("pressure_{:03}.txt", k + 1)), p)?;
            write_field(&dir.join(format!("sw_{:03}.txt", k + 1)), s)?;
        }
        self.write_rates_csv(&dir.join("rates.csv"))
    }

    /// Rates CSV: `time,well,oil_stb_d,water_stb_d,water_cut,bhp_psia`.
    /// Production is positive; injector rows carry the injected water as a
    /// negative water rate.
    pub fn write_rates_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["time", "well", "oil_stb_d", "water_stb_d", "water_cut", "bhp_psia"])?;
        for (k, t) in self.times.iter().enumerate() {
            for p in &self.producers {
                w.write_record([
                    t.to_string(),
                    p.name.clone(),
                    p.oil[k].to_string(),
                    p.water[k].to_string(),
                    p.water_cut[k].to_string(),
                    p.bhp.to_string(),
                ])?;
            }
            for i in &self.injectors {
                w.write_record([
                    t.to_string(),
                    i.name.clone(),
                    "0".to_string(),
                    (-i.rate).to_string(),
                    "0".to_string(),
                    i.bhp[k].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn water_cut(oil: f64, water: f64) -> f64 {
    let total = oil + water;
    if total > 0.0 {
        water / total
    } else {
        0.0
    }
}
