//! Two-phase incompressible IMPES simulator.
//!
//! Each macro step solves the elliptic pressure equation at the current
//! saturation, then advances water saturation explicitly with first-order
//! upwind fractional flow. Macro steps are sized by the CFL bound and land
//! exactly on report times. Wells follow the Peaceman model.

mod pressure;
mod residual;
mod result;
mod saturation;
pub mod solver;
pub mod well;

pub use pressure::{solve_pressure, PressureSystem};
pub use residual::PdeResidual;
pub use result::{water_cut, InjectorSeries, MassBalance, ProducerSeries, SimulationResult, StepRecord};
pub use saturation::SaturationStep;
pub use solver::{CgSettings, CsrMatrix};
pub use well::{peaceman_rate, ResolvedWell};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interior_faces, Face, FluidModel, GridSpec, RelPermTable, ScalarField, WellSpec, FT3_PER_BBL};

/// Static description of one reservoir realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservoir {
    pub grid: GridSpec,
    /// Permeability, md.
    pub perm: ScalarField,
    /// Porosity, fraction.
    pub poro: ScalarField,
    pub relperm: RelPermTable,
    pub fluid: FluidModel,
    pub wells: Vec<WellSpec>,
}

impl Reservoir {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.fluid.validate()?;
        for field in [&self.perm, &self.poro] {
            if field.values.len() != self.grid.cell_count() {
                return Err(Error::Dimension("rock property length differs from grid".into()));
            }
        }
        if let Some(i) = self.perm.values.iter().position(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidField(format!("permeability at cell {i} is {}", self.perm.values[i])));
        }
        if let Some(i) = self.poro.values.iter().position(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidField(format!("porosity at cell {i} is {}", self.poro.values[i])));
        }
        for w in &self.wells {
            w.validate(&self.grid)?;
        }
        Ok(())
    }

    pub fn discretize(&self) -> Result<Discretization<'_>> {
        Discretization::new(self)
    }
}

/// Precomputed geometry for one reservoir: faces, resolved wells, pore volumes.
#[derive(Debug, Clone)]
pub struct Discretization<'a> {
    pub res: &'a Reservoir,
    pub faces: Vec<Face>,
    pub wells: Vec<ResolvedWell>,
    /// Pore volume per cell, bbl.
    pub pore_volume: Vec<f64>,
    max_fw_slope: f64,
}

impl<'a> Discretization<'a> {
    pub fn new(res: &'a Reservoir) -> Result<Self> {
        res.validate()?;
        let faces = interior_faces(&res.grid, &res.perm)?;
        let wells = well::resolve_wells(&res.wells, &res.grid, &res.perm);
        let bulk = res.grid.cell_volume() / FT3_PER_BBL;
        let pore_volume = res.poro.values.iter().map(|phi| phi * bulk).collect();
        Ok(Discretization {
            res,
            faces,
            wells,
            pore_volume,
            max_fw_slope: res.relperm.max_fractional_flow_slope(&res.fluid),
        })
    }

    pub fn cell_count(&self) -> usize {
        self.res.grid.cell_count()
    }

    pub fn total_mobility(&self, sw: &[f64]) -> Vec<f64> {
        sw.iter()
            .map(|&s| self.res.relperm.total_mobility(s, &self.res.fluid))
            .collect()
    }

    pub fn water_in_place(&self, sw: &[f64]) -> f64 {
        self.pore_volume.iter().zip(sw).map(|(pv, s)| pv * s).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Simulated horizon, days.
    pub total_time: f64,
    /// Report interval, days.
    pub report_step: f64,
    #[serde(default = "default_cfl")]
    pub max_cfl: f64,
    #[serde(default = "default_tol")]
    pub pressure_tol: f64,
    #[serde(default = "default_max_iter")]
    pub pressure_max_iter: usize,
    /// Cap on macro steps within one report interval.
    #[serde(default = "default_max_substeps")]
    pub max_substeps: usize,
    /// Explicit saturation steps taken on the total fluxes of one pressure
    /// solve. The last step of every report interval always follows a fresh
    /// pressure solve.
    #[serde(default = "default_saturation_substeps")]
    pub saturation_substeps: usize,
    pub initial_pressure: f64,
    pub initial_sw: f64,
}

fn default_cfl() -> f64 {
    0.9
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    5000
}
fn default_max_substeps() -> usize {
    100_000
}
fn default_saturation_substeps() -> usize {
    1
}

impl SimConfig {
    /// Baseline schedule: 3000 days reported every 100 days, 1000 psia, Sw = swc.
    pub fn baseline() -> Self {
        SimConfig {
            total_time: 3000.0,
            report_step: 100.0,
            max_cfl: default_cfl(),
            pressure_tol: default_tol(),
            pressure_max_iter: default_max_iter(),
            max_substeps: default_max_substeps(),
            saturation_substeps: default_saturation_substeps(),
            initial_pressure: 1000.0,
            initial_sw: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.report_step > 0.0 && self.total_time >= self.report_step) {
            return Err(Error::Config(format!(
                "need 0 < report_step <= total_time, got {} and {}",
                self.report_step, self.total_time
            )));
        }
        if !(self.max_cfl > 0.0 && self.max_cfl <= 1.0) {
            return Err(Error::Config(format!("max_cfl must lie in (0, 1], got {}", self.max_cfl)));
        }
        if !(self.pressure_tol > 0.0) || self.pressure_max_iter == 0 || self.max_substeps == 0 || self.saturation_substeps == 0 {
            return Err(Error::Config("solver tolerance and iteration caps must be positive".into()));
        }
        if !(self.initial_pressure > 0.0) || !(0.0..=1.0).contains(&self.initial_sw) {
            return Err(Error::Config("invalid initial state".into()));
        }
        Ok(())
    }

    pub fn report_count(&self) -> usize {
        (self.total_time / self.report_step + 1e-9).floor() as usize
    }

    pub fn cg(&self) -> CgSettings {
        CgSettings {
            tol: self.pressure_tol,
            max_iter: self.pressure_max_iter,
        }
    }
}

/// `assemble_pressure_system` at saturation `sw`.
pub fn assemble_pressure_system(res: &Reservoir, sw: &[f64]) -> Result<PressureSystem> {
    res.discretize()?.assemble(sw)
}

/// Explicit saturation update over `dt` with pressure `p`.
pub fn update_saturation(res: &Reservoir, p: &[f64], sw: &[f64], dt: f64, cfl: f64, max_substeps: usize) -> Result<SaturationStep> {
    res.discretize()?.update_saturation(p, sw, dt, cfl, max_substeps)
}

pub fn pde_residual(res: &Reservoir, p: &[f64], sw_new: &[f64], sw_old: &[f64], dt: f64) -> Result<PdeResidual> {
    res.discretize()?.pde_residual(p, sw_new, sw_old, dt)
}

/// Run the IMPES loop and record every report step.
pub fn run_simulation(res: &Reservoir, config: &SimConfig) -> Result<SimulationResult> {
    config.validate()?;
    let disc = res.discretize()?;
    let n = disc.cell_count();
    let reports = config.report_count();
    let cg = config.cg();

    let sw_lo = res.relperm.swc();
    let sw_hi = 1.0 - res.relperm.sor();
    let mut sw = vec![config.initial_sw.clamp(sw_lo, sw_hi); n];
    let mut p = vec![config.initial_pressure; n];
    let initial_water = disc.water_in_place(&sw);

    let solve = |sw: &[f64], p: &mut Vec<f64>| -> Result<()> {
        let system = disc.assemble(sw)?;
        disc.solve_pressure(&system, p, cg)?;
        Ok(())
    };
    solve(&sw, &mut p).map_err(|e| step_error(0, e))?;

    let mut out = SimulationResult::empty(&disc, reports);
    let mut balance = MassBalance {
        initial_water_in_place: initial_water,
        ..MassBalance::default()
    };
    let mut t = 0.0;
    for step in 1..=reports {
        let t_report = step as f64 * config.report_step;
        let mut macro_steps = 0usize;
        let mut last: Option<StepRecord> = None;
        while t < t_report {
            macro_steps += 1;
            if macro_steps > config.max_substeps {
                return Err(step_error(
                    step,
                    Error::SubstepCap {
                        needed: macro_steps,
                        cap: config.max_substeps,
                    },
                ));
            }
            let fluxes = disc.step_fluxes(&p, &sw);
            let remaining = t_report - t;
            let dt_cfl = disc.cfl_step(&fluxes, config.max_cfl);
            let pieces = if dt_cfl.is_finite() {
                ((remaining / dt_cfl).ceil() as usize).max(1)
            } else {
                1
            };
            let dt_piece = remaining / pieces as f64;
            let substeps = config.saturation_substeps.min(pieces - 1).max(1);
            let dt = if pieces == 1 { remaining } else { dt_piece * substeps as f64 };
            let advanced = disc.advance(&fluxes, &sw, dt, substeps).map_err(|e| step_error(step, e))?;
            balance.cumulative_injected += advanced.injected_water;
            balance.cumulative_produced_water += advanced.produced_water;
            balance.cumulative_produced_oil += advanced.produced_oil;
            balance.clamped += advanced.clamped;
            let sw_old = std::mem::replace(&mut sw, advanced.sw);
            last = (substeps == 1).then(|| StepRecord {
                pressure: p.clone(),
                sw_old,
                sw_new: sw.clone(),
                dt,
            });
            t = if pieces == 1 { t_report } else { t + dt };
            solve(&sw, &mut p).map_err(|e| step_error(step, e))?;
        }
        out.record(&disc, t_report, &p, &sw, macro_steps, last);
    }
    balance.final_water_in_place = disc.water_in_place(&sw);
    out.balance = balance;
    Ok(out)
}

fn step_error(step: usize, e: Error) -> Error {
    Error::Step {
        step,
        source: Box::new(e),
    }
}
