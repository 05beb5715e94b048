use super::Discretization;
use crate::error::{Error, Result};

/// Outcome of one explicit saturation advance over a macro step.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationStep {
    pub sw: Vec<f64>,
    pub substeps: usize,
    /// Water injected during the step, bbl.
    pub injected_water: f64,
    /// Water produced during the step, bbl.
    pub produced_water: f64,
    /// Oil produced during the step, bbl.
    pub produced_oil: f64,
    /// Sum of absolute corrections applied by the final clamp.
    pub clamped: f64,
}

/// Frozen fluxes of a macro step: total face fluxes and well terms computed
/// from the pressure field and the saturation at the start of the step.
pub(crate) struct StepFluxes {
    /// Total flux a -> b per face, bbl/day.
    pub face_flux: Vec<f64>,
    /// Water injection per cell, bbl/day.
    pub injection: Vec<f64>,
    /// Total producer withdrawal per cell, bbl/day (floored at zero).
    pub withdrawal: Vec<f64>,
}

impl Discretization<'_> {
    pub(crate) fn step_fluxes(&self, pressure: &[f64], sw: &[f64]) -> StepFluxes {
        let n = self.cell_count();
        let lt = self.total_mobility(sw);
        let face_flux = self
            .faces
            .iter()
            .map(|f| f.trans * 0.5 * (lt[f.a] + lt[f.b]) * (pressure[f.a] - pressure[f.b]))
            .collect();
        let mut injection = vec![0.0; n];
        let mut withdrawal = vec![0.0; n];
        for well in &self.wells {
            if let Some(p_wf) = well.bhp() {
                for c in &well.completions {
                    let g = super::well::connection_factor(c.wi) * lt[c.cell] / super::well::FVF;
                    withdrawal[c.cell] += (g * (pressure[c.cell] - p_wf)).max(0.0);
                }
            } else {
                for (c, q) in well.completions.iter().zip(well.injection_shares(&lt)) {
                    injection[c.cell] += q;
                }
            }
        }
        StepFluxes {
            face_flux,
            injection,
            withdrawal,
        }
    }

    /// Net water accumulation rate per cell (bbl/day) for saturation `sw`
    /// under frozen fluxes, using upwind fractional flow at faces and the
    /// well-cell fractional flow at producers.
    pub(crate) fn water_accumulation(&self, fluxes: &StepFluxes, sw: &[f64], fw: &mut Vec<f64>, net: &mut [f64]) {
        fw.clear();
        fw.extend(sw.iter().map(|&s| self.res.relperm.fractional_flow(s, &self.res.fluid)));
        for (i, v) in net.iter_mut().enumerate() {
            *v = fluxes.injection[i] - fw[i] * fluxes.withdrawal[i];
        }
        for (f, &v) in self.faces.iter().zip(&fluxes.face_flux) {
            let up = if v >= 0.0 { f.a } else { f.b };
            let water = fw[up] * v;
            net[f.a] -= water;
            net[f.b] += water;
        }
    }

    /// Largest stable explicit step for the frozen fluxes at the given CFL.
    pub(crate) fn cfl_step(&self, fluxes: &StepFluxes, cfl: f64) -> f64 {
        let n = self.cell_count();
        let mut inflow = fluxes.injection.clone();
        let mut outflow = fluxes.withdrawal.clone();
        for (f, &v) in self.faces.iter().zip(&fluxes.face_flux) {
            if v >= 0.0 {
                outflow[f.a] += v;
                inflow[f.b] += v;
            } else {
                outflow[f.b] -= v;
                inflow[f.a] -= v;
            }
        }
        let slope = self.max_fw_slope;
        let mut dt = f64::INFINITY;
        for i in 0..n {
            let throughput = inflow[i].max(outflow[i]) * slope;
            if throughput > 0.0 {
                dt = dt.min(cfl * self.pore_volume[i] / throughput);
            }
        }
        dt
    }

    /// Advance water saturation over `dt` days with explicit first-order
    /// upwind transport, sub-stepping to respect the CFL bound.
    pub fn update_saturation(&self, pressure: &[f64], sw: &[f64], dt: f64, cfl: f64, max_substeps: usize) -> Result<SaturationStep> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("saturation step must be positive, got {dt}")));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config(format!("CFL number must lie in (0, 1], got {cfl}")));
        }
        let fluxes = self.step_fluxes(pressure, sw);
        let dt_cfl = self.cfl_step(&fluxes, cfl);
        let substeps = if dt_cfl.is_finite() {
            let ratio = dt / dt_cfl;
            if ratio > max_substeps as f64 {
                return Err(Error::SubstepCap {
                    needed: ratio.ceil().min(usize::MAX as f64) as usize,
                    cap: max_substeps,
                });
            }
            (ratio.ceil() as usize).max(1)
        } else {
            1
        };
        self.advance(&fluxes, sw, dt, substeps)
    }

    pub(crate) fn advance(&self, fluxes: &StepFluxes, sw: &[f64], dt: f64, substeps: usize) -> Result<SaturationStep> {
        let n = self.cell_count();
        let h = dt / substeps as f64;
        let total_injection: f64 = fluxes.injection.iter().sum();
        let mut s = sw.to_vec();
        let mut fw = Vec::with_capacity(n);
        let mut net = vec![0.0; n];
        let mut produced_water = 0.0;
        let mut produced_oil = 0.0;
        for _ in 0..substeps {
            self.water_accumulation(fluxes, &s, &mut fw, &mut net);
            for i in 0..n {
                let wd = fluxes.withdrawal[i];
                if wd > 0.0 {
                    produced_water += h * fw[i] * wd;
                    produced_oil += h * (1.0 - fw[i]) * wd;
                }
                s[i] += h * net[i] / self.pore_volume[i];
            }
        }
        let lo = self.res.relperm.swc();
        let hi = 1.0 - self.res.relperm.sor();
        let mut clamped = 0.0;
        for v in s.iter_mut() {
            let c = v.clamp(lo, hi);
            clamped += (c - *v).abs();
            *v = c;
        }
        Ok(SaturationStep {
            sw: s,
            substeps,
            injected_water: h * total_injection * substeps as f64,
            produced_water,
            produced_oil,
            clamped,
        })
    }
}
