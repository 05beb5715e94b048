use super::saturation::StepFluxes;
use super::Discretization;
use crate::error::{Error, Result};

/// Mean-squared discrete residuals of the pressure and water equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeResidual {
    pub pressure: f64,
    pub saturation: f64,
}

impl Discretization<'_> {
    /// Residuals of one IMPES step from `sw_old` to `sw_new` over `dt` with
    /// pressure `p`, evaluated with the simulator's own stencils: mobilities
    /// at `sw_old`, upwind fractional flow, Peaceman well terms.
    ///
    /// `V_p = |b - A p|² / N` in (bbl/day)² and
    /// `V_s = |PV (sw_new - sw_old) / dt - net water inflow|² / N`.
    pub fn pde_residual(&self, p: &[f64], sw_new: &[f64], sw_old: &[f64], dt: f64) -> Result<PdeResidual> {
        let cells = self.cell_count();
        if p.len() != cells || sw_new.len() != cells || sw_old.len() != cells {
            return Err(Error::Dimension("residual fields must match the grid".into()));
        }
        let n = cells as f64;
        let lt = self.total_mobility(sw_old);
        // -div(T grad p) - q in flux-difference form, so uniform pressure
        // with no wells gives exactly zero.
        let mut r = vec![0.0; cells];
        for f in &self.faces {
            let flux = f.trans * 0.5 * (lt[f.a] + lt[f.b]) * (p[f.a] - p[f.b]);
            r[f.a] += flux;
            r[f.b] -= flux;
        }
        for well in &self.wells {
            if let Some(p_wf) = well.bhp() {
                for c in &well.completions {
                    let g = super::well::connection_factor(c.wi) * lt[c.cell] / super::well::FVF;
                    r[c.cell] += g * (p[c.cell] - p_wf);
                }
            } else {
                for (c, q) in well.completions.iter().zip(well.injection_shares(&lt)) {
                    r[c.cell] -= q;
                }
            }
        }
        let pressure = r.iter().map(|v| v * v).sum::<f64>() / n;

        let fluxes: StepFluxes = self.step_fluxes(p, sw_old);
        let mut fw = Vec::new();
        let mut net = vec![0.0; self.cell_count()];
        self.water_accumulation(&fluxes, sw_old, &mut fw, &mut net);
        let saturation = (0..self.cell_count())
            .map(|i| {
                let acc = self.pore_volume[i] * (sw_new[i] - sw_old[i]) / dt;
                let v = acc - net[i];
                v * v
            })
            .sum::<f64>()
            / n;
        Ok(PdeResidual { pressure, saturation })
    }
}
