//! Peaceman well model shared by the simulator and the surrogate labeller.

use std::f64::consts::PI;

use crate::grid::{FluidModel, GridSpec, RelPermTable, ScalarField, WellControl, WellKind, WellSpec, DARCY};

/// Formation volume factor; the incompressible model has none, so 1.
pub const FVF: f64 = 1.0;

/// Phase rate from the Peaceman relation, STB/day. Positive is production.
///
/// `Q = DARCY * 2π * WI * kr * (p_cell - p_wf) / (mu * B)` with the geometric
/// well index `WI = K h / (ln(re/rw) + s)` in md·ft.
#[inline]
pub fn peaceman_rate(wi: f64, kr: f64, mu: f64, fvf: f64, p_cell: f64, p_wf: f64) -> f64 {
    DARCY * 2.0 * PI * wi * kr * (p_cell - p_wf) / (mu * fvf)
}

/// Connection factor multiplying mobility times drawdown.
#[inline]
pub fn connection_factor(wi: f64) -> f64 {
    DARCY * 2.0 * PI * wi
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub cell: usize,
    /// Geometric Peaceman well index, md·ft.
    pub wi: f64,
}

/// A well with its completions resolved against a permeability field.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedWell {
    pub spec: WellSpec,
    pub completions: Vec<Completion>,
}

impl ResolvedWell {
    pub fn resolve(spec: &WellSpec, grid: &GridSpec, perm: &ScalarField) -> Self {
        let completions = spec
            .completions(grid)
            .into_iter()
            .map(|cell| Completion {
                cell,
                wi: spec.well_index(grid, perm.values[cell]),
            })
            .collect();
        ResolvedWell {
            spec: spec.clone(),
            completions,
        }
    }

    pub fn is_producer(&self) -> bool {
        self.spec.kind == WellKind::Producer
    }

    pub fn bhp(&self) -> Option<f64> {
        match self.spec.control {
            WellControl::Bhp(p) => Some(p),
            WellControl::Rate(_) => None,
        }
    }

    pub fn rate(&self) -> Option<f64> {
        match self.spec.control {
            WellControl::Rate(q) => Some(q),
            WellControl::Bhp(_) => None,
        }
    }

    /// `(oil, water)` production of a BHP-controlled well, STB/day, summed
    /// over completions. Each phase is floored at zero per completion, so
    /// producers never cross-flow.
    pub fn producer_rates(&self, relperm: &RelPermTable, fluid: &FluidModel, pressure: &[f64], sw: &[f64]) -> (f64, f64) {
        let p_wf = self.bhp().unwrap_or(0.0);
        let mut oil = 0.0;
        let mut water = 0.0;
        for c in &self.completions {
            let (krw, kro) = relperm.eval(sw[c.cell]);
            let p = pressure[c.cell];
            oil += peaceman_rate(c.wi, kro, fluid.mu_o, FVF, p, p_wf).max(0.0);
            water += peaceman_rate(c.wi, krw, fluid.mu_w, FVF, p, p_wf).max(0.0);
        }
        (oil, water)
    }

    /// Split of a rate-controlled injection among completions, proportional
    /// to connection factor times total mobility.
    pub fn injection_shares(&self, total_mobility: &[f64]) -> Vec<f64> {
        let q = self.rate().unwrap_or(0.0);
        let weights: Vec<f64> = self
            .completions
            .iter()
            .map(|c| connection_factor(c.wi) * total_mobility[c.cell])
            .collect();
        let sum: f64 = weights.iter().sum();
        if sum > 0.0 {
            weights.iter().map(|w| q * w / sum).collect()
        } else {
            let n = self.completions.len() as f64;
            vec![q / n; self.completions.len()]
        }
    }

    /// Bottom-hole pressure that delivers the prescribed injection rate,
    /// obtained by inverting the Peaceman relation over all completions.
    pub fn injector_bhp(&self, total_mobility: &[f64], pressure: &[f64]) -> f64 {
        let q = self.rate().unwrap_or(0.0);
        let mut conductance = 0.0;
        let mut weighted = 0.0;
        for c in &self.completions {
            let g = connection_factor(c.wi) * total_mobility[c.cell] / FVF;
            conductance += g;
            weighted += g * pressure[c.cell];
        }
        if conductance > 0.0 {
            (q + weighted) / conductance
        } else {
            f64::NAN
        }
    }
}

pub fn resolve_wells(wells: &[WellSpec], grid: &GridSpec, perm: &ScalarField) -> Vec<ResolvedWell> {
    wells.iter().map(|w| ResolvedWell::resolve(w, grid, perm)).collect()
}
