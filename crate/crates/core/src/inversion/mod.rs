//! Adaptive regularized ensemble Kalman inversion (aREKI).
//!
//! Each iteration evaluates the forward map for every member, picks the
//! inflation `α_n` from the misfit statistics so that `Σ α_n⁻¹ = 1`, and moves
//! every member with a perturbed-observation Kalman update
//!
//! ```text
//! u_j ← u_j + (ρ ∘ C_uG) (C_GG + α Γ)⁻¹ (y + sqrt(α) ξ_j − G(u_j)),   ξ_j ~ N(0, Γ)
//! ```
//!
//! where `ρ` is an optional Gaspari-Cohn taper between each parameter's cell
//! and each datum's well cell.

mod localization;

pub use localization::{gaspari_cohn, localization_matrix, LocalizationConfig};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::rng::{self, Stream};

/// What a datum measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    OilRate,
    WaterRate,
    WaterCut,
    InjectorBhp,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::OilRate => "oil_rate",
            Quantity::WaterRate => "water_rate",
            Quantity::WaterCut => "water_cut",
            Quantity::InjectorBhp => "injector_bhp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatumMeta {
    pub well: String,
    /// Report step index (0-based).
    pub step: usize,
    pub quantity: Quantity,
    /// Grid cell of the well head, used as the datum's location.
    pub cell: Option<usize>,
}

/// Observed data `y` with diagonal noise covariance `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub y: Vec<f64>,
    pub gamma: Vec<f64>,
    pub meta: Vec<DatumMeta>,
    /// Number of distinct assimilation time steps.
    pub steps: usize,
}

impl Observations {
    pub fn new(y: Vec<f64>, gamma: Vec<f64>, meta: Vec<DatumMeta>, steps: usize) -> Result<Self> {
        let obs = Observations { y, gamma, meta, steps };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.len() != self.gamma.len() || self.y.len() != self.meta.len() {
            return Err(Error::Dimension(format!(
                "observations: {} values, {} variances, {} metadata rows",
                self.y.len(),
                self.gamma.len(),
                self.meta.len()
            )));
        }
        if self.y.is_empty() {
            return Err(Error::Config("observation vector is empty".into()));
        }
        if let Some(g) = self.gamma.iter().find(|&&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::Config(format!("noise variance {g} must be positive")));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("observations must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.gamma.iter().map(|g| g.sqrt()).collect()
    }
}

/// `½ Σ (y − g)² / γ`.
pub fn data_misfit(y: &[f64], gamma: &[f64], g: &[f64]) -> f64 {
    0.5 * y
        .iter()
        .zip(g)
        .zip(gamma)
        .map(|((a, b), v)| (a - b) * (a - b) / v)
        .sum::<f64>()
}

/// Inflation choice for one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaStep {
    Step { alpha: f64, s_next: f64 },
    /// Every member fits the data exactly.
    ExactFit,
}

/// Scalar form of the inflation rule given the misfit mean and variance.
pub fn alpha_from_stats(mean: f64, var: f64, m: usize, s: f64) -> AlphaStep {
    if mean == 0.0 && var == 0.0 {
        return AlphaStep::ExactFit;
    }
    let m = m as f64;
    let a = if mean > 0.0 { m / (2.0 * mean) } else { f64::INFINITY };
    let b = if var > 0.0 { (m / (2.0 * var)).sqrt() } else { f64::INFINITY };
    let remaining = 1.0 - s;
    let cand = a.max(b);
    if cand >= remaining {
        AlphaStep::Step {
            alpha: 1.0 / remaining,
            s_next: 1.0,
        }
    } else {
        AlphaStep::Step {
            alpha: 1.0 / cand,
            s_next: s + cand,
        }
    }
}

/// Sample mean and variance (denominator `J − 1`) of the member misfits.
pub fn misfit_stats(phis: &[f64]) -> (f64, f64) {
    let j = phis.len() as f64;
    let mean = phis.iter().sum::<f64>() / j;
    let var = if phis.len() > 1 {
        phis.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (j - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

pub fn adaptive_alpha(phis: &[f64], m: usize, s: f64) -> Result<AlphaStep> {
    if phis.is_empty() {
        return Err(Error::Config("no misfits to compute the inflation from".into()));
    }
    if !(s < 1.0) {
        return Err(Error::Config(format!("inflation budget already spent (s = {s})")));
    }
    if phis.iter().all(|&p| p == 0.0) {
        return Ok(AlphaStep::ExactFit);
    }
    let (mean, var) = misfit_stats(phis);
    Ok(alpha_from_stats(mean, var, m, s))
}

fn column_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension("ensemble members differ in length".into()));
    }
    Ok(DMatrix::from_fn(dim, rows.len(), |i, j| rows[j][i]))
}

fn centered(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let j = m.ncols() as f64;
    for mut row in m.row_iter_mut() {
        let mean = row.sum() / j;
        row.add_scalar_mut(-mean);
    }
    m
}

/// `(C_uG, C_GG)` with `1/(J − 1)` normalization.
pub fn cross_covariances(u: &[Vec<f64>], g: &[Vec<f64>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if u.len() != g.len() || u.len() < 2 {
        return Err(Error::Dimension(format!(
            "need matching ensembles of at least two members, got {} and {}",
            u.len(),
            g.len()
        )));
    }
    let scale = 1.0 / (u.len() as f64 - 1.0);
    let du = centered(column_matrix(u)?);
    let dg = centered(column_matrix(g)?);
    let cug = &du * dg.transpose() * scale;
    let cgg = &dg * dg.transpose() * scale;
    Ok((cug, cgg))
}

/// Gaussian perturbation `ξ ~ N(0, Γ)` for one member at one iteration.
pub fn perturbation(gamma: &[f64], seed: u64, iteration: usize, member: usize) -> Vec<f64> {
    let mut rng = rng::stream(seed, Stream::EkiPerturbation, iteration as u64, member as u64);
    gamma
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v.sqrt() * z
        })
        .collect()
}

/// One perturbed-observation Kalman step at inflation `alpha`.
///
/// `taper`, when given, multiplies `C_uG` entrywise. Perturbations come from
/// the `(iteration, member)` stream of `seed`.
pub fn eki_update(
    u: &[Vec<f64>],
    g: &[Vec<f64>],
    obs: &Observations,
    alpha: f64,
    taper: Option<&DMatrix<f64>>,
    seed: u64,
    iteration: usize,
) -> Result<Vec<Vec<f64>>> {
    let m = obs.len();
    if g.iter().any(|gj| gj.len() != m) {
        return Err(Error::Dimension("forward output length differs from observations".into()));
    }
    let (mut cug, cgg) = cross_covariances(u, g)?;
    if let Some(rho) = taper {
        if rho.shape() != cug.shape() {
            return Err(Error::Dimension(format!(
                "taper is {:?}, cross-covariance is {:?}",
                rho.shape(),
                cug.shape()
            )));
        }
        cug.component_mul_assign(rho);
    }
    let mut s = cgg;
    for (k, v) in obs.gamma.iter().enumerate() {
        s[(k, k)] += alpha * v;
    }
    let diag = s.diagonal();
    let chol = s.cholesky().ok_or_else(|| {
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        Error::Factorization(format!(
            "C_GG + alpha Gamma ({m}x{m}, alpha {alpha:.4e}) is not positive definite; diagonal range [{lo:.3e}, {hi:.3e}]"
        ))
    })?;
    let sa = alpha.sqrt();
    let updated = u
        .par_iter()
        .zip(g)
        .enumerate()
        .map(|(j, (uj, gj))| {
            let xi = perturbation(&obs.gamma, seed, iteration, j);
            let d = DVector::from_fn(m, |k, _| obs.y[k] + sa * xi[k] - gj[k]);
            let w = chol.solve(&d);
            let du = &cug * w;
            uj.iter().zip(du.iter()).map(|(a, b)| a + b).collect()
        })
        .collect();
    Ok(updated)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionConfig {
    pub max_iter: usize,
    pub localization: LocalizationConfig,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            max_iter: 20,
            localization: LocalizationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `Σ α⁻¹` reached 1.
    Budget,
    MaxIterations,
    ExactFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub phi_mean: f64,
    pub phi_var: f64,
    pub alpha: f64,
    pub s: f64,
}

/// Inflation bookkeeping of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArekiState {
    pub s: f64,
    pub n: usize,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
}

impl ArekiState {
    pub fn alpha_inverse_sum(&self) -> f64 {
        self.history.iter().map(|r| 1.0 / r.alpha).sum()
    }
}

#[derive(Debug, Clone)]
pub struct InversionOutcome {
    pub posterior: Vec<Vec<f64>>,
    pub state: ArekiState,
    /// Forward outputs and misfits of the prior ensemble.
    pub prior_outputs: Vec<Vec<f64>>,
    pub prior_misfits: Vec<f64>,
    /// Forward outputs and misfits of the returned ensemble.
    pub outputs: Vec<Vec<f64>>,
    pub misfits: Vec<f64>,
}

impl InversionOutcome {
    /// Member with the lowest final misfit (lowest index on ties).
    pub fn map_index(&self) -> usize {
        argmin(&self.misfits)
    }

    pub fn mean(&self) -> Vec<f64> {
        ensemble_mean(&self.posterior)
    }
}

pub fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &x)| if x < bv { (i, x) } else { (bi, bv) })
        .0
}

pub fn ensemble_mean(members: &[Vec<f64>]) -> Vec<f64> {
    let j = members.len() as f64;
    let mut mean = vec![0.0; members.first().map_or(0, Vec::len)];
    for m in members {
        for (a, b) in mean.iter_mut().zip(m) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|a| *a /= j);
    mean
}

/// Evaluate `forward` on every member in parallel; results keep member order.
pub fn evaluate<F>(members: &[Vec<f64>], m: usize, forward: &F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync,
{
    members
        .par_iter()
        .enumerate()
        .map(|(j, u)| {
            let out = forward(j, u).map_err(|e| Error::Forward {
                member: j,
                source: Box::new(e),
            })?;
            if out.len() != m {
                return Err(Error::Forward {
                    member: j,
                    source: Box::new(Error::Dimension(format!(
                        "forward output has {} entries, expected {m}",
                        out.len()
                    ))),
                });
            }
            Ok(out)
        })
        .collect()
}

/// Spatial context needed for localization.
pub struct Locations<'a> {
    pub grid: &'a GridSpec,
    pub param_cells: &'a [Option<usize>],
}

/// Run aREKI from `prior` until the inflation budget is spent, every member
/// fits exactly, or `max_iter` updates have been made.
///
/// `forward(member, u)` maps a parameter vector to predicted data.
pub fn run_inversion<F>(
    prior: &[Vec<f64>],
    obs: &Observations,
    forward: &F,
    config: &InversionConfig,
    locations: Option<Locations>,
    seed: u64,
) -> Result<InversionOutcome>
where
    F: Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync,
{
    obs.validate()?;
    if prior.len() < 2 {
        return Err(Error::Config(format!("ensemble needs at least 2 members, got {}", prior.len())));
    }
    let taper = match (config.localization.enabled, &locations) {
        (true, Some(loc)) => Some(localization_matrix(
            loc.grid,
            loc.param_cells,
            &obs.meta,
            config.localization.radius,
        )?),
        (true, None) => return Err(Error::Config("localization enabled without parameter locations".into())),
        (false, _) => None,
    };
    let m = obs.len();
    let mut u = prior.to_vec();
    let mut g = evaluate(&u, m, forward)?;
    let prior_outputs = g.clone();
    let phi = |g: &[Vec<f64>]| -> Vec<f64> { g.iter().map(|gj| data_misfit(&obs.y, &obs.gamma, gj)).collect() };
    let prior_misfits = phi(&g);
    let mut misfits = prior_misfits.clone();
    let mut state = ArekiState {
        s: 0.0,
        n: 0,
        history: Vec::new(),
        termination: Termination::MaxIterations,
    };
    while state.s < 1.0 && state.n < config.max_iter {
        let (mean, var) = misfit_stats(&misfits);
        let (alpha, s_next) = match adaptive_alpha(&misfits, m, state.s)? {
            AlphaStep::ExactFit => {
                state.termination = Termination::ExactFit;
                break;
            }
            AlphaStep::Step { alpha, s_next } => (alpha, s_next),
        };
        log::info!(
            "aREKI iteration {}: mean misfit {mean:.4e}, alpha {alpha:.4e}, s {s_next:.6}",
            state.n
        );
        u = eki_update(&u, &g, obs, alpha, taper.as_ref(), seed, state.n)?;
        state.history.push(IterationRecord {
            iteration: state.n,
            phi_mean: mean,
            phi_var: var,
            alpha,
            s: s_next,
        });
        state.s = s_next;
        state.n += 1;
        g = evaluate(&u, m, forward)?;
        misfits = phi(&g);
    }
    if state.s >= 1.0 {
        state.termination = Termination::Budget;
    }
    Ok(InversionOutcome {
        posterior: u,
        state,
        prior_outputs,
        prior_misfits,
        outputs: g,
        misfits,
    })
}

#[cfg(test)]
mod tests;
