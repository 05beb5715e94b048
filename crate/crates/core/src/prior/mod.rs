//! Prior ensembles for permeability and porosity.
//!
//! Log-permeability is a Gaussian random field with a squared-exponential
//! covariance, represented by a truncated Karhunen-Loève expansion
//!
//! ```text
//! log K = u0 + Σ_j u_j sqrt(λ_j) θ_j,    u_j ~ N(0, 1)
//! ```
//!
//! The bimodal option thresholds the same field at a quantile to produce a
//! two-facies (sand/shale) channel map. Porosity follows `a log K + b`.
//!
//! Two parameter spaces are used by the inversion:
//!
//! * `Lognormal`: the `r` KL coefficients `u_j` (non-spatial).
//! * `Bimodal`: the full per-cell vector `[log K_0 .. log K_{N-1}, φ_0 .. φ_{N-1}]`
//!   with cells in grid order (`i` fastest, then `j`, then `k`).

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::metrics::quantile_sorted;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Lognormal,
    Bimodal,
}

/// Squared-exponential covariance with correlation lengths in cells:
/// `C(a, b) = σ² exp(-½ ((Δi/ℓx)² + (Δj/ℓy)² + (Δk/ℓz)²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kernel {
    pub variance: f64,
    pub corr_x: f64,
    pub corr_y: f64,
    #[serde(default = "one")]
    pub corr_z: f64,
}

fn one() -> f64 {
    1.0
}

impl Kernel {
    pub fn eval(&self, grid: &GridSpec, a: usize, b: usize) -> f64 {
        let (ia, ja, ka) = grid.coords(a);
        let (ib, jb, kb) = grid.coords(b);
        let dx = (ia as f64 - ib as f64) / self.corr_x;
        let dy = (ja as f64 - jb as f64) / self.corr_y;
        let dz = (ka as f64 - kb as f64) / self.corr_z;
        self.variance * (-0.5 * (dx * dx + dy * dy + dz * dz)).exp()
    }

    pub fn matrix(&self, grid: &GridSpec) -> DMatrix<f64> {
        let n = grid.cell_count();
        DMatrix::from_fn(n, n, |a, b| self.eval(grid, a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub kind: PriorKind,
    pub kernel: Kernel,
    /// KL rank `r`.
    pub rank: usize,
    /// Mean log-permeability `u0` (ln md).
    pub mean_log_perm: f64,
    pub sand_perm: f64,
    pub shale_perm: f64,
    /// Cells above this quantile of each member's Gaussian field are sand.
    pub threshold_quantile: f64,
    pub poro_a: f64,
    pub poro_b: f64,
    pub perm_min: f64,
    pub perm_max: f64,
    pub poro_min: f64,
    pub poro_max: f64,
    /// Warn when the retained fraction of the kernel trace falls below this.
    pub min_captured_variance: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            kind: PriorKind::Lognormal,
            kernel: Kernel {
                variance: 1.0,
                corr_x: 5.0,
                corr_y: 5.0,
                corr_z: 1.0,
            },
            rank: 20,
            mean_log_perm: 100f64.ln(),
            sand_perm: 500.0,
            shale_perm: 20.0,
            threshold_quantile: 0.6,
            poro_a: 0.03,
            poro_b: 0.06,
            perm_min: 1.0,
            perm_max: 5000.0,
            poro_min: 0.05,
            poro_max: 0.4,
            min_captured_variance: 0.9,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let k = &self.kernel;
        if self.rank == 0 || self.rank > grid.cell_count() {
            return Err(Error::Config(format!(
                "KL rank {} must lie in 1..={}",
                self.rank,
                grid.cell_count()
            )));
        }
        if !(k.variance >= 0.0) || !(k.corr_x > 0.0) || !(k.corr_y > 0.0) || !(k.corr_z > 0.0) {
            return Err(Error::Config("kernel variance must be >= 0 and correlation lengths > 0".into()));
        }
        if !(self.perm_min > 0.0 && self.perm_min < self.perm_max && self.perm_max.is_finite()) {
            return Err(Error::Config("permeability bounds must satisfy 0 < min < max".into()));
        }
        if !(self.poro_min > 0.0 && self.poro_min < self.poro_max && self.poro_max < 1.0) {
            return Err(Error::Config("porosity bounds must satisfy 0 < min < max < 1".into()));
        }
        if !(self.threshold_quantile > 0.0 && self.threshold_quantile < 1.0) {
            return Err(Error::Config("threshold quantile must lie in (0, 1)".into()));
        }
        if !(self.sand_perm > 0.0 && self.shale_perm > 0.0) {
            return Err(Error::Config("facies permeabilities must be positive".into()));
        }
        if !self.mean_log_perm.is_finite() || !self.poro_a.is_finite() || !self.poro_b.is_finite() {
            return Err(Error::Config("prior mean and porosity coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn porosity(&self, log_perm: f64) -> f64 {
        (self.poro_a * log_perm + self.poro_b).clamp(self.poro_min, self.poro_max)
    }

    fn clamp_log_perm(&self, v: f64) -> f64 {
        v.clamp(self.perm_min.ln(), self.perm_max.ln())
    }

    fn clamp_perm(&self, log_perm: f64) -> f64 {
        log_perm.exp().clamp(self.perm_min, self.perm_max)
    }
}

/// Leading eigenpairs of a covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KlBasis {
    /// Nonincreasing, floored at 0.
    pub values: Vec<f64>,
    /// `vectors[j]` is the unit eigenvector θ_j over cells.
    pub vectors: Vec<Vec<f64>>,
    pub trace: f64,
}

impl KlBasis {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn captured_variance(&self) -> f64 {
        if self.trace > 0.0 {
            self.values.iter().sum::<f64>() / self.trace
        } else {
            1.0
        }
    }

    /// `Σ_j u_j sqrt(λ_j) θ_j`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.vectors.first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for ((u, lam), theta) in coeffs.iter().zip(&self.values).zip(&self.vectors) {
            let w = u * lam.sqrt();
            for (o, t) in out.iter_mut().zip(theta) {
                *o += w * t;
            }
        }
        out
    }
}

/// Top-`r` eigenpairs of `cov`. Slightly negative eigenvalues from round-off
/// are floored at 0.
pub fn kl_basis_from_matrix(cov: DMatrix<f64>, r: usize) -> Result<KlBasis> {
    let n = cov.nrows();
    if r == 0 || r > n {
        return Err(Error::Dimension(format!("KL rank {r} for a {n}x{n} covariance")));
    }
    let trace = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut values = Vec::with_capacity(r);
    let mut vectors = Vec::with_capacity(r);
    let mut floored = false;
    for &c in order.iter().take(r) {
        let lam = eig.eigenvalues[c];
        if lam < 0.0 {
            floored = true;
        }
        values.push(lam.max(0.0));
        let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.push(v);
    }
    if floored {
        log::warn!("covariance matrix is not numerically PSD; negative eigenvalues floored at 0");
    }
    Ok(KlBasis { values, vectors, trace })
}

pub fn kl_basis(grid: &GridSpec, kernel: &Kernel, r: usize) -> Result<KlBasis> {
    kl_basis_from_matrix(kernel.matrix(grid), r)
}

/// Flatten `(K, φ)` into `[log K..., φ...]`.
pub fn encode(perm: &ScalarField, poro: &ScalarField) -> Result<Vec<f64>> {
    if perm.grid != poro.grid {
        return Err(Error::Dimension("permeability and porosity grids differ".into()));
    }
    if perm.values.iter().any(|&k| k <= 0.0) {
        return Err(Error::InvalidField("permeability must be positive to encode".into()));
    }
    let mut out: Vec<f64> = perm.values.iter().map(|k| k.ln()).collect();
    out.extend_from_slice(&poro.values);
    Ok(out)
}

/// Inverse of [`encode`], clamping to the configured bounds.
pub fn decode(params: &[f64], grid: &GridSpec, config: &PriorConfig) -> Result<(ScalarField, ScalarField)> {
    let n = grid.cell_count();
    if params.len() != 2 * n {
        return Err(Error::Dimension(format!(
            "parameter vector has {} entries, expected {}",
            params.len(),
            2 * n
        )));
    }
    let perm = params[..n].iter().map(|&v| config.clamp_perm(v)).collect();
    let poro = params[n..].iter().map(|&v| v.clamp(config.poro_min, config.poro_max)).collect();
    Ok((ScalarField::new(*grid, perm)?, ScalarField::new(*grid, poro)?))
}

/// A configured prior with its KL basis.
#[derive(Debug, Clone)]
pub struct Prior {
    pub grid: GridSpec,
    pub config: PriorConfig,
    pub basis: KlBasis,
}

impl Prior {
    pub fn new(grid: GridSpec, config: PriorConfig) -> Result<Self> {
        grid.validate()?;
        config.validate(&grid)?;
        let basis = kl_basis(&grid, &config.kernel, config.rank)?;
        if basis.captured_variance() < config.min_captured_variance {
            log::warn!(
                "KL rank {} captures {:.3} of the prior variance (threshold {})",
                config.rank,
                basis.captured_variance(),
                config.min_captured_variance
            );
        }
        Ok(Prior { grid, config, basis })
    }

    pub fn param_dim(&self) -> usize {
        match self.config.kind {
            PriorKind::Lognormal => self.basis.rank(),
            PriorKind::Bimodal => 2 * self.grid.cell_count(),
        }
    }

    /// Cell of each parameter entry, `None` for non-spatial entries.
    pub fn param_cells(&self) -> Vec<Option<usize>> {
        match self.config.kind {
            PriorKind::Lognormal => vec![None; self.basis.rank()],
            PriorKind::Bimodal => {
                let n = self.grid.cell_count();
                (0..2 * n).map(|p| Some(p % n)).collect()
            }
        }
    }

    /// Draw the parameter vector of one member from its own stream.
    pub fn draw(&self, seed: u64, tag: Stream, member: usize) -> Vec<f64> {
        let mut rng = rng::stream(seed, tag, member as u64, 0);
        let coeffs: Vec<f64> = (0..self.basis.rank()).map(|_| StandardNormal.sample(&mut rng)).collect();
        match self.config.kind {
            PriorKind::Lognormal => coeffs,
            PriorKind::Bimodal => self.facies_params(&coeffs),
        }
    }

    fn facies_params(&self, coeffs: &[f64]) -> Vec<f64> {
        let g = self.basis.synthesize(coeffs);
        let mut sorted = g.clone();
        sorted.sort_by(f64::total_cmp);
        let threshold = quantile_sorted(&sorted, self.config.threshold_quantile);
        let (sand, shale) = (self.config.sand_perm.ln(), self.config.shale_perm.ln());
        let log_k: Vec<f64> = g
            .iter()
            .map(|&v| self.config.clamp_log_perm(if v > threshold { sand } else { shale }))
            .collect();
        let poro: Vec<f64> = log_k.iter().map(|&l| self.config.porosity(l)).collect();
        [log_k, poro].concat()
    }

    /// `J` members drawn in parallel; member `j` depends only on `(seed, j)`.
    pub fn sample(&self, members: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..members)
            .into_par_iter()
            .map(|j| self.draw(seed, Stream::Prior, j))
            .collect()
    }

    pub fn log_perm(&self, params: &[f64]) -> Result<Vec<f64>> {
        let (perm, _) = self.decode(params)?;
        Ok(perm.values.iter().map(|k| k.ln()).collect())
    }

    /// Parameter vector to `(K, φ)` fields, clamped to bounds.
    pub fn decode(&self, params: &[f64]) -> Result<(ScalarField, ScalarField)> {
        match self.config.kind {
            PriorKind::Lognormal => {
                if params.len() != self.basis.rank() {
                    return Err(Error::Dimension(format!(
                        "expected {} KL coefficients, got {}",
                        self.basis.rank(),
                        params.len()
                    )));
                }
                let g = self.basis.synthesize(params);
                let log_k: Vec<f64> = g
                    .iter()
                    .map(|v| self.config.clamp_log_perm(self.config.mean_log_perm + v))
                    .collect();
                let poro = log_k.iter().map(|&l| self.config.porosity(l)).collect();
                let perm = log_k.iter().map(|&l| self.config.clamp_perm(l)).collect();
                Ok((ScalarField::new(self.grid, perm)?, ScalarField::new(self.grid, poro)?))
            }
            PriorKind::Bimodal => decode(params, &self.grid, &self.config),
        }
    }
}
