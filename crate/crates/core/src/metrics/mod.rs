//! Evaluation metrics: normalized data RMSE, structural similarity of
//! permeability maps and percentile production envelopes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// `sqrt((1/N) Σ_k Σ_j ((d_obs − d_sim) / σ)²)` over flattened data with `N`
/// assimilation time steps.
pub fn rmse(obs: &[f64], sim: &[f64], sigma: &[f64], steps: usize) -> Result<f64> {
    if obs.len() != sim.len() || obs.len() != sigma.len() {
        return Err(Error::Dimension(format!(
            "rmse: {} observations, {} simulated, {} sigmas",
            obs.len(),
            sim.len(),
            sigma.len()
        )));
    }
    if steps == 0 {
        return Err(Error::Config("rmse needs at least one time step".into()));
    }
    if let Some(s) = sigma.iter().find(|&&s| !(s > 0.0)) {
        return Err(Error::Config(format!("rmse: noise level {s} must be positive")));
    }
    let sum: f64 = obs
        .iter()
        .zip(sim)
        .zip(sigma)
        .map(|((o, s), sd)| ((o - s) / sd).powi(2))
        .sum();
    Ok((sum / steps as f64).sqrt())
}

pub fn ensemble_rmse(obs: &[f64], sims: &[Vec<f64>], sigma: &[f64], steps: usize) -> Result<Vec<f64>> {
    sims.iter().map(|s| rmse(obs, s, sigma, steps)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicRange {
    Fixed(f64),
    /// max − min of the reference image.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsimConfig {
    pub window: usize,
    pub range: DynamicRange,
    pub b1: f64,
    pub b2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window: 7,
            range: DynamicRange::Reference,
            b1: 0.01,
            b2: 0.03,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Config(format!("SSIM window {} must be odd and >= 3", self.window)));
        }
        if !(self.b1 > 0.0 && self.b2 > 0.0) {
            return Err(Error::Config("SSIM constants must be positive".into()));
        }
        if let DynamicRange::Fixed(l) = self.range {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config("fixed SSIM dynamic range must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Row-major 2D image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<'a> {
    pub nx: usize,
    pub ny: usize,
    pub data: &'a [f64],
}

impl Image<'_> {
    /// Symmetric reflection (`d c b a | a b c d`) at the borders.
    fn at(&self, i: isize, j: isize) -> f64 {
        self.data[reflect(i, self.nx) + self.nx * reflect(j, self.ny)]
    }
}

fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

fn local_ssim(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, c1: f64, c2: f64) -> f64 {
    let num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
    let den = (mx * mx + my * my + c1) * (vx + vy + c2);
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Mean local SSIM of `y` against reference `x`, with luminance, contrast and
/// structure exponents 1 and `C3 = C2 / 2`. Every pixel is a window centre.
pub fn ssim_2d(x: &Image, y: &Image, config: &SsimConfig) -> Result<f64> {
    config.validate()?;
    if x.nx != y.nx || x.ny != y.ny || x.data.len() != x.nx * x.ny || y.data.len() != y.nx * y.ny {
        return Err(Error::Dimension("SSIM images must have the same shape".into()));
    }
    let l = match config.range {
        DynamicRange::Fixed(l) => l,
        DynamicRange::Reference => {
            let (lo, hi) = x
                .data
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        }
    };
    let c1 = (config.b1 * l).powi(2);
    let c2 = (config.b2 * l).powi(2);
    let h = (config.window / 2) as isize;
    let n = (config.window * config.window) as f64;
    let mut total = 0.0;
    for j in 0..x.ny as isize {
        for i in 0..x.nx as isize {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dj in -h..=h {
                for di in -h..=h {
                    let a = x.at(i + di, j + dj);
                    let b = y.at(i + di, j + dj);
                    sx += a;
                    sy += b;
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            }
            let (mx, my) = (sx / n, sy / n);
            let vx = (sxx / n - mx * mx).max(0.0);
            let vy = (syy / n - my * my).max(0.0);
            let cxy = sxy / n - mx * my;
            total += local_ssim(mx, my, vx, vy, cxy, c1, c2);
        }
    }
    Ok(total / (x.nx * x.ny) as f64)
}

/// Layer-averaged SSIM of two fields on the same grid.
pub fn ssim(reference: &ScalarField, other: &ScalarField, config: &SsimConfig) -> Result<f64> {
    if reference.grid != other.grid {
        return Err(Error::Dimension("SSIM fields are on different grids".into()));
    }
    let g = reference.grid;
    let plane = g.nx * g.ny;
    let mut total = 0.0;
    for k in 0..g.nz {
        let r = &reference.values[k * plane..(k + 1) * plane];
        let o = &other.values[k * plane..(k + 1) * plane];
        let x = Image { nx: g.nx, ny: g.ny, data: r };
        let y = Image { nx: g.nx, ny: g.ny, data: o };
        total += ssim_2d(&x, &y, config)?;
    }
    Ok(total / g.nz as f64)
}

pub fn phi_ssim(s: f64) -> f64 {
    (1.0 - s).abs()
}

/// Linear interpolation between order statistics of an ascending slice,
/// `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise percentiles across members. `series[m][t]`; returns
/// `out[p][t]` for each percentile in `ps` (0-100).
pub fn percentile_curves(series: &[Vec<f64>], ps: &[f64]) -> Result<Vec<Vec<f64>>> {
    if series.len() < 2 {
        return Err(Error::Config("percentiles need at least two members".into()));
    }
    let len = series[0].len();
    if series.iter().any(|s| s.len() != len) {
        return Err(Error::Dimension("member series have different lengths".into()));
    }
    let mut out = vec![vec![0.0; len]; ps.len()];
    let mut column = vec![0.0; series.len()];
    for t in 0..len {
        for (c, s) in column.iter_mut().zip(series) {
            *c = s[t];
        }
        column.sort_by(f64::total_cmp);
        for (row, p) in out.iter_mut().zip(ps) {
            row[t] = quantile_sorted(&column, p / 100.0);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberMetrics {
    pub member: String,
    pub rmse: f64,
    pub ssim: f64,
    pub phi_ssim: f64,
    /// Unweighted `φ(SSIM) + RMSE`.
    pub cost: f64,
}

impl MemberMetrics {
    pub fn new(member: impl Into<String>, rmse: f64, ssim: f64) -> Self {
        let phi = phi_ssim(ssim);
        MemberMetrics {
            member: member.into(),
            rmse,
            ssim,
            phi_ssim: phi,
            cost: phi + rmse,
        }
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MemberMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MemberMetrics>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
