use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::DatumMeta;
use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationConfig {
    pub enabled: bool,
    /// Support half-width `c` in cells; the taper vanishes beyond `2c`.
    pub radius: f64,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        LocalizationConfig {
            enabled: false,
            radius: 10.0,
        }
    }
}

/// Gaspari-Cohn fifth-order compactly supported correlation at lag `z`.
pub fn gaspari_cohn(z: f64, c: f64) -> f64 {
    let r = z.abs() / c;
    let v = if r <= 1.0 {
        // -r^5/4 + r^4/2 + 5r^3/8 - 5r^2/3 + 1
        (((((-0.25 * r) + 0.5) * r + 0.625) * r - 5.0 / 3.0) * r) * r + 1.0
    } else if r < 2.0 {
        // r^5/12 - r^4/2 + 5r^3/8 + 5r^2/3 - 5r + 4 - 2/(3r)
        ((((r / 12.0 - 0.5) * r + 0.625) * r + 5.0 / 3.0) * r - 5.0) * r + 4.0 - 2.0 / (3.0 * r)
    } else {
        0.0
    };
    v.clamp(0.0, 1.0)
}

/// Taper `ρ[p, d]` between parameter `p`'s cell and datum `d`'s well cell.
/// Non-spatial parameters or data get `ρ = 1`.
pub fn localization_matrix(
    grid: &GridSpec,
    param_cells: &[Option<usize>],
    meta: &[DatumMeta],
    radius: f64,
) -> Result<DMatrix<f64>> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("localization radius {radius} must be positive")));
    }
    Ok(DMatrix::from_fn(param_cells.len(), meta.len(), |p, d| {
        match (param_cells[p], meta[d].cell) {
            (Some(a), Some(b)) => gaspari_cohn(grid.cell_distance(a, b), radius),
            _ => 1.0,
        }
    }))
}
