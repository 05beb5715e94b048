//! Grid geometry, rock and fluid properties, wells and face transmissibilities.
//!
//! Everything is in field units: ft, psia, STB/day, md, cp and days.

mod io;
mod relperm;

pub use io::{read_field, read_relperm_csv, write_field, write_relperm_csv};
pub use relperm::RelPermTable;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Darcy constant converting md·ft·psi/cp into STB/day.
pub const DARCY: f64 = 0.001127;

/// Cubic feet per reservoir barrel.
pub const FT3_PER_BBL: f64 = 5.615;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    /// Reservoir datum depth (ft). Gravity is neglected so this is metadata.
    #[serde(default)]
    pub depth: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize, dx: f64, dy: f64, dz: f64) -> Result<Self> {
        let grid = GridSpec {
            nx,
            ny,
            nz,
            dx,
            dy,
            dz,
            depth: 0.0,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::Config(format!(
                "grid dimensions must be positive, got {}x{}x{}",
                self.nx, self.ny, self.nz
            )));
        }
        if !(self.dx > 0.0 && self.dy > 0.0 && self.dz > 0.0) {
            return Err(Error::Config(format!(
                "cell sizes must be positive, got {} {} {}",
                self.dx, self.dy, self.dz
            )));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Linear index of cell (i, j, k), x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        (i, j, k)
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }

    /// Distance between two cell centers measured in cell units.
    pub fn cell_distance(&self, a: usize, b: usize) -> f64 {
        let (ia, ja, ka) = self.coords(a);
        let (ib, jb, kb) = self.coords(b);
        let di = ia as f64 - ib as f64;
        let dj = ja as f64 - jb as f64;
        let dk = ka as f64 - kb as f64;
        (di * di + dj * dj + dk * dk).sqrt()
    }
}

/// A cell-centered scalar field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::Dimension(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value {} at cell {pos}",
                values[pos]
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.cell_count()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Horizontal slice of layer `k` as a row-major `ny x nx` image.
    pub fn layer(&self, k: usize) -> Vec<f64> {
        let n = self.grid.nx * self.grid.ny;
        self.values[k * n..(k + 1) * n].to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidModel {
    pub mu_w: f64,
    pub mu_o: f64,
}

impl FluidModel {
    pub fn new(mu_w: f64, mu_o: f64) -> Result<Self> {
        let fluid = FluidModel { mu_w, mu_o };
        fluid.validate()?;
        Ok(fluid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_w > 0.0 && self.mu_o > 0.0) {
            return Err(Error::Config("viscosities must be positive".into()));
        }
        Ok(())
    }
}

impl Default for FluidModel {
    fn default() -> Self {
        FluidModel {
            mu_w: 1.0,
            mu_o: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WellKind {
    Injector,
    Producer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WellControl {
    /// Water injection rate, STB/day.
    Rate(f64),
    /// Bottom-hole pressure, psia.
    Bhp(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellSpec {
    pub name: String,
    pub kind: WellKind,
    pub i: usize,
    pub j: usize,
    /// Completed layers, inclusive on both ends.
    pub k_range: (usize, usize),
    pub control: WellControl,
    #[serde(default = "default_rw")]
    pub rw: f64,
    #[serde(default)]
    pub skin: f64,
}

fn default_rw() -> f64 {
    0.25
}

impl WellSpec {
    pub fn injector(name: &str, i: usize, j: usize, rate: f64) -> Self {
        WellSpec {
            name: name.to_string(),
            kind: WellKind::Injector,
            i,
            j,
            k_range: (0, 0),
            control: WellControl::Rate(rate),
            rw: default_rw(),
            skin: 0.0,
        }
    }

    pub fn producer(name: &str, i: usize, j: usize, bhp: f64) -> Self {
        WellSpec {
            name: name.to_string(),
            kind: WellKind::Producer,
            i,
            j,
            k_range: (0, 0),
            control: WellControl::Bhp(bhp),
            rw: default_rw(),
            skin: 0.0,
        }
    }

    pub fn with_layers(mut self, k_first: usize, k_last: usize) -> Self {
        self.k_range = (k_first, k_last);
        self
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.i >= grid.nx || self.j >= grid.ny {
            return Err(Error::Config(format!(
                "well {} at ({}, {}) lies outside the {}x{} grid",
                self.name, self.i, self.j, grid.nx, grid.ny
            )));
        }
        let (k0, k1) = self.k_range;
        if k0 > k1 || k1 >= grid.nz {
            return Err(Error::Config(format!(
                "well {} has invalid completion range {k0}..={k1}",
                self.name
            )));
        }
        if !(self.rw > 0.0) {
            return Err(Error::Config(format!("well {} needs rw > 0", self.name)));
        }
        match (self.kind, self.control) {
            // Zero-rate injectors are accepted so that shut-in wells can be modelled.
            (WellKind::Injector, WellControl::Rate(q)) if q >= 0.0 => Ok(()),
            (WellKind::Producer, WellControl::Bhp(p)) if p > 0.0 => Ok(()),
            (WellKind::Injector, _) => Err(Error::Config(format!(
                "injector {} must be rate controlled with a nonnegative rate",
                self.name
            ))),
            (WellKind::Producer, _) => Err(Error::Config(format!(
                "producer {} must be BHP controlled with a positive pressure",
                self.name
            ))),
        }
    }

    /// Linear indices of completed cells, top to bottom.
    pub fn completions(&self, grid: &GridSpec) -> Vec<usize> {
        (self.k_range.0..=self.k_range.1)
            .map(|k| grid.index(self.i, self.j, k))
            .collect()
    }

    /// Peaceman geometric well index `K h / (ln(re/rw) + s)` (md·ft) for one
    /// completed cell, with `re = 0.14 sqrt(dx² + dy²)`.
    pub fn well_index(&self, grid: &GridSpec, perm: f64) -> f64 {
        let re = 0.14 * (grid.dx * grid.dx + grid.dy * grid.dy).sqrt();
        perm * grid.dz / ((re / self.rw).ln() + self.skin)
    }
}

/// Four rate injectors near the corners and four BHP producers on an inner
/// diamond, all completed over every layer. Names are `I1..I4`, `P1..P4`.
pub fn eight_spot(grid: &GridSpec, injection_rate: f64, producer_bhp: f64) -> Vec<WellSpec> {
    let inset = |n: usize, frac: usize| (n / frac).min(n - 1);
    let (nx, ny) = (grid.nx, grid.ny);
    let (ax, ay) = (inset(nx, 8), inset(ny, 8));
    let (bx, by) = (nx - 1 - ax, ny - 1 - ay);
    let (cx, cy) = (nx / 2, ny / 2);
    let (qx, qy) = (inset(nx, 4), inset(ny, 4));
    let last = grid.nz - 1;
    let inj = [(ax, ay), (bx, ay), (ax, by), (bx, by)];
    let prod = [(cx, qy), (qx, cy), (nx - 1 - qx, cy), (cx, ny - 1 - qy)];
    let mut wells = Vec::with_capacity(8);
    for (n, (i, j)) in inj.into_iter().enumerate() {
        wells.push(WellSpec::injector(&format!("I{}", n + 1), i, j, injection_rate).with_layers(0, last));
    }
    for (n, (i, j)) in prod.into_iter().enumerate() {
        wells.push(WellSpec::producer(&format!("P{}", n + 1), i, j, producer_bhp).with_layers(0, last));
    }
    wells
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// An interior face between cells `a` and `b` (b is the +axis neighbor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub a: usize,
    pub b: usize,
    /// Geometric transmissibility `DARCY * A / dl * H` in STB/day/psi per cp.
    pub trans: f64,
}

pub fn harmonic_mean(k1: f64, k2: f64) -> f64 {
    if k1 <= 0.0 || k2 <= 0.0 {
        return 0.0;
    }
    2.0 * k1 * k2 / (k1 + k2)
}

fn check_perm(grid: &GridSpec, perm: &ScalarField) -> Result<()> {
    if perm.values.len() != grid.cell_count() {
        return Err(Error::Dimension(format!(
            "permeability has {} values, grid has {} cells",
            perm.values.len(),
            grid.cell_count()
        )));
    }
    if let Some(pos) = perm.values.iter().position(|&k| !(k > 0.0)) {
        return Err(Error::InvalidField(format!(
            "permeability must be positive, cell {pos} has {}",
            perm.values[pos]
        )));
    }
    Ok(())
}

fn axis_faces(grid: &GridSpec, perm: &ScalarField, axis: Axis, out: &mut Vec<Face>) {
    let (geom, di, dj, dk) = match axis {
        Axis::X => (grid.dy * grid.dz / grid.dx, 1, 0, 0),
        Axis::Y => (grid.dx * grid.dz / grid.dy, 0, 1, 0),
        Axis::Z => (grid.dx * grid.dy / grid.dz, 0, 0, 1),
    };
    for k in 0..grid.nz - dk {
        for j in 0..grid.ny - dj {
            for i in 0..grid.nx - di {
                let a = grid.index(i, j, k);
                let b = grid.index(i + di, j + dj, k + dk);
                let h = harmonic_mean(perm.values[a], perm.values[b]);
                out.push(Face {
                    a,
                    b,
                    trans: DARCY * geom * h,
                });
            }
        }
    }
}

/// Transmissibility coefficients of all interior faces normal to `axis`,
/// ordered by the lower cell in x-fastest order.
pub fn face_transmissibility(grid: &GridSpec, perm: &ScalarField, axis: Axis) -> Result<Vec<f64>> {
    check_perm(grid, perm)?;
    let mut faces = Vec::new();
    axis_faces(grid, perm, axis, &mut faces);
    Ok(faces.into_iter().map(|f| f.trans).collect())
}

/// All interior faces of the grid (x faces, then y, then z). Boundary faces
/// carry no flux and are omitted.
pub fn interior_faces(grid: &GridSpec, perm: &ScalarField) -> Result<Vec<Face>> {
    check_perm(grid, perm)?;
    let mut faces = Vec::new();
    axis_faces(grid, perm, Axis::X, &mut faces);
    axis_faces(grid, perm, Axis::Y, &mut faces);
    axis_faces(grid, perm, Axis::Z, &mut faces);
    Ok(faces)
}
