use super::solver::{conjugate_gradient, CgSettings, CgStats, CsrMatrix};
use super::Discretization;
use crate::error::{Error, Result};

/// The linear pressure system `A p = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl Discretization<'_> {
    /// Neumann (no-flux) finite-volume operator `-div(T grad p)` with face
    /// coefficients `T_face * (lambda_a + lambda_b) / 2`. Row sums are zero.
    pub fn flow_operator(&self, total_mobility: &[f64]) -> Vec<Vec<(usize, f64)>> {
        let n = self.cell_count();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(7); n];
        for face in &self.faces {
            let coef = face.trans * 0.5 * (total_mobility[face.a] + total_mobility[face.b]);
            rows[face.a].push((face.a, coef));
            rows[face.a].push((face.b, -coef));
            rows[face.b].push((face.b, coef));
            rows[face.b].push((face.a, -coef));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            if row.is_empty() {
                row.push((i, 0.0));
            }
        }
        rows
    }

    /// Assemble the pressure system at water saturation `sw`. Rate injectors
    /// contribute to `b`; BHP wells add `c WI lambda_t` to the diagonal and
    /// `c WI lambda_t p_wf` to `b`.
    pub fn assemble(&self, sw: &[f64]) -> Result<PressureSystem> {
        let lt = self.total_mobility(sw);
        self.assemble_with_mobility(&lt)
    }

    pub(crate) fn assemble_with_mobility(&self, lt: &[f64]) -> Result<PressureSystem> {
        if !self.wells.iter().any(|w| w.bhp().is_some()) {
            return Err(Error::SingularSystem(
                "no BHP-controlled well; the no-flux operator has a null space".into(),
            ));
        }
        Ok(self.assemble_unchecked(lt))
    }

    /// Assembly without the singularity guard, for diagnostics.
    pub(crate) fn assemble_unchecked(&self, lt: &[f64]) -> PressureSystem {
        let mut rows = self.flow_operator(lt);
        let mut rhs = vec![0.0; self.cell_count()];
        self.add_well_terms(lt, &mut rows, &mut rhs);
        PressureSystem {
            matrix: CsrMatrix::from_rows(rows),
            rhs,
        }
    }

    fn add_well_terms(&self, lt: &[f64], rows: &mut [Vec<(usize, f64)>], rhs: &mut [f64]) {
        for well in &self.wells {
            if let Some(p_wf) = well.bhp() {
                for c in &well.completions {
                    let g = super::well::connection_factor(c.wi) * lt[c.cell] / super::well::FVF;
                    rows[c.cell].push((c.cell, g));
                    rhs[c.cell] += g * p_wf;
                }
            } else {
                for (c, q) in well.completions.iter().zip(well.injection_shares(lt)) {
                    rhs[c.cell] += q;
                }
            }
        }
    }

    /// Solve the pressure system, warm-starting from `guess`.
    pub fn solve_pressure(&self, system: &PressureSystem, guess: &mut [f64], cg: CgSettings) -> Result<CgStats> {
        conjugate_gradient(&system.matrix, &system.rhs, guess, cg)
    }
}

/// Solve `A x = b` with Jacobi-preconditioned conjugate gradients from a zero
/// initial guess.
pub fn solve_pressure(system: &PressureSystem, cg: CgSettings) -> Result<Vec<f64>> {
    let mut x = vec![0.0; system.rhs.len()];
    conjugate_gradient(&system.matrix, &system.rhs, &mut x, cg)?;
    Ok(x)
}
