//! Compressed sparse row storage and a Jacobi-preconditioned conjugate
//! gradient solver for the symmetric positive definite pressure system.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row entry lists. Entries within a row are sorted by
    /// column and duplicates summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < n, "column {c} out of range for {n}x{n} matrix");
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix::from_rows((0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    /// `b - A x`
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; self.n];
        self.mul_vec(x, &mut ax);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        CgSettings {
            tol: 1e-10,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` in place, starting from the current contents of `x`.
/// Converged when `||b - A x|| <= tol ||b||`.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], x: &mut [f64], settings: CgSettings) -> Result<CgStats> {
    let n = a.dim();
    if b.len() != n || x.len() != n {
        return Err(Error::Dimension(format!(
            "cg: matrix is {n}x{n}, rhs {} and guess {}",
            b.len(),
            x.len()
        )));
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = a.residual(x, b);
    let mut rel = norm(&r) / b_norm;
    if rel <= settings.tol {
        return Ok(CgStats {
            iterations: 0,
            relative_residual: rel,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);

    for iter in 1..=settings.max_iter {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverDiverged {
                iterations: iter,
                residual: rel,
            });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        rel = norm(&r) / b_norm;
        if rel <= settings.tol {
            // Confirm against the true residual; recurrences drift.
            let true_rel = norm(&a.residual(x, b)) / b_norm;
            if true_rel <= settings.tol {
                return Ok(CgStats {
                    iterations: iter,
                    relative_residual: true_rel,
                });
            }
            r = a.residual(x, b);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDiverged {
        iterations: settings.max_iter,
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.5, 0.0, 7.0];
        let mut x = vec![0.0; 5];
        cg_ok(&a, &b, &mut x);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-12);
        }
    }

    fn cg_ok(a: &CsrMatrix, b: &[f64], x: &mut [f64]) -> CgStats {
        conjugate_gradient(a, b, x, CgSettings { tol: 1e-10, max_iter: 1000 }).unwrap()
    }

    fn random_spd(n: usize, rng: &mut ChaCha20Rng) -> CsrMatrix {
        // Diagonally dominant symmetric sparse matrix.
        let mut rows = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.3 {
                    let v = -rng.random::<f64>();
                    rows[i].push((j, v));
                    rows[j].push((i, v));
                }
            }
        }
        for (i, row) in rows.iter_mut().enumerate() {
            let off: f64 = row.iter().map(|(_, v): &(usize, f64)| v.abs()).sum();
            row.push((i, off + 0.1 + rng.random::<f64>()));
        }
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn matches_dense_lu_on_9x9() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let a = random_spd(9, &mut rng);
        let b: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut x = vec![0.0; 9];
        let stats = cg_ok(&a, &b, &mut x);
        assert!(stats.relative_residual <= 1e-10);
        let dense = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
        let scale = dense.amax();
        for i in 0..9 {
            assert!((x[i] - dense[i]).abs() <= 10.0 * 1e-10 * scale);
        }
    }

    #[test]
    fn residual_below_tol_on_random_spd() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for n in [4, 20, 60] {
            let a = random_spd(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mut x = vec![0.0; n];
            cg_ok(&a, &b, &mut x);
            let r = a.residual(&x, &b);
            assert!(norm(&r) <= 1e-10 * norm(&b));
        }
    }

    #[test]
    fn reports_nonconvergence() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let a = random_spd(40, &mut rng);
        let b = vec![1.0; 40];
        let mut x = vec![0.0; 40];
        let err = conjugate_gradient(&a, &b, &mut x, CgSettings { tol: 1e-14, max_iter: 1 }).unwrap_err();
        assert!(matches!(err, Error::SolverDiverged { iterations: 1, .. }));
    }

    #[test]
    fn duplicate_entries_are_summed() {
        let a = CsrMatrix::from_rows(vec![vec![(0, 1.0), (0, 2.0)], vec![(1, 1.0)]]);
        assert_eq!(a.get(0, 0), 3.0);
    }
}
