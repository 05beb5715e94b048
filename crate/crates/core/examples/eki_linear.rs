//! One ensemble Kalman step on a linear-Gaussian problem against the exact
//! posterior mean.
//!
//! With `G(u) = A u`, prior `N(0, I)` and noise `N(0, Γ)` the posterior mean is
//! `A^T (A A^T + Γ)^-1 y`. The ensemble estimate converges as `J` grows.
//!
//! ```text
//! cargo run --release --example eki_linear
//! ```

use histmatch::inversion::{eki_update, ensemble_mean, DatumMeta, Observations, Quantity};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> histmatch::Result<()> {
    let a = DMatrix::from_row_slice(4, 3, &[1.0, 0.5, 0.0, 0.0, 1.0, -0.3, 0.2, 0.0, 1.0, 0.7, 0.7, 0.7]);
    let gamma = vec![0.05; 4];
    let y = vec![0.8, -0.4, 0.3, 1.1];
    let meta = (0..4)
        .map(|k| DatumMeta {
            well: format!("d{k}"),
            step: 0,
            quantity: Quantity::OilRate,
            cell: None,
        })
        .collect();
    let obs = Observations::new(y.clone(), gamma.clone(), meta, 1)?;

    let s = &a * a.transpose() + DMatrix::from_diagonal(&DVector::from_vec(gamma));
    let exact = a.transpose() * s.try_inverse().expect("SPD") * DVector::from_vec(y);
    println!("exact posterior mean {:.4?}", exact.as_slice());

    for j in [100, 1000, 10_000] {
        let mut rng = ChaCha20Rng::seed_from_u64(j as u64);
        let u: Vec<Vec<f64>> = (0..j).map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let g: Vec<Vec<f64>> = u.iter().map(|v| (&a * DVector::from_column_slice(v)).as_slice().to_vec()).collect();
        let post = eki_update(&u, &g, &obs, 1.0, None, 1, 0)?;
        let mean = DVector::from_vec(ensemble_mean(&post));
        println!("J = {j:>5}: mean {:.4?}  error {:.4}", mean.as_slice(), (&mean - &exact).norm());
    }
    Ok(())
}
