//! Structural similarity between a log-permeability map and distorted copies.
//!
//! ```text
//! cargo run --release --example ssim_compare
//! ```

use histmatch::grid::{GridSpec, ScalarField};
use histmatch::metrics::{phi_ssim, ssim, SsimConfig};
use histmatch::prior::{Prior, PriorConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

fn main() -> histmatch::Result<()> {
    let grid = GridSpec::new(25, 25, 1, 50.0, 50.0, 20.0)?;
    let prior = Prior::new(grid, PriorConfig::default())?;
    let members = prior.sample(3, 11);
    let field = |u: &[f64]| -> histmatch::Result<ScalarField> { ScalarField::new(grid, prior.log_perm(u)?) };
    let truth = field(&members[0])?;

    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 0.3).expect("valid std");
    let noisy = ScalarField::new(grid, truth.values.iter().map(|v| v + noise.sample(&mut rng)).collect())?;
    let offset = ScalarField::new(grid, truth.values.iter().map(|v| v + 0.5).collect())?;
    let flat = ScalarField::constant(grid, truth.values.iter().sum::<f64>() / truth.len() as f64);
    let shifted = ScalarField::new(
        grid,
        (0..grid.cell_count())
            .map(|c| {
                let (i, j, _) = grid.coords(c);
                truth.values[grid.index((i + 3) % grid.nx, j, 0)]
            })
            .collect(),
    )?;

    let cfg = SsimConfig::default();
    let cases = [
        ("identical", &truth),
        ("noise sd 0.3", &noisy),
        ("offset +0.5", &offset),
        ("shifted 3 cells", &shifted),
        ("ensemble mean", &flat),
        ("other member", &field(&members[1])?),
        ("third member", &field(&members[2])?),
    ];
    println!("{:<16} {:>8} {:>8}", "field", "SSIM", "phi");
    for (name, f) in cases {
        let s = ssim(&truth, f, &cfg)?;
        println!("{name:<16} {s:>8.4} {:>8.4}", phi_ssim(s));
    }
    Ok(())
}
