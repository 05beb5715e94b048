//! Cluster-classify-regress on a discontinuous target.
//!
//! Fits `y = 1[x > 0] + 0.1 x` with two experts and compares the held-out
//! error with a single global ridge line.
//!
//! ```text
//! cargo run --release --example ccr_step
//! ```

use histmatch::ccr::{ridge_fit, CcrConfig, CcrModel, RegressorKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn target(x: f64) -> f64 {
    let step = if x > 0.0 { 1.0 } else { 0.0 };
    step + 0.1 * x
}

fn main() -> histmatch::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let xs: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (train, test) = xs.split_at(400);
    let x: Vec<Vec<f64>> = train.iter().map(|&v| vec![v]).collect();
    let y: Vec<f64> = train.iter().map(|&v| target(v)).collect();

    let cfg = CcrConfig {
        clusters: 2,
        ..CcrConfig::default()
    };
    let (model, report) = CcrModel::fit(&x, &y, &cfg)?;
    let line = ridge_fit(&x, &y, RegressorKind::Linear, 1e-8);

    let mse = |f: &dyn Fn(f64) -> f64| test.iter().map(|&v| (f(v) - target(v)).powi(2)).sum::<f64>() / test.len() as f64;
    let ccr = mse(&|v| model.predict(&[v]));
    let ridge = mse(&|v| line[0] * v + line[1]);

    println!("k-means objective     {:.4}", report.clustering_objective);
    println!("gate training loss    {:.4}", report.classifier_loss.last().copied().unwrap_or(f64::NAN));
    println!("test MSE, CCR (L=2)   {ccr:.3e}");
    println!("test MSE, ridge line  {ridge:.3e}");
    println!("ratio                 {:.4}", ccr / ridge);
    for v in [-0.5, -0.05, 0.05, 0.5] {
        println!("x = {v:>5}: expert {} predicts {:.4} (true {:.4})", model.route(&[v]), model.predict(&[v]), target(v));
    }
    Ok(())
}
