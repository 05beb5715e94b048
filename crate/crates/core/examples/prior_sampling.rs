//! Karhunen-Loève log-normal and channelized priors.
//!
//! ```text
//! cargo run --release --example prior_sampling
//! ```

use histmatch::grid::GridSpec;
use histmatch::prior::{Prior, PriorConfig, PriorKind};

fn ascii(values: &[f64], nx: usize, lo: f64, hi: f64) {
    let ramp = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for row in values.chunks(nx).rev() {
        let line: String = row
            .iter()
            .map(|v| {
                let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                ramp[(t * (ramp.len() - 1) as f64).round() as usize]
            })
            .collect();
        println!("  {line}");
    }
}

fn main() -> histmatch::Result<()> {
    let grid = GridSpec::new(30, 30, 1, 50.0, 50.0, 20.0)?;

    let lognormal = Prior::new(grid, PriorConfig::default())?;
    println!(
        "log-normal: rank {} captures {:.1}% of the kernel variance",
        lognormal.basis.rank(),
        100.0 * lognormal.basis.captured_variance()
    );
    for (m, u) in lognormal.sample(2, 1).iter().enumerate() {
        let lk = lognormal.log_perm(u)?;
        let (lo, hi) = lk.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        println!("member {m}: ln K in [{lo:.2}, {hi:.2}]");
        ascii(&lk, grid.nx, 2.0, 7.0);
    }

    let bimodal = Prior::new(
        grid,
        PriorConfig {
            kind: PriorKind::Bimodal,
            ..PriorConfig::default()
        },
    )?;
    let u = &bimodal.sample(1, 1)[0];
    let (perm, poro) = bimodal.decode(u)?;
    let sand = perm.values.iter().filter(|&&k| k > 100.0).count();
    println!(
        "channelized member: {sand} of {} cells are sand, porosity in [{:.3}, {:.3}]",
        grid.cell_count(),
        poro.values.iter().cloned().fold(f64::INFINITY, f64::min),
        poro.values.iter().cloned().fold(0.0, f64::max)
    );
    ascii(&perm.values.iter().map(|k| k.ln()).collect::<Vec<_>>(), grid.nx, 2.0, 7.0);
    Ok(())
}
