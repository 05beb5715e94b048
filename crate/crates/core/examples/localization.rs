//! Gaspari-Cohn taper and its effect on a spatial ensemble update.
//!
//! Prints the taper profile, then updates a channelized (cell-wise) ensemble
//! with and without localization against one datum at a single well and
//! reports how far from the well the update reaches.
//!
//! ```text
//! cargo run --release --example localization
//! ```

use histmatch::grid::GridSpec;
use histmatch::inversion::{eki_update, gaspari_cohn, localization_matrix, DatumMeta, Observations, Quantity};
use histmatch::prior::{Prior, PriorConfig, PriorKind};

fn main() -> histmatch::Result<()> {
    let c = 4.0;
    println!("{:>5} {:>8}", "z/c", "rho");
    for k in 0..=8 {
        let z = k as f64 * 0.25 * c;
        println!("{:>5.2} {:>8.5}", z / c, gaspari_cohn(z, c));
    }

    let grid = GridSpec::new(20, 20, 1, 50.0, 50.0, 20.0)?;
    let prior = Prior::new(
        grid,
        PriorConfig {
            kind: PriorKind::Bimodal,
            ..PriorConfig::default()
        },
    )?;
    let u = prior.sample(40, 5);
    let well = grid.index(3, 3, 0);
    // The datum is the log-permeability at the well cell.
    let g: Vec<Vec<f64>> = u.iter().map(|m| vec![m[well]]).collect();
    let meta = vec![DatumMeta {
        well: "W".into(),
        step: 0,
        quantity: Quantity::OilRate,
        cell: Some(well),
    }];
    let obs = Observations::new(vec![7.0], vec![0.01], meta.clone(), 1)?;
    let taper = localization_matrix(&grid, &prior.param_cells(), &meta, c)?;

    let plain = eki_update(&u, &g, &obs, 1.0, None, 1, 0)?;
    let local = eki_update(&u, &g, &obs, 1.0, Some(&taper), 1, 0)?;
    let n = grid.cell_count();
    let reach = |post: &[Vec<f64>]| {
        (0..n)
            .filter(|&p| post.iter().zip(&u).any(|(a, b)| (a[p] - b[p]).abs() > 1e-12))
            .map(|p| grid.cell_distance(p, well))
            .fold(0.0, f64::max)
    };
    println!("farthest changed cell without taper: {:.1} cells", reach(&plain));
    println!("farthest changed cell with taper:    {:.1} cells (support {})", reach(&local), 2.0 * c);
    Ok(())
}
