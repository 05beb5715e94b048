//! Eight-spot waterflood on a 25x25 log-normal permeability field.
//!
//! Prints producer rates every 500 days and the mass balance.
//!
//! ```text
//! cargo run --release --example waterflood
//! ```

use std::time::Instant;

use histmatch::grid::{eight_spot, FluidModel, GridSpec, RelPermTable};
use histmatch::prior::{Prior, PriorConfig};
use histmatch::sim::{run_simulation, Reservoir, SimConfig};

fn main() -> histmatch::Result<()> {
    let grid = GridSpec::new(25, 25, 1, 50.0, 50.0, 20.0)?;
    let prior = Prior::new(grid, PriorConfig::default())?;
    let (perm, poro) = prior.decode(&prior.sample(1, 7)[0])?;
    let res = Reservoir {
        grid,
        perm,
        poro,
        relperm: RelPermTable::default_corey(),
        fluid: FluidModel::default(),
        wells: eight_spot(&grid, 500.0, 100.0),
    };

    let start = Instant::now();
    let out = run_simulation(&res, &SimConfig::baseline())?;
    let elapsed = start.elapsed();

    println!("{:>6} {:>6} {:>10} {:>10} {:>6}", "day", "well", "oil", "water", "wct");
    for (t, day) in out.times.iter().enumerate() {
        if (*day as usize) % 500 != 0 {
            continue;
        }
        for p in &out.producers {
            println!(
                "{:>6} {:>6} {:>10.2} {:>10.2} {:>6.3}",
                day, p.name, p.oil[t], p.water[t], p.water_cut[t]
            );
        }
    }
    let steps: usize = out.macro_steps.iter().sum();
    println!("{} report steps, {steps} pressure solves, {elapsed:.2?}", out.report_count());
    println!("mass balance relative error {:.3e}", out.balance.relative_error());
    Ok(())
}
