//! Train the CCR well-rate surrogate on simulator runs and compare its rates
//! with the Peaceman labels of a held-out run.
//!
//! ```text
//! cargo run --release --example surrogate [runs]
//! ```

use histmatch::ccr::CcrConfig;
use histmatch::grid::{eight_spot, FluidModel, GridSpec, RelPermTable};
use histmatch::prior::{Prior, PriorConfig};
use histmatch::rng::Stream;
use histmatch::sim::{run_simulation, Reservoir, SimConfig};
use histmatch::surrogate::{build_features, generate_labels, train_surrogate, FeatureSchema, RatesDataset};

fn main() -> histmatch::Result<()> {
    let runs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    let grid = GridSpec::new(15, 15, 1, 50.0, 50.0, 20.0)?;
    let prior = Prior::new(grid, PriorConfig::default())?;
    let wells = eight_spot(&grid, 300.0, 100.0);
    let schema = FeatureSchema::from_wells(&wells)?;
    let sim = SimConfig {
        total_time: 1500.0,
        saturation_substeps: 10,
        ..SimConfig::baseline()
    };

    let mut data = RatesDataset::new(schema.clone());
    let mut last = None;
    for r in 0..=runs {
        let (perm, poro) = prior.decode(&prior.draw(0, Stream::Training, r))?;
        let res = Reservoir {
            grid,
            perm,
            poro,
            relperm: RelPermTable::default_corey(),
            fluid: FluidModel::default(),
            wells: wells.clone(),
        };
        let out = run_simulation(&res, &sim)?;
        let x = build_features(&out, &res.perm, &wells, &schema)?;
        let y = generate_labels(&out, &res, &schema)?;
        if r < runs {
            data.push_run(x.rows, y)?;
        } else {
            last = Some((x, y));
        }
    }

    let surrogate = train_surrogate(&data, &CcrConfig::default())?;
    println!("{:<10} {:>12} {:>10}", "channel", "val MSE", "val relL2");
    for ch in &surrogate.channels {
        println!("{:<10} {:>12.3} {:>10.4}", ch.name, ch.validation_mse, ch.validation_rel_l2);
    }

    let (x, y) = last.expect("one unseen run");
    let pred = surrogate.infer_rates(&x)?;
    let names = schema.channel_names();
    println!("unseen run, {} oil rate (label / surrogate):", names[0]);
    for t in (0..y.len()).step_by(3) {
        println!("  step {t:>2}: {:>8.2} / {:>8.2}", y[t][0], pred[t][0]);
    }
    Ok(())
}
