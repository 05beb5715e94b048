use super::*;
use crate::ccr::CcrConfig;
use crate::grid::{eight_spot, FluidModel, GridSpec, RelPermTable, ScalarField, WellSpec};
use crate::sim::{run_simulation, SimConfig};

fn reservoir(grid: GridSpec, perm: Vec<f64>, wells: Vec<WellSpec>) -> Reservoir {
    Reservoir {
        grid,
        perm: ScalarField::new(grid, perm).unwrap(),
        poro: ScalarField::constant(grid, 0.2),
        relperm: RelPermTable::default_corey(),
        fluid: FluidModel::default(),
        wells,
    }
}

fn short_config() -> SimConfig {
    SimConfig {
        total_time: 600.0,
        report_step: 100.0,
        ..SimConfig::baseline()
    }
}

fn layered_case() -> (Reservoir, SimulationResult) {
    let grid = GridSpec::new(6, 5, 3, 50.0, 50.0, 20.0).unwrap();
    let perm: Vec<f64> = (0..grid.cell_count()).map(|c| 20.0 + 7.0 * ((c * 37) % 11) as f64).collect();
    let wells = vec![
        WellSpec::injector("I1", 0, 0, 300.0),
        WellSpec::producer("PB", 5, 4, 150.0).with_layers(0, 2),
        WellSpec::producer("PA", 3, 1, 200.0).with_layers(1, 2),
    ];
    let res = reservoir(grid, perm, wells);
    let out = run_simulation(&res, &short_config()).unwrap();
    (res, out)
}

#[test]
fn schema_sorts_producers() {
    let s = FeatureSchema::new(vec!["P2".into(), "P10".into(), "P1".into()]).unwrap();
    assert_eq!(s.producers, ["P1", "P10", "P2"]);
    assert_eq!(s.feature_len(), 10);
    assert_eq!(s.channel_names()[..2], ["P1.oil".to_string(), "P1.water".to_string()]);
    assert!(FeatureSchema::new(vec![]).is_err());
}

#[test]
fn features_match_explicit_index_sums() {
    let (res, out) = layered_case();
    let schema = FeatureSchema::from_wells(&res.wells).unwrap();
    assert_eq!(schema.producers, ["PA", "PB"]);
    let table = build_features(&out, &res.perm, &res.wells, &schema).unwrap();
    assert_eq!(table.rows.len(), out.report_count());
    let (nx, ny) = (6, 5);
    let at = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    for (t, row) in table.rows.iter().enumerate() {
        let sw = &out.sw[t].values;
        let p = &out.pressure[t].values;
        let k = &res.perm.values;
        let pa = [at(3, 1, 1), at(3, 1, 2)];
        let pb = [at(5, 4, 0), at(5, 4, 1), at(5, 4, 2)];
        let kpa = (k[pa[0]] + k[pa[1]]) / 2.0;
        let spa = (sw[pa[0]] + sw[pa[1]]) / 2.0;
        let kpb = (k[pb[0]] + k[pb[1]] + k[pb[2]]) / 3.0;
        let spb = (sw[pb[0]] + sw[pb[1]] + sw[pb[2]]) / 3.0;
        let pbar = ((p[pa[0]] + p[pa[1]]) / 2.0 + (p[pb[0]] + p[pb[1]] + p[pb[2]]) / 3.0) / 2.0;
        let want = [kpa, spa, 1.0 - spa, kpb, spb, 1.0 - spb, pbar];
        for (a, b) in row.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{row:?} vs {want:?}");
        }
    }
}

#[test]
fn single_layer_average_is_cell_value_and_uniform_pressure() {
    let grid = GridSpec::new(5, 5, 1, 50.0, 50.0, 20.0).unwrap();
    let wells = vec![WellSpec::producer("P", 2, 2, 800.0)];
    let res = reservoir(grid, vec![75.0; 25], wells);
    let cfg = SimConfig {
        initial_pressure: 800.0,
        ..short_config()
    };
    let out = run_simulation(&res, &cfg).unwrap();
    let schema = FeatureSchema::from_wells(&res.wells).unwrap();
    let table = build_features(&out, &res.perm, &res.wells, &schema).unwrap();
    for (t, row) in table.rows.iter().enumerate() {
        assert_eq!(row[0], 75.0);
        assert_eq!(row[1], out.sw[t].values[12]);
        assert!((row[3] - 800.0).abs() < 1e-6);
    }
    // Zero drawdown: all labels vanish.
    let labels = generate_labels(&out, &res, &schema).unwrap();
    assert!(labels.iter().flatten().all(|&v| v.abs() < 1e-6));
}

#[test]
fn labels_equal_simulator_log_bit_exactly() {
    let (res, out) = layered_case();
    let schema = FeatureSchema::from_wells(&res.wells).unwrap();
    let labels = generate_labels(&out, &res, &schema).unwrap();
    for (t, row) in labels.iter().enumerate() {
        for (p, name) in schema.producers.iter().enumerate() {
            let series = out.producer(name).unwrap();
            assert_eq!(row[2 * p], series.oil[t]);
            assert_eq!(row[2 * p + 1], series.water[t]);
        }
    }
}

#[test]
fn connate_water_gives_zero_water_labels() {
    let grid = GridSpec::new(7, 7, 1, 50.0, 50.0, 20.0).unwrap();
    let wells = eight_spot(&grid, 0.0, 100.0);
    let res = reservoir(grid, vec![100.0; 49], wells);
    let out = run_simulation(&res, &short_config()).unwrap();
    let schema = FeatureSchema::from_wells(&res.wells).unwrap();
    let labels = generate_labels(&out, &res, &schema).unwrap();
    for row in &labels {
        for p in 0..4 {
            assert_eq!(row[2 * p + 1], 0.0);
        }
    }
}

#[test]
fn zero_labels_give_zero_predictions() {
    let schema = FeatureSchema::new(vec!["P".into()]).unwrap();
    let mut data = RatesDataset::new(schema.clone());
    for b in 0..3 {
        let x: Vec<Vec<f64>> = (0..5).map(|t| vec![b as f64, t as f64 * 0.1, 1.0 - t as f64 * 0.1, 500.0 + t as f64]).collect();
        data.push_run(x, vec![vec![0.0, 0.0]; 5]).unwrap();
    }
    let s = train_surrogate(&data, &CcrConfig { clusters: 2, ..CcrConfig::default() }).unwrap();
    let table = FeatureTable {
        schema,
        rows: vec![vec![0.5, 0.3, 0.7, 502.0]],
    };
    assert_eq!(s.infer_rates(&table).unwrap(), vec![vec![0.0, 0.0]]);
}

#[test]
fn single_run_single_cluster_is_ridge() {
    let (res, out) = layered_case();
    let schema = FeatureSchema::from_wells(&res.wells).unwrap();
    let table = build_features(&out, &res.perm, &res.wells, &schema).unwrap();
    let labels = generate_labels(&out, &res, &schema).unwrap();
    let mut data = RatesDataset::new(schema);
    data.push_run(table.rows.clone(), labels.clone()).unwrap();
    let cfg = CcrConfig {
        clusters: 1,
        ..CcrConfig::default()
    };
    let s = train_surrogate(&data, &cfg).unwrap();
    assert!(s.validation_runs.is_empty());
    for (c, model) in s.models.iter().enumerate() {
        let y: Vec<f64> = labels.iter().map(|r| r[c]).collect();
        let (direct, _) = CcrModel::fit(&table.rows, &y, &cfg).unwrap();
        assert_eq!(model, &direct);
    }
}

#[test]
fn permuted_schema_is_rejected_and_bundle_roundtrips() {
    let (res, out) = layered_case();
    let schema = FeatureSchema::from_wells(&res.wells).unwrap();
    let table = build_features(&out, &res.perm, &res.wells, &schema).unwrap();
    let labels = generate_labels(&out, &res, &schema).unwrap();
    let mut data = RatesDataset::new(schema.clone());
    data.push_run(table.rows.clone(), labels).unwrap();
    let s = train_surrogate(&data, &CcrConfig { clusters: 1, ..CcrConfig::default() }).unwrap();
    let permuted = FeatureTable {
        schema: FeatureSchema {
            producers: vec!["PB".into(), "PA".into()],
        },
        rows: table.rows.clone(),
    };
    assert!(s.infer_rates(&permuted).is_err());
    let preds = s.infer_rates(&table).unwrap();
    assert!(preds.iter().flatten().all(|&v| v >= 0.0));

    let dir = tempfile::tempdir().unwrap();
    s.save(dir.path()).unwrap();
    let back = Surrogate::load(dir.path()).unwrap();
    assert_eq!(back.models, s.models);
    assert_eq!(back.schema, s.schema);

    let csv = dir.path().join("rates.csv");
    write_dataset_csv(&csv, &data).unwrap();
    assert_eq!(read_dataset_csv(&csv).unwrap(), data);
}

#[test]
fn split_is_ninety_ten_by_run() {
    assert_eq!(split_runs(1), (vec![0], vec![]));
    let (t, v) = split_runs(30);
    assert_eq!((t.len(), v), (27, vec![27, 28, 29]));
    let (t, v) = split_runs(5);
    assert_eq!((t.len(), v.len()), (4, 1));
}
