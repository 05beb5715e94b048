//! CCR emulation of producer well rates from completion-averaged state.
//!
//! For every report step a feature row is built from the simulator fields:
//!
//! ```text
//! [K̄_1, S̄w_1, S̄o_1, ..., K̄_N, S̄w_N, S̄o_N, p̄]
//! ```
//!
//! where bars are averages over each producer's completed layers, producers
//! are ordered by name and `p̄` is the pressure averaged over all producer
//! completions. Labels are the Peaceman `(oil, water)` rates of each
//! producer. One CCR model is trained per rate channel and each time step is
//! an independent sample.

mod dataset;

pub use dataset::{read_dataset_csv, write_dataset_csv, RatesDataset};

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::ccr::{read_model, write_model, CcrConfig, CcrModel};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, WellKind, WellSpec};
use crate::sim::well::resolve_wells;
use crate::sim::{Reservoir, SimulationResult};

/// Ordered producer list defining the feature and label layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    pub producers: Vec<String>,
}

impl FeatureSchema {
    pub fn new(mut producers: Vec<String>) -> Result<Self> {
        producers.sort();
        let schema = FeatureSchema { producers };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_wells(wells: &[WellSpec]) -> Result<Self> {
        Self::new(
            wells
                .iter()
                .filter(|w| w.kind == WellKind::Producer)
                .map(|w| w.name.clone())
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.producers.is_empty() {
            return Err(Error::Config("feature schema needs at least one producer".into()));
        }
        if self.producers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("schema producers must be unique and sorted by name".into()));
        }
        Ok(())
    }

    pub fn feature_len(&self) -> usize {
        3 * self.producers.len() + 1
    }

    pub fn channel_count(&self) -> usize {
        2 * self.producers.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.feature_len());
        for p in &self.producers {
            names.push(format!("{p}.perm"));
            names.push(format!("{p}.sw"));
            names.push(format!("{p}.so"));
        }
        names.push("pressure".into());
        names
    }

    /// `P.oil, P.water` per producer.
    pub fn channel_names(&self) -> Vec<String> {
        self.producers
            .iter()
            .flat_map(|p| [format!("{p}.oil"), format!("{p}.water")])
            .collect()
    }
}

/// Feature rows tagged with the schema that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<f64>>,
}

fn producer_specs<'a>(wells: &'a [WellSpec], schema: &FeatureSchema) -> Result<Vec<&'a WellSpec>> {
    schema
        .producers
        .iter()
        .map(|name| {
            wells
                .iter()
                .find(|w| &w.name == name && w.kind == WellKind::Producer)
                .ok_or_else(|| Error::Config(format!("producer {name} is not in the well list")))
        })
        .collect()
}

/// One feature row per report step of `result`.
pub fn build_features(
    result: &SimulationResult,
    perm: &ScalarField,
    wells: &[WellSpec],
    schema: &FeatureSchema,
) -> Result<FeatureTable> {
    schema.validate()?;
    if result.report_count() == 0 {
        return Err(Error::Config("simulation result has no report steps".into()));
    }
    let grid = &result.grid;
    let cells: Vec<Vec<usize>> = producer_specs(wells, schema)?
        .iter()
        .map(|w| {
            let c = w.completions(grid);
            if c.is_empty() {
                Err(Error::Config(format!("producer {} has no completions", w.name)))
            } else {
                Ok(c)
            }
        })
        .collect::<Result<_>>()?;
    let avg = |field: &[f64], c: &[usize]| c.iter().map(|&i| field[i]).sum::<f64>() / c.len() as f64;
    let rows = (0..result.report_count())
        .map(|t| {
            let sw = &result.sw[t].values;
            let p = &result.pressure[t].values;
            let mut row = Vec::with_capacity(schema.feature_len());
            let mut pressure = 0.0;
            for c in &cells {
                let s = avg(sw, c);
                row.extend([avg(&perm.values, c), s, 1.0 - s]);
                pressure += avg(p, c);
            }
            row.push(pressure / cells.len() as f64);
            row
        })
        .collect();
    Ok(FeatureTable {
        schema: schema.clone(),
        rows,
    })
}

/// Peaceman `(oil, water)` rates per producer per report step, through the
/// same well routine the simulator logs its rates with.
pub fn generate_labels(result: &SimulationResult, res: &Reservoir, schema: &FeatureSchema) -> Result<Vec<Vec<f64>>> {
    schema.validate()?;
    let resolved = resolve_wells(&res.wells, &res.grid, &res.perm);
    let wells = schema
        .producers
        .iter()
        .map(|name| {
            let w = resolved
                .iter()
                .find(|w| &w.spec.name == name)
                .ok_or_else(|| Error::Config(format!("producer {name} is not in the well list")))?;
            if w.bhp().is_none() {
                return Err(Error::Config(format!("producer {name} is not BHP-controlled")));
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..result.report_count())
        .map(|t| {
            wells
                .iter()
                .flat_map(|w| {
                    let (o, wr) = w.producer_rates(&res.relperm, &res.fluid, &result.pressure[t].values, &result.sw[t].values);
                    [o, wr]
                })
                .collect()
        })
        .collect())
}

/// Held-out quality of one rate channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub name: String,
    pub validation_mse: f64,
    /// `‖ŷ − y‖₂ / ‖y‖₂` on the validation rows (NaN when there are none).
    pub validation_rel_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub schema: FeatureSchema,
    pub models: Vec<CcrModel>,
    pub train_runs: Vec<usize>,
    pub validation_runs: Vec<usize>,
    pub channels: Vec<ChannelReport>,
}

/// Runs with index `>= ceil(0.9 B)` are held out (none when `B = 1`).
pub fn split_runs(batches: usize) -> (Vec<usize>, Vec<usize>) {
    let cut = if batches <= 1 { batches } else { (9 * batches).div_ceil(10).min(batches - 1) };
    ((0..cut).collect(), (cut..batches).collect())
}

fn relative_l2(pred: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = pred.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Fit one CCR per rate channel on the training runs, in parallel.
pub fn train_surrogate(data: &RatesDataset, config: &CcrConfig) -> Result<Surrogate> {
    data.validate()?;
    let (train_runs, validation_runs) = split_runs(data.features.len());
    let rows = |runs: &[usize]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for &b in runs {
            x.extend(data.features[b].iter().cloned());
            y.extend(data.labels[b].iter().cloned());
        }
        (x, y)
    };
    let (xt, yt) = rows(&train_runs);
    let (xv, yv) = rows(&validation_runs);
    let names = data.schema.channel_names();
    if xt.len() < config.clusters {
        return Err(Error::Config(format!(
            "{} training rows cannot support {} clusters",
            xt.len(),
            config.clusters
        )));
    }
    let fitted: Vec<(CcrModel, ChannelReport)> = names
        .par_iter()
        .enumerate()
        .map(|(c, name)| {
            let y: Vec<f64> = yt.iter().map(|r| r[c]).collect();
            let (model, _) = CcrModel::fit(&xt, &y, config)?;
            let pred: Vec<f64> = xv.iter().map(|x| model.predict(x).max(0.0)).collect();
            let truth: Vec<f64> = yv.iter().map(|r| r[c]).collect();
            let mse = if pred.is_empty() {
                f64::NAN
            } else {
                pred.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pred.len() as f64
            };
            let rel = if pred.is_empty() { f64::NAN } else { relative_l2(&pred, &truth) };
            Ok((
                model,
                ChannelReport {
                    name: name.clone(),
                    validation_mse: mse,
                    validation_rel_l2: rel,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let (models, channels) = fitted.into_iter().unzip();
    Ok(Surrogate {
        schema: data.schema.clone(),
        models,
        train_runs,
        validation_runs,
        channels,
    })
}

impl Surrogate {
    /// Predicted `(oil, water)` rates per producer, one row per feature row,
    /// clamped at zero.
    pub fn infer_rates(&self, features: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        if features.schema != self.schema {
            return Err(Error::Config(format!(
                "feature schema {:?} does not match the trained schema {:?}",
                features.schema.producers, self.schema.producers
            )));
        }
        let f = self.schema.feature_len();
        features
            .rows
            .iter()
            .map(|row| {
                if row.len() != f {
                    return Err(Error::Dimension(format!("feature row has {} entries, expected {f}", row.len())));
                }
                Ok(self.models.iter().map(|m| m.predict(row).max(0.0)).collect())
            })
            .collect()
    }

    /// `schema.txt` plus one `ccr_<channel>.txt` per channel.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::from("surrogate-schema 1\n");
        manifest.push_str(&format!("producers = {}\n", self.schema.producers.join(" ")));
        let runs = |r: &[usize]| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        manifest.push_str(&format!("train_runs = {}\n", runs(&self.train_runs)));
        manifest.push_str(&format!("validation_runs = {}\n", runs(&self.validation_runs)));
        for (ch, model) in self.channels.iter().zip(&self.models) {
            manifest.push_str(&format!(
                "channel {} mse = {} rel_l2 = {}\n",
                ch.name, ch.validation_mse, ch.validation_rel_l2
            ));
            write_model(&dir.join(format!("ccr_{}.txt", ch.name)), model)?;
        }
        let path = dir.join("schema.txt");
        fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("schema.txt");
        if !path.exists() {
            return Err(Error::MissingArtifact(path));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some("surrogate-schema 1") {
            return Err(Error::Format(format!("{} is not a surrogate schema", path.display())));
        }
        let mut producers = None;
        let mut train_runs = Vec::new();
        let mut validation_runs = Vec::new();
        let mut channels = Vec::new();
        let parse_runs = |v: &str| -> Result<Vec<usize>> {
            v.split_whitespace()
                .map(|t| t.parse().map_err(|e| Error::Format(format!("bad run index {t:?}: {e}"))))
                .collect()
        };
        for line in lines {
            if let Some(v) = line.strip_prefix("producers = ") {
                producers = Some(v.split_whitespace().map(String::from).collect::<Vec<_>>());
            } else if let Some(v) = line.strip_prefix("train_runs =") {
                train_runs = parse_runs(v)?;
            } else if let Some(v) = line.strip_prefix("validation_runs =") {
                validation_runs = parse_runs(v)?;
            } else if let Some(v) = line.strip_prefix("channel ") {
                let parts: Vec<&str> = v.split_whitespace().collect();
                if parts.len() != 7 {
                    return Err(Error::Format(format!("malformed channel line {line:?}")));
                }
                let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Format(format!("bad number {s:?}: {e}")));
                channels.push(ChannelReport {
                    name: parts[0].to_string(),
                    validation_mse: num(parts[3])?,
                    validation_rel_l2: num(parts[6])?,
                });
            }
        }
        let schema = FeatureSchema {
            producers: producers.ok_or_else(|| Error::Format("schema has no producer list".into()))?,
        };
        schema.validate()?;
        if channels.iter().map(|c| c.name.clone()).collect::<Vec<_>>() != schema.channel_names() {
            return Err(Error::Format("channel list does not match the producer list".into()));
        }
        let models = channels
            .iter()
            .map(|c| {
                let p = dir.join(format!("ccr_{}.txt", c.name));
                if !p.exists() {
                    return Err(Error::MissingArtifact(p));
                }
                read_model(&p)
            })
            .collect::<Result<_>>()?;
        Ok(Surrogate {
            schema,
            models,
            train_runs,
            validation_runs,
            channels,
        })
    }
}

#[cfg(test)]
mod tests;
