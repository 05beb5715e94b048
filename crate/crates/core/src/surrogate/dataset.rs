use std::path::Path;

use super::FeatureSchema;
use crate::error::{Error, Result};

/// Features and labels of `B` simulator runs with `T` report steps each.
#[derive(Debug, Clone, PartialEq)]
pub struct RatesDataset {
    pub schema: FeatureSchema,
    /// `B × T × (3 N + 1)`.
    pub features: Vec<Vec<Vec<f64>>>,
    /// `B × T × 2 N`, `(oil, water)` per producer.
    pub labels: Vec<Vec<Vec<f64>>>,
}

impl RatesDataset {
    pub fn new(schema: FeatureSchema) -> Self {
        RatesDataset {
            schema,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push_run(&mut self, features: Vec<Vec<f64>>, labels: Vec<Vec<f64>>) -> Result<()> {
        if features.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} label rows",
                features.len(),
                labels.len()
            )));
        }
        self.features.push(features);
        self.labels.push(labels);
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        if self.features.is_empty() {
            return Err(Error::Config("rates dataset is empty".into()));
        }
        if self.features.len() != self.labels.len() {
            return Err(Error::Dimension("feature and label batch counts differ".into()));
        }
        let (f, c) = (self.schema.feature_len(), self.schema.channel_count());
        for (b, (x, y)) in self.features.iter().zip(&self.labels).enumerate() {
            if x.len() != y.len() {
                return Err(Error::Dimension(format!("run {b}: feature and label step counts differ")));
            }
            if x.iter().any(|r| r.len() != f) || y.iter().any(|r| r.len() != c) {
                return Err(Error::Dimension(format!("run {b}: row width does not match the schema")));
            }
        }
        Ok(())
    }
}

/// Columns `run, step, <features>, <labels>`; the header carries the schema.
pub fn write_dataset_csv(path: &Path, data: &RatesDataset) -> Result<()> {
    data.validate()?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["run".to_string(), "step".to_string()];
    header.extend(data.schema.feature_names());
    header.extend(data.schema.channel_names());
    w.write_record(&header)?;
    for (b, (xs, ys)) in data.features.iter().zip(&data.labels).enumerate() {
        for (t, (x, y)) in xs.iter().zip(ys).enumerate() {
            let mut rec = vec![b.to_string(), t.to_string()];
            rec.extend(x.iter().chain(y).map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset_csv(path: &Path) -> Result<RatesDataset> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let producers: Vec<String> = header
        .iter()
        .filter_map(|h| h.strip_suffix(".perm").map(String::from))
        .collect();
    let schema = FeatureSchema::new(producers)?;
    let mut want = vec!["run".to_string(), "step".to_string()];
    want.extend(schema.feature_names());
    want.extend(schema.channel_names());
    if header != want {
        return Err(Error::Format(format!("{}: header does not match a rates schema", path.display())));
    }
    let f = schema.feature_len();
    let mut data = RatesDataset::new(schema);
    for rec in r.records() {
        let rec = rec?;
        let idx = |k: usize| -> Result<usize> {
            rec[k].parse().map_err(|e| Error::Format(format!("bad index {:?}: {e}", &rec[k])))
        };
        let (b, t) = (idx(0)?, idx(1)?);
        let vals: Vec<f64> = rec
            .iter()
            .skip(2)
            .map(|s| s.parse().map_err(|e| Error::Format(format!("bad value {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        if b == data.features.len() {
            data.features.push(Vec::new());
            data.labels.push(Vec::new());
        }
        if b + 1 != data.features.len() || t != data.features[b].len() {
            return Err(Error::Format(format!("{}: rows out of order at run {b} step {t}", path.display())));
        }
        data.features[b].push(vals[..f].to_vec());
        data.labels[b].push(vals[f..].to_vec());
    }
    data.validate()?;
    Ok(data)
}
