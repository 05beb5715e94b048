//! CSV tables shared by the pipeline stages.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{DatumMeta, Observations, Quantity};

/// Rows of equal width under a `member,<prefix>0,<prefix>1,...` header.
pub fn write_ensemble_csv(path: &Path, prefix: &str, rows: &[Vec<f64>]) -> Result<()> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Dimension(format!("{}: ragged rows", path.display())));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["member".to_string()];
    header.extend((0..width).map(|i| format!("{prefix}{i}")));
    w.write_record(&header)?;
    for (m, row) in rows.iter().enumerate() {
        let mut rec = vec![m.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_ensemble_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (m, rec) in r.records().enumerate() {
        let rec = rec?;
        let member: usize = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("{}: bad member column", path.display())))?;
        if member != m {
            return Err(Error::Format(format!("{}: member {member} out of order", path.display())));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ObservationRow {
    index: usize,
    well: String,
    step: usize,
    quantity: Quantity,
    cell: Option<usize>,
    truth: f64,
    value: f64,
    sigma: f64,
}

/// One row per datum: metadata, noise-free value, observed value, σ.
pub fn write_observations_csv(path: &Path, obs: &Observations, truth: &[f64]) -> Result<()> {
    if truth.len() != obs.len() {
        return Err(Error::Dimension("truth and observation lengths differ".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    for (i, m) in obs.meta.iter().enumerate() {
        w.serialize(ObservationRow {
            index: i,
            well: m.well.clone(),
            step: m.step,
            quantity: m.quantity,
            cell: m.cell,
            truth: truth[i],
            value: obs.y[i],
            sigma: obs.gamma[i].sqrt(),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Observations and the noise-free truth they were drawn from.
pub fn read_observations_csv(path: &Path) -> Result<(Observations, Vec<f64>)> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let (mut y, mut gamma, mut meta, mut truth) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, row) in r.deserialize::<ObservationRow>().enumerate() {
        let row = row?;
        if row.index != i {
            return Err(Error::Format(format!("{}: datum {} out of order", path.display(), row.index)));
        }
        y.push(row.value);
        gamma.push(row.sigma * row.sigma);
        truth.push(row.truth);
        meta.push(DatumMeta {
            well: row.well,
            step: row.step,
            quantity: row.quantity,
            cell: row.cell,
        });
    }
    let steps = meta.iter().map(|m| m.step + 1).max().unwrap_or(0);
    Ok((Observations::new(y, gamma, meta, steps)?, truth))
}
