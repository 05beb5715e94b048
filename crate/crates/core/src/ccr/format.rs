//! Flat key-value persistence for [`CcrModel`].
//!
//! ```text
//! ccr-model 1
//! clusters = 2
//! dim = 1
//! ridge = 1e-8
//! cluster_scale = 10
//! x_min = -1
//! x_max = 1
//! y_min = 0
//! y_max = 1
//! centroid.0 = 0.25 0.1
//! gate.0 = 3.2 -1.5
//! expert.0 = linear 0.01 0.002
//! expert.1 = mean 0.99
//! ```
//!
//! Vectors are space separated. Gate rows are `[w..., bias]`. Expert
//! coefficients follow the feature layout of [`RegressorKind::features`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CcrModel, Regressor, RegressorKind, ScalingParams, SoftmaxClassifier};
use crate::error::{Error, Result};

const HEADER: &str = "ccr-model 1";

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn format_model(model: &CcrModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "clusters = {}", model.clusters());
    let _ = writeln!(s, "dim = {}", model.input_dim());
    let _ = writeln!(s, "ridge = {}", model.ridge);
    let _ = writeln!(s, "cluster_scale = {}", model.cluster_scale);
    let _ = writeln!(s, "x_min = {}", join(&model.scaling.x_min));
    let _ = writeln!(s, "x_max = {}", join(&model.scaling.x_max));
    let _ = writeln!(s, "y_min = {}", model.scaling.y_min);
    let _ = writeln!(s, "y_max = {}", model.scaling.y_max);
    for (l, c) in model.centroids.iter().enumerate() {
        let _ = writeln!(s, "centroid.{l} = {}", join(c));
    }
    for (l, w) in model.gate.weights.iter().enumerate() {
        let _ = writeln!(s, "gate.{l} = {}", join(w));
    }
    for (l, e) in model.experts.iter().enumerate() {
        match e {
            Regressor::Ridge { kind, coef } => {
                let _ = writeln!(s, "expert.{l} = {} {}", kind.as_str(), join(coef));
            }
            Regressor::Mean(m) => {
                let _ = writeln!(s, "expert.{l} = mean {m}");
            }
        }
    }
    s
}

fn floats(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("bad number {t:?}: {e}"))))
        .collect()
}

pub fn parse_model(text: &str) -> Result<CcrModel> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(Error::Format(format!("expected header {HEADER:?}")));
    }
    let mut kv = BTreeMap::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed line {line:?}")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| Error::Format(format!("missing key {k}")));
    let scalar = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|e| Error::Format(format!("bad value for {k}: {e}")))
    };
    let count = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|e| Error::Format(format!("bad value for {k}: {e}")))
    };
    let clusters = count("clusters")?;
    let dim = count("dim")?;
    let scaling = ScalingParams {
        x_min: floats(get("x_min")?)?,
        x_max: floats(get("x_max")?)?,
        y_min: scalar("y_min")?,
        y_max: scalar("y_max")?,
        c: 1.0,
    };
    if scaling.x_min.len() != dim || scaling.x_max.len() != dim {
        return Err(Error::Format("scaling vectors do not match dim".into()));
    }
    let mut centroids = Vec::with_capacity(clusters);
    let mut gate = Vec::with_capacity(clusters);
    let mut experts = Vec::with_capacity(clusters);
    for l in 0..clusters {
        centroids.push(floats(get(&format!("centroid.{l}"))?)?);
        let w = floats(get(&format!("gate.{l}"))?)?;
        if w.len() != dim + 1 {
            return Err(Error::Format(format!("gate.{l} has {} entries, expected {}", w.len(), dim + 1)));
        }
        gate.push(w);
        let spec = get(&format!("expert.{l}"))?;
        let (kind, rest) = spec.split_once(' ').unwrap_or((spec.as_str(), ""));
        let values = floats(rest)?;
        let expert = match kind {
            "mean" if values.len() == 1 => Regressor::Mean(values[0]),
            "linear" | "quadratic" => {
                let kind = if kind == "linear" {
                    RegressorKind::Linear
                } else {
                    RegressorKind::Quadratic
                };
                if values.len() != kind.feature_count(dim) {
                    return Err(Error::Format(format!("expert.{l} has wrong coefficient count")));
                }
                Regressor::Ridge { kind, coef: values }
            }
            other => return Err(Error::Format(format!("unknown expert kind {other:?}"))),
        };
        experts.push(expert);
    }
    Ok(CcrModel {
        scaling,
        cluster_scale: scalar("cluster_scale")?,
        centroids,
        gate: SoftmaxClassifier { weights: gate },
        experts,
        ridge: scalar("ridge")?,
    })
}

pub fn write_model(path: &Path, model: &CcrModel) -> Result<()> {
    fs::write(path, format_model(model)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<CcrModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}
