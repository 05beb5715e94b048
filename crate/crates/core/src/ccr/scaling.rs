use crate::error::{Error, Result};

/// Min-max scaling of inputs to `[0, 1]` and of the output to `[0, C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub y_min: f64,
    pub y_max: f64,
    /// Output scale factor C.
    pub c: f64,
}

/// Scaled data plus the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaled {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub params: ScalingParams,
    /// True when some input column or the output had zero range; those map to 0.
    pub degenerate: bool,
}

/// Output scale used for clustering: `10 d` with `d` the input dimension.
pub fn cluster_scale(dim: usize) -> f64 {
    10.0 * dim as f64
}

fn unit(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

impl ScalingParams {
    pub fn dim(&self) -> usize {
        self.x_min.len()
    }

    pub fn transform_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.x_min.iter().zip(&self.x_max))
            .map(|(&v, (&lo, &hi))| unit(v, lo, hi))
            .collect()
    }

    pub fn transform_y(&self, y: f64) -> f64 {
        self.c * unit(y, self.y_min, self.y_max)
    }

    pub fn inverse_y(&self, y_scaled: f64) -> f64 {
        if self.y_max > self.y_min {
            self.y_min + y_scaled / self.c * (self.y_max - self.y_min)
        } else {
            self.y_min
        }
    }

    pub fn with_scale(&self, c: f64) -> Self {
        ScalingParams { c, ..self.clone() }
    }
}

pub fn scale_fit_transform(x: &[Vec<f64>], y: &[f64], c: f64) -> Result<Scaled> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Dimension("cannot scale empty data".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} inputs but {} outputs", x.len(), y.len())));
    }
    if !(c > 0.0) {
        return Err(Error::Config(format!("output scale must be positive, got {c}")));
    }
    let d = x[0].len();
    if x.iter().any(|row| row.len() != d) {
        return Err(Error::Dimension("ragged input rows".into()));
    }
    let mut x_min = vec![f64::INFINITY; d];
    let mut x_max = vec![f64::NEG_INFINITY; d];
    for row in x {
        for (j, &v) in row.iter().enumerate() {
            x_min[j] = x_min[j].min(v);
            x_max[j] = x_max[j].max(v);
        }
    }
    let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = x_min.iter().zip(&x_max).any(|(lo, hi)| hi <= lo) || y_max <= y_min;
    if degenerate {
        log::warn!("constant column in CCR training data; it is scaled to 0");
    }
    let params = ScalingParams {
        x_min,
        x_max,
        y_min,
        y_max,
        c,
    };
    Ok(Scaled {
        x: x.iter().map(|row| params.transform_x(row)).collect(),
        y: y.iter().map(|&v| params.transform_y(v)).collect(),
        params,
        degenerate,
    })
}
