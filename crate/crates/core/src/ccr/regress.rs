use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    /// `y = w·x + b`
    Linear,
    /// Linear terms plus all pairwise products `x_i x_j`, `i <= j`.
    Quadratic,
}

impl RegressorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegressorKind::Linear => "linear",
            RegressorKind::Quadratic => "quadratic",
        }
    }

    /// Number of features including the intercept.
    pub fn feature_count(&self, dim: usize) -> usize {
        match self {
            RegressorKind::Linear => dim + 1,
            RegressorKind::Quadratic => dim + dim * (dim + 1) / 2 + 1,
        }
    }

    /// Feature vector; the intercept column comes last.
    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut f = x.to_vec();
        if *self == RegressorKind::Quadratic {
            for i in 0..x.len() {
                for j in i..x.len() {
                    f.push(x[i] * x[j]);
                }
            }
        }
        f.push(1.0);
        f
    }
}

/// One expert: ridge coefficients or a constant fallback.
#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Ridge { kind: RegressorKind, coef: Vec<f64> },
    Mean(f64),
}

impl Regressor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Regressor::Ridge { kind, coef } => kind.features(x).iter().zip(coef).map(|(a, b)| a * b).sum(),
            Regressor::Mean(m) => *m,
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, Regressor::Mean(_))
    }
}

/// Ridge regression minimizing `|y - F c|² + ridge |c_no_intercept|²`,
/// solved as an augmented least-squares problem with an SVD.
pub fn ridge_fit(x: &[Vec<f64>], y: &[f64], kind: RegressorKind, ridge: f64) -> Vec<f64> {
    let n = x.len();
    let dim = x.first().map_or(0, |r| r.len());
    let p = kind.feature_count(dim);
    let penalized = p - 1;
    let rows = if ridge > 0.0 { n + penalized } else { n };
    let mut a = DMatrix::<f64>::zeros(rows, p);
    let mut b = DVector::<f64>::zeros(rows);
    for (i, (xi, &yi)) in x.iter().zip(y).enumerate() {
        for (j, f) in kind.features(xi).into_iter().enumerate() {
            a[(i, j)] = f;
        }
        b[i] = yi;
    }
    if ridge > 0.0 {
        let s = ridge.sqrt();
        for j in 0..penalized {
            a[(n + j, j)] = s;
        }
    }
    let svd = a.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(&b, eps).map(|c| c.iter().copied().collect()).unwrap_or_else(|_| vec![0.0; p])
}

/// Fit one expert; clusters with fewer samples than features get the mean.
pub fn fit_regressor(x: &[Vec<f64>], y: &[f64], kind: RegressorKind, ridge: f64) -> Regressor {
    let dim = x.first().map_or(0, |r| r.len());
    if y.is_empty() {
        return Regressor::Mean(0.0);
    }
    if x.len() < kind.feature_count(dim) {
        return Regressor::Mean(y.iter().sum::<f64>() / y.len() as f64);
    }
    Regressor::Ridge {
        kind,
        coef: ridge_fit(x, y, kind, ridge),
    }
}
