//! Cluster-classify-regress mixture of experts.
//!
//! Training proceeds in three stages on min-max scaled data:
//!
//! 1. **Cluster** the joint points `z_i = (x̃_i, ỹ_i)` with k-means, where the
//!    output is scaled to `[0, 10 d]` so that output jumps dominate the
//!    squared Euclidean distance.
//! 2. **Classify**: fit a softmax gate `g_l(x̃)` on the inputs alone to
//!    reproduce the cluster labels (cross-entropy loss).
//! 3. **Regress**: fit one ridge expert per class on the samples the gate
//!    routes to it, with the output scaled to `[0, 1]`.
//!
//! Prediction is hard-gated: `f(x) = f_r(x, argmax_l g_l(x))`.
//!
//! A Bayesian treatment places a posterior over `(θ_c, θ_r)` of the form
//! `p(θ | D) ∝ p(θ) Π_i Σ_l g_l(x_i; θ_c) N(y_i; f_r(x_i, l; θ_r), σ²)`; this
//! crate only computes the point estimate above.

mod classifier;
mod format;
mod kmeans;
mod regress;
mod scaling;

pub use classifier::{ClassifierSettings, SoftmaxClassifier};
pub use format::{read_model, write_model};
pub use kmeans::{clustering_objective, kmeans, Clustering};
pub use regress::{fit_regressor, ridge_fit, Regressor, RegressorKind};
pub use scaling::{cluster_scale, scale_fit_transform, Scaled, ScalingParams};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcrConfig {
    pub clusters: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_restarts: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub regressor: RegressorKind,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for CcrConfig {
    fn default() -> Self {
        CcrConfig {
            clusters: 3,
            kmeans_max_iter: 100,
            kmeans_restarts: 5,
            learning_rate: 1.0,
            epochs: 2000,
            l2: 1e-7,
            regressor: RegressorKind::Linear,
            ridge: 1e-8,
            seed: 0,
        }
    }
}

impl CcrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.kmeans_max_iter == 0 || self.kmeans_restarts == 0 || self.epochs == 0 {
            return Err(Error::Config("CCR cluster and iteration counts must be at least 1".into()));
        }
        if !(self.ridge >= 0.0) || !(self.l2 >= 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config("CCR ridge/l2 must be >= 0 and learning rate > 0".into()));
        }
        Ok(())
    }

    fn classifier(&self) -> ClassifierSettings {
        ClassifierSettings {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2: self.l2,
        }
    }
}

/// A fitted CCR model.
#[derive(Debug, Clone, PartialEq)]
pub struct CcrModel {
    /// Input scaling and output range; `c` is the regression scale (1).
    pub scaling: ScalingParams,
    /// Output scale used for clustering (`10 d`).
    pub cluster_scale: f64,
    /// Centroids in the joint scaled space.
    pub centroids: Vec<Vec<f64>>,
    pub gate: SoftmaxClassifier,
    pub experts: Vec<Regressor>,
    pub ridge: f64,
}

/// Diagnostics from fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub cluster_labels: Vec<usize>,
    pub gate_labels: Vec<usize>,
    pub clustering_objective: f64,
    pub classifier_loss: Vec<f64>,
    pub degenerate_scaling: bool,
    pub fallback_experts: Vec<usize>,
}

impl CcrModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], config: &CcrConfig) -> Result<(Self, FitReport)> {
        config.validate()?;
        if x.len() < config.clusters {
            return Err(Error::Config(format!(
                "{} samples cannot support {} clusters",
                x.len(),
                config.clusters
            )));
        }
        let dim = x[0].len();
        let c = cluster_scale(dim.max(1));
        let scaled = scale_fit_transform(x, y, c)?;
        let joint: Vec<Vec<f64>> = scaled
            .x
            .iter()
            .zip(&scaled.y)
            .map(|(xi, &yi)| {
                let mut z = xi.clone();
                z.push(yi);
                z
            })
            .collect();
        let clustering = kmeans(&joint, config.clusters, config.kmeans_restarts, config.kmeans_max_iter, config.seed)?;
        let (gate, classifier_loss) =
            SoftmaxClassifier::fit(&scaled.x, &clustering.labels, config.clusters, config.classifier());

        let reg_scaling = scaled.params.with_scale(1.0);
        let y_reg: Vec<f64> = y.iter().map(|&v| reg_scaling.transform_y(v)).collect();
        let gate_labels: Vec<usize> = scaled.x.iter().map(|xi| gate.predict(xi)).collect();
        let global_mean = y_reg.iter().sum::<f64>() / y_reg.len() as f64;
        let experts: Vec<Regressor> = (0..config.clusters)
            .into_par_iter()
            .map(|l| {
                let members: Vec<usize> = (0..x.len()).filter(|&i| gate_labels[i] == l).collect();
                if members.is_empty() {
                    return Regressor::Mean(global_mean);
                }
                let xs: Vec<Vec<f64>> = members.iter().map(|&i| scaled.x[i].clone()).collect();
                let ys: Vec<f64> = members.iter().map(|&i| y_reg[i]).collect();
                fit_regressor(&xs, &ys, config.regressor, config.ridge)
            })
            .collect();
        let fallback_experts = experts
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_fallback())
            .map(|(l, _)| l)
            .collect();
        let model = CcrModel {
            scaling: reg_scaling,
            cluster_scale: c,
            centroids: clustering.centroids,
            gate,
            experts,
            ridge: config.ridge,
        };
        let report = FitReport {
            cluster_labels: clustering.labels,
            gate_labels,
            clustering_objective: clustering.objective,
            classifier_loss,
            degenerate_scaling: scaled.degenerate,
            fallback_experts,
        };
        Ok((model, report))
    }

    pub fn clusters(&self) -> usize {
        self.experts.len()
    }

    pub fn input_dim(&self) -> usize {
        self.scaling.dim()
    }

    /// Expert index chosen for `x` (raw units).
    pub fn route(&self, x: &[f64]) -> usize {
        self.gate.predict(&self.scaling.transform_x(x))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let xs = self.scaling.transform_x(x);
        let l = self.gate.predict(&xs);
        self.scaling.inverse_y(self.experts[l].predict(&xs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn step_data(n: usize, seed: u64, slope: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let y = x.iter().map(|r| f64::from(u8::from(r[0] > 0.0)) + slope * r[0]).collect();
        (x, y)
    }

    fn mse(model: impl Fn(&[f64]) -> f64, x: &[Vec<f64>], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(xi, yi)| (model(xi) - yi).powi(2)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn single_cluster_equals_ridge() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random_range(0.0..3.0), rng.random_range(-2.0..2.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[0] - r[1] + rng.random_range(-0.1..0.1)).collect();
        let cfg = CcrConfig {
            clusters: 1,
            ridge: 1e-3,
            ..CcrConfig::default()
        };
        let (model, _) = CcrModel::fit(&x, &y, &cfg).unwrap();
        let scaled = scale_fit_transform(&x, &y, 1.0).unwrap();
        let coef = ridge_fit(&scaled.x, &scaled.y, RegressorKind::Linear, 1e-3);
        match &model.experts[0] {
            Regressor::Ridge { coef: c, .. } => {
                for (a, b) in c.iter().zip(&coef) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
            other => panic!("unexpected expert {other:?}"),
        }
        let xs = model.scaling.transform_x(&x[3]);
        assert_eq!(model.predict(&x[3]), model.scaling.inverse_y(model.experts[0].predict(&xs)));
    }

    #[test]
    fn recovers_training_point_of_exact_cluster() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| if r[0] < 10.0 { 2.0 * r[0] } else { 100.0 - r[0] }).collect();
        let cfg = CcrConfig {
            clusters: 2,
            ridge: 0.0,
            epochs: 3000,
            l2: 0.0,
            ..CcrConfig::default()
        };
        let (model, _) = CcrModel::fit(&x, &y, &cfg).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((model.predict(xi) - yi).abs() < 1e-6, "{xi:?}: {} vs {yi}", model.predict(xi));
        }
    }

    #[test]
    fn step_target_beats_global_ridge() {
        let (xtr, ytr) = step_data(400, 1, 0.0);
        let (xte, yte) = step_data(100, 2, 0.0);
        let cfg = CcrConfig {
            clusters: 2,
            ..CcrConfig::default()
        };
        let (model, _) = CcrModel::fit(&xtr, &ytr, &cfg).unwrap();
        let ccr_mse = mse(|x| model.predict(x), &xte, &yte);
        let coef = ridge_fit(&xtr, &ytr, RegressorKind::Linear, cfg.ridge);
        let baseline = Regressor::Ridge { kind: RegressorKind::Linear, coef };
        let base_mse = mse(|x| baseline.predict(x), &xte, &yte);
        assert!(ccr_mse <= 0.1 * base_mse, "ccr {ccr_mse} baseline {base_mse}");
    }

    #[test]
    fn too_few_samples() {
        let cfg = CcrConfig {
            clusters: 3,
            ..CcrConfig::default()
        };
        assert!(CcrModel::fit(&[vec![0.0], vec![1.0]], &[0.0, 1.0], &cfg).is_err());
    }
}
