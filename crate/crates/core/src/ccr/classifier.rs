//! Multinomial logistic gate `g_l(x) = softmax_l(W x + b)`.

/// Affine softmax classifier. Row `l` of `weights` holds `[w_l, b_l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings {
            learning_rate: 1.0,
            epochs: 2000,
            l2: 1e-4,
        }
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

impl SoftmaxClassifier {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        SoftmaxClassifier {
            weights: vec![vec![0.0; dim + 1]; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len() - 1)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| {
                let (coef, bias) = w.split_at(w.len() - 1);
                coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias[0]
            })
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.logits(x);
        softmax_in_place(&mut z);
        z
    }

    /// `argmax_l g_l(x)`; ties resolve to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        let mut best = 0;
        for (l, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = l;
            }
        }
        best
    }

    /// Mean cross-entropy plus `l2/2 |W|²` (biases unpenalized), and its
    /// gradient laid out like `weights`.
    pub fn loss_and_gradient(&self, x: &[Vec<f64>], labels: &[usize], l2: f64) -> (f64, Vec<Vec<f64>>) {
        let n = x.len().max(1) as f64;
        let d = self.dim();
        let mut grad = vec![vec![0.0; d + 1]; self.classes()];
        let mut loss = 0.0;
        for (xi, &li) in x.iter().zip(labels) {
            let p = self.probabilities(xi);
            loss -= p[li].max(f64::MIN_POSITIVE).ln();
            for (l, g) in grad.iter_mut().enumerate() {
                let r = p[l] - if l == li { 1.0 } else { 0.0 };
                for j in 0..d {
                    g[j] += r * xi[j];
                }
                g[d] += r;
            }
        }
        loss /= n;
        for g in grad.iter_mut().flatten() {
            *g /= n;
        }
        for (w, g) in self.weights.iter().zip(grad.iter_mut()) {
            for j in 0..d {
                loss += 0.5 * l2 * w[j] * w[j];
                g[j] += l2 * w[j];
            }
        }
        (loss, grad)
    }

    /// Full-batch gradient descent from zero weights. A step that would
    /// raise the loss is retried at half the rate, so the loss history is
    /// nonincreasing.
    pub fn fit(x: &[Vec<f64>], labels: &[usize], classes: usize, settings: ClassifierSettings) -> (Self, Vec<f64>) {
        let dim = x.first().map_or(0, |r| r.len());
        let mut model = SoftmaxClassifier::zeros(classes, dim);
        if classes <= 1 {
            return (model, vec![0.0]);
        }
        let mut lr = settings.learning_rate;
        let (mut loss, mut grad) = model.loss_and_gradient(x, labels, settings.l2);
        let mut history = vec![loss];
        for _ in 0..settings.epochs {
            let mut accepted = false;
            for _ in 0..60 {
                let trial = SoftmaxClassifier {
                    weights: model
                        .weights
                        .iter()
                        .zip(&grad)
                        .map(|(w, g)| w.iter().zip(g).map(|(a, b)| a - lr * b).collect())
                        .collect(),
                };
                let (trial_loss, trial_grad) = trial.loss_and_gradient(x, labels, settings.l2);
                if trial_loss <= loss {
                    model = trial;
                    loss = trial_loss;
                    grad = trial_grad;
                    lr *= 1.1;
                    accepted = true;
                    break;
                }
                lr *= 0.5;
            }
            history.push(loss);
            if !accepted {
                break;
            }
        }
        (model, history)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn separable_two_class() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..100 {
            let a: f64 = rng.random_range(0.0..1.0);
            let b: f64 = rng.random_range(0.0..1.0);
            if (a + b - 1.0).abs() < 0.1 {
                continue;
            }
            x.push(vec![a, b]);
            y.push(usize::from(a + b > 1.0));
        }
        let (clf, hist) = SoftmaxClassifier::fit(&x, &y, 2, ClassifierSettings { learning_rate: 1.0, epochs: 2000, l2: 0.0 });
        let correct = x.iter().zip(&y).filter(|(xi, &yi)| clf.predict(xi) == yi).count();
        assert_eq!(correct, x.len());
        assert!(hist.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_class_is_constant() {
        let x = vec![vec![0.1], vec![0.9]];
        let (clf, _) = SoftmaxClassifier::fit(&x, &[0, 0], 1, ClassifierSettings::default());
        assert_eq!(clf.probabilities(&[123.0]), vec![1.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let x: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<usize> = (0..30).map(|_| rng.random_range(0..4)).collect();
        let mut clf = SoftmaxClassifier::zeros(4, 3);
        for w in clf.weights.iter_mut().flatten() {
            *w = rng.random_range(-1.0..1.0);
        }
        let l2 = 0.05;
        let (_, grad) = clf.loss_and_gradient(&x, &labels, l2);
        let h = 1e-6;
        for _ in 0..5 {
            let l = rng.random_range(0..4);
            let j = rng.random_range(0..4);
            let mut plus = clf.clone();
            plus.weights[l][j] += h;
            let mut minus = clf.clone();
            minus.weights[l][j] -= h;
            let fd = (plus.loss_and_gradient(&x, &labels, l2).0 - minus.loss_and_gradient(&x, &labels, l2).0) / (2.0 * h);
            let rel = (fd - grad[l][j]).abs() / grad[l][j].abs().max(1e-8);
            assert!(rel <= 1e-5, "coordinate ({l},{j}): fd {fd} vs {}", grad[l][j]);
        }
    }

    proptest! {
        #[test]
        fn gate_is_a_probability_vector(ws in proptest::collection::vec(-5.0f64..5.0, 9), x in proptest::collection::vec(-3.0f64..3.0, 2), shift in -50.0f64..50.0) {
            let clf = SoftmaxClassifier { weights: ws.chunks(3).map(|c| c.to_vec()).collect() };
            let p = clf.probabilities(&x);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v > 0.0));
            // Shift every bias by the same constant: argmax unchanged.
            let shifted = SoftmaxClassifier { weights: clf.weights.iter().map(|w| { let mut w = w.clone(); w[2] += shift; w }).collect() };
            prop_assert_eq!(clf.predict(&x), shifted.predict(&x));
        }
    }
}
