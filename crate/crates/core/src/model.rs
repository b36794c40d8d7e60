//! K-class linear softmax classifier: probabilities, cross-entropy loss,
//! and its analytic gradient.

use crate::dp::GradientVector;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Weights and biases of a K-class linear classifier over V features.
///
/// Flattening order is fixed everywhere: weights row-major by class,
/// then the K biases.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    weights: Vec<f64>, // K * V, row-major by class
    biases: Vec<f64>,  // K
    num_classes: usize,
    num_features: usize,
}

impl ModelParams {
    /// All-zero parameters. Requires `num_classes >= 2`, `num_features >= 1`.
    pub fn zeros(num_classes: usize, num_features: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "a classifier needs at least two classes, got {num_classes}"
            )));
        }
        if num_features == 0 {
            return Err(Error::InvalidParameter(
                "a classifier needs at least one feature".to_string(),
            ));
        }
        Ok(Self {
            weights: vec![0.0; num_classes * num_features],
            biases: vec![0.0; num_classes],
            num_classes,
            num_features,
        })
    }

    pub fn from_parts(
        weights: Vec<f64>,
        biases: Vec<f64>,
        num_classes: usize,
        num_features: usize,
    ) -> Result<Self> {
        if weights.len() != num_classes * num_features || biases.len() != num_classes {
            return Err(Error::DimensionMismatch {
                expected: num_classes * num_features + num_classes,
                got: weights.len() + biases.len(),
            });
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "model parameters must all be finite".to_string(),
            ));
        }
        Ok(Self {
            weights,
            biases,
            num_classes,
            num_features,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Total parameter count, `K * V + K`.
    pub fn dim(&self) -> usize {
        self.num_classes * self.num_features + self.num_classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.weights[class * self.num_features + feature]
    }

    /// Flatten in the fixed order: weights row-major by class, then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.dim());
        flat.extend_from_slice(&self.weights);
        flat.extend_from_slice(&self.biases);
        flat
    }

    /// Rebuild from a flat vector in the fixed order.
    pub fn from_flat(num_classes: usize, num_features: usize, flat: &[f64]) -> Result<Self> {
        let expected = num_classes * num_features + num_classes;
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: flat.len(),
            });
        }
        let split = num_classes * num_features;
        Self::from_parts(
            flat[..split].to_vec(),
            flat[split..].to_vec(),
            num_classes,
            num_features,
        )
    }
}

/// A featurized document with its class index.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: usize,
}

impl LabeledExample {
    pub fn new(features: FeatureVector, label: usize) -> Self {
        Self { features, label }
    }
}

fn logits(theta: &ModelParams, x: &FeatureVector) -> Result<Vec<f64>> {
    if x.num_features() != theta.num_features {
        return Err(Error::DimensionMismatch {
            expected: theta.num_features,
            got: x.num_features(),
        });
    }
    let v = theta.num_features;
    let mut z = theta.biases.clone();
    for (index, weight) in x.entries() {
        for (k, zk) in z.iter_mut().enumerate() {
            *zk += theta.weights[k * v + index] * weight;
        }
    }
    Ok(z)
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Class probabilities `softmax(W x + b)`, computed with max subtraction
/// for overflow safety.
pub fn predict_proba(theta: &ModelParams, x: &FeatureVector) -> Result<Vec<f64>> {
    Ok(softmax(&logits(theta, x)?))
}

/// Most probable class; ties break toward the lowest class index.
pub fn predict(theta: &ModelParams, x: &FeatureVector) -> Result<usize> {
    let probs = predict_proba(theta, x)?;
    let mut best = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = k;
        }
    }
    Ok(best)
}

fn check_batch(theta: &ModelParams, batch: &[LabeledExample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for example in batch {
        if example.label >= theta.num_classes {
            return Err(Error::InvalidParameter(format!(
                "label {} out of range for {} classes",
                example.label, theta.num_classes
            )));
        }
        if example.features.num_features() != theta.num_features {
            return Err(Error::DimensionMismatch {
                expected: theta.num_features,
                got: example.features.num_features(),
            });
        }
    }
    Ok(())
}

/// Mean cross-entropy over the batch plus `(l2 / 2) * ||W||_F^2`
/// (biases are not regularized).
pub fn loss(theta: &ModelParams, batch: &[LabeledExample], l2: f64) -> Result<f64> {
    check_batch(theta, batch)?;
    let mut total = 0.0;
    for example in batch {
        let z = logits(theta, &example.features)?;
        total += log_sum_exp(&z) - z[example.label];
    }
    let mut value = total / batch.len() as f64;
    if l2 != 0.0 {
        value += l2 / 2.0 * theta.weights.iter().map(|w| w * w).sum::<f64>();
    }
    Ok(value)
}

// Accumulate one example's gradient contribution into `acc`; the shared
// entry point keeps the batch gradient and the per-example gradients
// bit-identical under averaging.
fn accumulate_example(theta: &ModelParams, example: &LabeledExample, acc: &mut [f64]) -> Result<()> {
    let v = theta.num_features;
    let k_classes = theta.num_classes;
    let probs = softmax(&logits(theta, &example.features)?);
    for (k, &p) in probs.iter().enumerate() {
        let coef = p - if example.label == k { 1.0 } else { 0.0 };
        for (index, weight) in example.features.entries() {
            acc[k * v + index] += coef * weight;
        }
        acc[k_classes * v + k] += coef;
    }
    Ok(())
}

pub(crate) fn add_l2_penalty(grad: &mut [f64], theta: &ModelParams, l2: f64) {
    if l2 == 0.0 {
        return;
    }
    for (g, w) in grad.iter_mut().zip(theta.weights.iter()) {
        *g += l2 * w;
    }
}

/// Analytic gradient of [`loss`], flattened in the fixed order.
pub fn gradient(theta: &ModelParams, batch: &[LabeledExample], l2: f64) -> Result<GradientVector> {
    check_batch(theta, batch)?;
    let mut acc = vec![0.0; theta.dim()];
    for example in batch {
        accumulate_example(theta, example, &mut acc)?;
    }
    let n = batch.len() as f64;
    for g in acc.iter_mut() {
        *g /= n;
    }
    add_l2_penalty(&mut acc, theta, l2);
    Ok(GradientVector::new(acc))
}

/// Gradient of the unregularized single-example loss for each example.
///
/// Their mean equals `gradient(theta, batch, 0.0)`.
pub fn per_example_gradients(
    theta: &ModelParams,
    batch: &[LabeledExample],
) -> Result<Vec<GradientVector>> {
    check_batch(theta, batch)?;
    let mut out = Vec::with_capacity(batch.len());
    for example in batch {
        let mut acc = vec![0.0; theta.dim()];
        accumulate_example(theta, example, &mut acc)?;
        out.push(GradientVector::new(acc));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamKind};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn fv(pairs: &[(usize, f64)], num_features: usize) -> FeatureVector {
        FeatureVector::from_entries(pairs.iter().copied(), num_features).unwrap()
    }

    #[test]
    fn zero_model_is_uniform() {
        let theta = ModelParams::zeros(3, 2).unwrap();
        let probs = predict_proba(&theta, &fv(&[(0, 1.0)], 2)).unwrap();
        for p in probs {
            assert_relative_eq!(p, 1.0 / 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn softmax_hand_value() {
        // logits (ln 2, 0) -> (2/3, 1/3)
        let theta =
            ModelParams::from_parts(vec![2.0_f64.ln(), 0.0], vec![0.0, 0.0], 2, 1).unwrap();
        let probs = predict_proba(&theta, &fv(&[(0, 1.0)], 1)).unwrap();
        assert_relative_eq!(probs[0], 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(probs[1], 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn softmax_shift_invariance() {
        let theta = ModelParams::from_parts(vec![0.4, -1.2], vec![0.3, 0.9], 2, 1).unwrap();
        let shifted =
            ModelParams::from_parts(vec![0.4, -1.2], vec![0.3 + 5.0, 0.9 + 5.0], 2, 1).unwrap();
        let x = fv(&[(0, 2.0)], 1);
        let a = predict_proba(&theta, &x).unwrap();
        let b = predict_proba(&shifted, &x).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_relative_eq!(pa, pb, max_relative = 1e-9);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = substream(5, StreamKind::Shuffle);
        for _ in 0..50 {
            let k = rng.random_range(2..=4usize);
            let v = rng.random_range(1..=5usize);
            let weights: Vec<f64> = (0..k * v).map(|_| rng.random_range(-3.0..3.0)).collect();
            let biases: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let theta = ModelParams::from_parts(weights, biases, k, v).unwrap();
            let x = fv(&[(0, rng.random_range(0.0..2.0))], v);
            let probs = predict_proba(&theta, &x).unwrap();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn predict_argmax_and_tie_break() {
        let theta = ModelParams::from_parts(vec![0.0, 1.0, 0.0], vec![0.0; 3], 3, 1).unwrap();
        assert_eq!(predict(&theta, &fv(&[(0, 1.0)], 1)).unwrap(), 1);
        // all-zero model ties everywhere; lowest index wins
        let theta = ModelParams::zeros(3, 1).unwrap();
        assert_eq!(predict(&theta, &fv(&[(0, 1.0)], 1)).unwrap(), 0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let theta = ModelParams::zeros(2, 3).unwrap();
        let err = predict_proba(&theta, &fv(&[(0, 1.0)], 2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn zero_model_loss_is_ln_k() {
        let theta = ModelParams::zeros(2, 1).unwrap();
        let batch = vec![LabeledExample::new(fv(&[(0, 1.0)], 1), 0)];
        assert_relative_eq!(
            loss(&theta, &batch, 0.0).unwrap(),
            std::f64::consts::LN_2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn confident_correct_model_has_near_zero_loss() {
        let theta = ModelParams::from_parts(vec![50.0, -50.0], vec![0.0, 0.0], 2, 1).unwrap();
        let batch = vec![LabeledExample::new(fv(&[(0, 1.0)], 1), 0)];
        assert!(loss(&theta, &batch, 0.0).unwrap() < 1e-10);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let theta = ModelParams::zeros(2, 1).unwrap();
        assert!(matches!(loss(&theta, &[], 0.0), Err(Error::EmptyBatch)));
        assert!(matches!(gradient(&theta, &[], 0.0), Err(Error::EmptyBatch)));
    }

    #[test]
    fn loss_matches_brute_force_recount() {
        let mut rng = substream(17, StreamKind::Shuffle);
        let (theta, batch) = random_instance(&mut rng, 3, 4, 6);
        let analytic = loss(&theta, &batch, 0.0).unwrap();
        let mut expected = 0.0;
        for ex in &batch {
            let probs = predict_proba(&theta, &ex.features).unwrap();
            expected -= probs[ex.label].ln();
        }
        expected /= batch.len() as f64;
        assert_relative_eq!(analytic, expected, max_relative = 1e-9);
    }

    fn random_instance(
        rng: &mut crate::rng::Stream,
        max_k: usize,
        max_v: usize,
        max_n: usize,
    ) -> (ModelParams, Vec<LabeledExample>) {
        let k = rng.random_range(2..=max_k);
        let v = rng.random_range(1..=max_v);
        let n = rng.random_range(1..=max_n);
        let weights: Vec<f64> = (0..k * v).map(|_| rng.random_range(-1.5..1.5)).collect();
        let biases: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let theta = ModelParams::from_parts(weights, biases, k, v).unwrap();
        let batch: Vec<LabeledExample> = (0..n)
            .map(|_| {
                let nnz = rng.random_range(1..=v);
                let pairs: Vec<(usize, f64)> = (0..nnz)
                    .map(|_| (rng.random_range(0..v), rng.random_range(0.0..2.0)))
                    .collect();
                LabeledExample::new(fv(&pairs, v), rng.random_range(0..k))
            })
            .collect();
        (theta, batch)
    }

    fn finite_difference(theta: &ModelParams, batch: &[LabeledExample], l2: f64) -> Vec<f64> {
        let h = 1e-5;
        let flat = theta.flatten();
        let (k, v) = (theta.num_classes(), theta.num_features());
        (0..flat.len())
            .map(|i| {
                let mut plus = flat.clone();
                plus[i] += h;
                let mut minus = flat.clone();
                minus[i] -= h;
                let lp = loss(&ModelParams::from_flat(k, v, &plus).unwrap(), batch, l2).unwrap();
                let lm = loss(&ModelParams::from_flat(k, v, &minus).unwrap(), batch, l2).unwrap();
                (lp - lm) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = substream(23, StreamKind::Shuffle);
        for trial in 0..10 {
            let (theta, batch) = random_instance(&mut rng, 3, 5, 8);
            let l2 = if trial % 2 == 0 { 0.0 } else { 0.05 };
            let analytic = gradient(&theta, &batch, l2).unwrap();
            let numeric = finite_difference(&theta, &batch, l2);
            for (a, f) in analytic.as_slice().iter().zip(&numeric) {
                let denom = a.abs().max(1.0);
                assert!(
                    (a - f).abs() / denom < 1e-6,
                    "trial {trial}: analytic {a} vs finite difference {f}"
                );
            }
        }
    }

    #[test]
    fn gradient_invariant_under_batch_duplication() {
        let mut rng = substream(31, StreamKind::Shuffle);
        let (theta, batch) = random_instance(&mut rng, 3, 4, 5);
        let mut doubled = batch.clone();
        doubled.extend(batch.iter().cloned());
        let g1 = gradient(&theta, &batch, 0.0).unwrap();
        let g2 = gradient(&theta, &doubled, 0.0).unwrap();
        for (a, b) in g1.as_slice().iter().zip(g2.as_slice()) {
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn gradient_vanishes_at_regularized_optimum() {
        // find the optimum of a separable one-feature problem by a long
        // plain gradient-descent run, then check the gradient there
        let batch = vec![
            LabeledExample::new(fv(&[(0, 2.0)], 1), 0),
            LabeledExample::new(fv(&[(0, 0.5)], 1), 1),
        ];
        let mut theta = ModelParams::zeros(2, 1).unwrap();
        let l2 = 0.1;
        for _ in 0..50_000 {
            let g = gradient(&theta, &batch, l2).unwrap();
            let flat: Vec<f64> = theta
                .flatten()
                .iter()
                .zip(g.as_slice())
                .map(|(t, gi)| t - 0.5 * gi)
                .collect();
            theta = ModelParams::from_flat(2, 1, &flat).unwrap();
        }
        let g = gradient(&theta, &batch, l2).unwrap();
        assert!(g.l2_norm() < 1e-6, "gradient norm {} at optimum", g.l2_norm());
    }

    #[test]
    fn per_example_gradients_mean_equals_batch_gradient() {
        let mut rng = substream(37, StreamKind::Shuffle);
        let (theta, batch) = random_instance(&mut rng, 3, 5, 7);
        let per = per_example_gradients(&theta, &batch).unwrap();
        assert_eq!(per.len(), batch.len());
        let n = batch.len() as f64;
        let mut mean = vec![0.0; theta.dim()];
        for g in &per {
            for (m, gi) in mean.iter_mut().zip(g.as_slice()) {
                *m += gi;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let batch_grad = gradient(&theta, &batch, 0.0).unwrap();
        assert_eq!(mean, batch_grad.into_vec());
    }

    #[test]
    fn per_example_singleton_equals_batch() {
        let mut rng = substream(41, StreamKind::Shuffle);
        let (theta, batch) = random_instance(&mut rng, 2, 3, 1);
        let per = per_example_gradients(&theta, &batch).unwrap();
        let whole = gradient(&theta, &batch, 0.0).unwrap();
        assert_eq!(per[0], whole);
    }

    #[test]
    fn identical_examples_identical_gradients() {
        let x = fv(&[(0, 1.0), (2, 0.5)], 3);
        let batch = vec![
            LabeledExample::new(x.clone(), 1),
            LabeledExample::new(x, 1),
        ];
        let theta = ModelParams::zeros(2, 3).unwrap();
        let per = per_example_gradients(&theta, &batch).unwrap();
        assert_eq!(per[0], per[1]);
    }

    #[test]
    fn plain_descent_decreases_loss() {
        let batch = vec![
            LabeledExample::new(fv(&[(0, 1.0)], 2), 0),
            LabeledExample::new(fv(&[(1, 1.0)], 2), 1),
        ];
        let mut theta = ModelParams::zeros(2, 2).unwrap();
        let mut last = loss(&theta, &batch, 0.0).unwrap();
        for _ in 0..200 {
            let g = gradient(&theta, &batch, 0.0).unwrap();
            let flat: Vec<f64> = theta
                .flatten()
                .iter()
                .zip(g.as_slice())
                .map(|(t, gi)| t - 0.1 * gi)
                .collect();
            theta = ModelParams::from_flat(2, 2, &flat).unwrap();
            let next = loss(&theta, &batch, 0.0).unwrap();
            assert!(next <= last + 1e-15, "loss increased: {last} -> {next}");
            last = next;
        }
    }
}
