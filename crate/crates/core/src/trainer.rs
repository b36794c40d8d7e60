//! The training loop: per mini-batch, compute the gradient, clip it, add
//! calibrated Gaussian noise, update the parameters, and charge the
//! privacy ledger.
//!
//! Everything is deterministic given the data order and the config. The
//! seed feeds two independent streams: one reshuffles examples each
//! epoch, the other supplies noise draws (consumed per step, per
//! coordinate ascending), so toggling either feature never perturbs the
//! other.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::dp::{
    clip_gradient, noise_sigma, noise_sigma_scaled, sample_noise, BudgetLedger, ClipNorm,
    NoiseSpec, PrivacyParams, SigmaMode,
};
use crate::error::{Error, Result};
use crate::model::{add_l2_penalty, gradient, loss, per_example_gradients, LabeledExample, ModelParams};
use crate::rng::{substream, StreamKind};

/// What gets clipped each step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClipMode {
    /// Clip the mean batch gradient wholesale.
    Batch,
    /// Clip each per-example gradient, then average. Bounds any single
    /// example's influence on the update, which is what clipping is for.
    #[default]
    PerExample,
}

/// Training hyperparameters and privacy settings.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip: ClipNorm,
    pub privacy: PrivacyParams,
    pub seed: u64,
    pub clip_mode: ClipMode,
    pub sigma_mode: SigmaMode,
    pub noise_enabled: bool,
    pub l2: f64,
    pub epsilon_cap: Option<f64>,
    pub delta_cap: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            epochs: 20,
            batch_size: 32,
            clip: ClipNorm::new(1.0).expect("1.0 is a valid clip norm"),
            privacy: PrivacyParams::new(1.0, 1e-5).expect("default privacy params are valid"),
            seed: 42,
            clip_mode: ClipMode::default(),
            sigma_mode: SigmaMode::default(),
            noise_enabled: true,
            l2: 0.0,
            epsilon_cap: None,
            delta_cap: None,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is tolerated (it makes every update a no-op).
    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be a non-negative real, got {}",
                self.lr
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch size must be at least 1".into(),
            ));
        }
        if !self.l2.is_finite() || self.l2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "l2 penalty must be a non-negative real, got {}",
                self.l2
            )));
        }
        Ok(())
    }
}

/// Summary of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Full-data loss recorded at the end of each epoch (plus once more
    /// at the moment of an early stop).
    pub epoch_losses: Vec<f64>,
    pub steps_taken: u64,
    pub spent_epsilon: f64,
    pub spent_delta: f64,
    /// Set when the budget ran out before the planned schedule finished.
    pub early_stopped: bool,
    pub wall_time_secs: f64,
}

/// Per-step instrumentation record.
#[derive(Clone, Copy, Debug)]
pub struct StepEvent {
    pub epoch: usize,
    /// 1-based count of applied updates, including this one.
    pub step: u64,
    /// L2 norm of the update direction before noise; bounded by the clip
    /// norm plus the (unclipped) l2-penalty term.
    pub pre_noise_norm: f64,
}

enum LoopMode {
    Baseline,
    DifferentiallyPrivate,
}

fn infer_dims(data: &[LabeledExample]) -> Result<(usize, usize)> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let num_features = data[0].features.num_features();
    let mut max_label = 0;
    for example in data {
        if example.features.num_features() != num_features {
            return Err(Error::DimensionMismatch {
                expected: num_features,
                got: example.features.num_features(),
            });
        }
        max_label = max_label.max(example.label);
    }
    let num_classes = max_label + 1;
    if num_classes < 2 {
        return Err(Error::InvalidParameter(
            "training data must contain at least two classes".to_string(),
        ));
    }
    Ok((num_classes, num_features))
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn run_loop(
    data: &[LabeledExample],
    config: &TrainConfig,
    mode: LoopMode,
    mut observer: impl FnMut(&StepEvent),
) -> Result<(ModelParams, TrainReport, BudgetLedger)> {
    config.validate()?;
    let start = Instant::now();
    let (num_classes, num_features) = infer_dims(data)?;
    let mut theta = ModelParams::zeros(num_classes, num_features)?;
    let dim = theta.dim();

    let mut shuffle_rng = substream(config.seed, StreamKind::Shuffle);
    let mut noise_rng = substream(config.seed, StreamKind::Noise);

    let private = matches!(mode, LoopMode::DifferentiallyPrivate);
    let mut ledger = BudgetLedger::new(config.privacy, config.epsilon_cap, config.delta_cap)?;
    let (clip, clip_mode, noise_spec) = if private {
        let spec = if config.noise_enabled {
            match config.sigma_mode {
                SigmaMode::Literal => noise_sigma(&config.privacy),
                SigmaMode::Sensitivity => noise_sigma_scaled(&config.privacy, config.clip)?,
            }
        } else {
            NoiseSpec::zero()
        };
        (config.clip, config.clip_mode, spec)
    } else {
        // plain mini-batch gradient descent: no clip, no noise, no ledger
        (ClipNorm::new(f64::INFINITY)?, ClipMode::Batch, NoiseSpec::zero())
    };

    let mut indices: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut steps: u64 = 0;
    let mut early_stopped = false;

    'epochs: for epoch in 0..config.epochs {
        indices.shuffle(&mut shuffle_rng);
        let shuffled: Vec<LabeledExample> =
            indices.iter().map(|&i| data[i].clone()).collect();
        for batch in shuffled.chunks(config.batch_size) {
            if private && ledger.charge_step().is_err() {
                early_stopped = true;
                break 'epochs;
            }
            let direction = match clip_mode {
                ClipMode::Batch => {
                    let g = gradient(&theta, batch, config.l2)?;
                    clip_gradient(&g, clip)?.into_vec()
                }
                ClipMode::PerExample => {
                    let mut acc = vec![0.0; dim];
                    for g in per_example_gradients(&theta, batch)? {
                        let clipped = clip_gradient(&g, clip)?;
                        for (a, c) in acc.iter_mut().zip(clipped.as_slice()) {
                            *a += c;
                        }
                    }
                    let n = batch.len() as f64;
                    for a in acc.iter_mut() {
                        *a /= n;
                    }
                    add_l2_penalty(&mut acc, &theta, config.l2);
                    acc
                }
            };
            steps += 1;
            observer(&StepEvent {
                epoch,
                step: steps,
                pre_noise_norm: l2_norm(&direction),
            });
            let noisy_direction = if config.noise_enabled && private {
                let noise = sample_noise(&noise_spec, dim, &mut noise_rng);
                direction
                    .iter()
                    .zip(noise.as_slice())
                    .map(|(d, n)| d + n)
                    .collect()
            } else {
                direction
            };
            let flat: Vec<f64> = theta
                .flatten()
                .iter()
                .zip(&noisy_direction)
                .map(|(t, d)| t - config.lr * d)
                .collect();
            theta = ModelParams::from_flat(num_classes, num_features, &flat)?;
        }
        epoch_losses.push(loss(&theta, data, config.l2)?);
    }
    if early_stopped {
        epoch_losses.push(loss(&theta, data, config.l2)?);
    }

    let report = TrainReport {
        epoch_losses,
        steps_taken: steps,
        spent_epsilon: if private { ledger.spent_epsilon() } else { 0.0 },
        spent_delta: if private { ledger.spent_delta() } else { 0.0 },
        early_stopped,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    debug_assert!(!private || report.steps_taken == ledger.steps_taken());
    Ok((theta, report, ledger))
}

/// Differentially private training: parameters start at zero, examples
/// reshuffle once per epoch, each mini-batch update applies
/// `theta - lr * (clip(g) + noise)` and charges the ledger.
///
/// Budget exhaustion stops training early (flagged in the report) rather
/// than erroring: the partial model is still returned.
pub fn train_dp(
    data: &[LabeledExample],
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport, BudgetLedger)> {
    run_loop(data, config, LoopMode::DifferentiallyPrivate, |_| {})
}

/// [`train_dp`] with a per-step instrumentation callback.
pub fn train_dp_with_observer(
    data: &[LabeledExample],
    config: &TrainConfig,
    observer: impl FnMut(&StepEvent),
) -> Result<(ModelParams, TrainReport, BudgetLedger)> {
    run_loop(data, config, LoopMode::DifferentiallyPrivate, observer)
}

/// Plain mini-batch gradient descent: no clipping, no noise, no ledger.
/// The non-private comparison point.
pub fn train_baseline(
    data: &[LabeledExample],
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    let (theta, report, _) = run_loop(data, config, LoopMode::Baseline, |_| {})?;
    Ok((theta, report))
}

/// Fraction of examples whose predicted class matches the label.
pub fn training_accuracy(theta: &ModelParams, data: &[LabeledExample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut correct = 0usize;
    for example in data {
        if crate::model::predict(theta, &example.features)? == example.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
