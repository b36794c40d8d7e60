//! The privacy mechanism: gradient clipping, Gaussian noise calibration and
//! sampling, the noisy parameter update, and budget accounting.
//!
//! The update applied by the trainer is
//!
//! ```text
//! theta' = theta - lr * (clip(g, C) + n),    n ~ N(0, sigma^2 I)
//! ```
//!
//! with `sigma = sqrt(2 ln(1/delta) / epsilon)` in the default `literal`
//! calibration, or that value multiplied by `C` in `sensitivity` mode.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Per-step privacy budget: the (epsilon, delta) pair.
///
/// Smaller epsilon means stronger privacy; delta bounds the probability
/// mass allotted to exceeding the epsilon guarantee.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacyParams {
    epsilon: f64,
    delta: f64,
}

impl PrivacyParams {
    /// Requires `epsilon > 0` and `0 < delta < 1`.
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be a positive real, got {epsilon}"
            )));
        }
        if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "delta must lie strictly in (0, 1), got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Maximum L2 norm a gradient may keep after clipping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClipNorm {
    c: f64,
}

impl ClipNorm {
    /// Requires `c > 0`. `f64::INFINITY` is accepted and disables clipping.
    pub fn new(c: f64) -> Result<Self> {
        if c.is_nan() || c <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "clip norm must be positive, got {c}"
            )));
        }
        Ok(Self { c })
    }

    pub fn get(&self) -> f64 {
        self.c
    }
}

/// How the noise standard deviation is calibrated from (epsilon, delta).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SigmaMode {
    /// `sigma = sqrt(2 ln(1/delta) / epsilon)`.
    #[default]
    Literal,
    /// The literal value multiplied by the clipping norm `C`, matching the
    /// usual Gaussian-mechanism calibration where `C` plays the role of
    /// the query sensitivity.
    Sensitivity,
}

/// Standard deviation of the isotropic Gaussian noise.
///
/// The covariance is `sigma^2 I`; isotropy lets a single scalar stand in
/// for the whole matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    sigma: f64,
    scaled_by_sensitivity: bool,
}

impl NoiseSpec {
    /// Requires `sigma >= 0` and finite.
    pub fn new(sigma: f64, scaled_by_sensitivity: bool) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma must be a non-negative real, got {sigma}"
            )));
        }
        Ok(Self {
            sigma,
            scaled_by_sensitivity,
        })
    }

    /// Degenerate zero-noise spec.
    pub fn zero() -> Self {
        Self {
            sigma: 0.0,
            scaled_by_sensitivity: false,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn scaled_by_sensitivity(&self) -> bool {
        self.scaled_by_sensitivity
    }
}

/// Flat dense vector of loss partial derivatives, one entry per model
/// parameter (weights row-major by class, then biases).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector(Vec<f64>);

impl GradientVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for GradientVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Rescale `g` so its L2 norm does not exceed `c`: the result is
/// `min(1, c / ||g||) * g`.
///
/// A vector already within the bound is returned unchanged, bit for bit;
/// in particular the zero vector passes through (the scale factor is
/// taken as 1 rather than dividing by a zero norm).
pub fn clip_gradient(g: &GradientVector, c: ClipNorm) -> Result<GradientVector> {
    if !g.all_finite() {
        return Err(Error::InvalidGradient(
            "gradient contains a non-finite entry".to_string(),
        ));
    }
    let norm = g.l2_norm();
    if norm <= c.get() {
        return Ok(g.clone());
    }
    let scale = c.get() / norm;
    Ok(GradientVector::new(
        g.as_slice().iter().map(|v| v * scale).collect(),
    ))
}

/// Noise standard deviation `sqrt(2 ln(1/delta) / epsilon)`.
pub fn noise_sigma(params: &PrivacyParams) -> NoiseSpec {
    let sigma = (2.0 * (1.0 / params.delta()).ln() / params.epsilon()).sqrt();
    NoiseSpec {
        sigma,
        scaled_by_sensitivity: false,
    }
}

/// [`noise_sigma`] additionally multiplied by the clipping norm `C`.
///
/// Errors when `C` is infinite: a sensitivity-scaled sigma must be finite
/// to be sampled from.
pub fn noise_sigma_scaled(params: &PrivacyParams, clip: ClipNorm) -> Result<NoiseSpec> {
    let base = noise_sigma(params);
    let sigma = base.sigma * clip.get();
    if !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sensitivity-scaled sigma is not finite (sigma {} x clip {})",
            base.sigma,
            clip.get()
        )));
    }
    Ok(NoiseSpec {
        sigma,
        scaled_by_sensitivity: true,
    })
}

/// Draw `dim` independent samples from `N(0, sigma^2)`, consuming the
/// stream one draw per coordinate in ascending order.
///
/// Deterministic given the stream state. A zero sigma returns the zero
/// vector without consuming any draws.
pub fn sample_noise<R: Rng + ?Sized>(spec: &NoiseSpec, dim: usize, rng: &mut R) -> GradientVector {
    if spec.sigma == 0.0 {
        return GradientVector::zeros(dim);
    }
    let normal = Normal::new(0.0, spec.sigma).expect("NoiseSpec guarantees a valid sigma");
    GradientVector::new((0..dim).map(|_| normal.sample(rng)).collect())
}

/// One noisy update on a flat parameter vector:
/// `theta' = theta - lr * (clip(g, c) + noise)`.
///
/// With `spec.sigma == 0` this reduces exactly to one clipped
/// gradient-descent step; no noise draws are consumed.
pub fn noisy_update_flat<R: Rng + ?Sized>(
    theta: &[f64],
    g: &GradientVector,
    lr: f64,
    c: ClipNorm,
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if g.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: g.len(),
        });
    }
    let clipped = clip_gradient(g, c)?;
    if spec.sigma == 0.0 {
        return Ok(theta
            .iter()
            .zip(clipped.as_slice())
            .map(|(t, d)| t - lr * d)
            .collect());
    }
    let noise = sample_noise(spec, theta.len(), rng);
    Ok(theta
        .iter()
        .zip(clipped.as_slice().iter().zip(noise.as_slice()))
        .map(|(t, (d, n))| t - lr * (d + n))
        .collect())
}

/// [`noisy_update_flat`] on structured model parameters, using their fixed
/// flattening order.
pub fn noisy_update<R: Rng + ?Sized>(
    theta: &ModelParams,
    g: &GradientVector,
    lr: f64,
    c: ClipNorm,
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<ModelParams> {
    let updated = noisy_update_flat(&theta.flatten(), g, lr, c, spec, rng)?;
    ModelParams::from_flat(theta.num_classes(), theta.num_features(), &updated)
}

/// Linear-composition privacy ledger.
///
/// Spent budget is always `steps_taken x step epsilon` (and likewise for
/// delta), computed as a single product so the arithmetic is exact for any
/// step count. Charging past a cap fails and leaves the ledger untouched;
/// the training loop is expected to stop on that error.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetLedger {
    step_params: PrivacyParams,
    steps_taken: u64,
    epsilon_cap: Option<f64>,
    delta_cap: Option<f64>,
}

impl BudgetLedger {
    /// Caps are optional; `None` means unbounded. An epsilon cap must be
    /// positive, a delta cap must lie in (0, 1].
    pub fn new(
        step_params: PrivacyParams,
        epsilon_cap: Option<f64>,
        delta_cap: Option<f64>,
    ) -> Result<Self> {
        if let Some(cap) = epsilon_cap {
            if cap.is_nan() || cap <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "epsilon cap must be positive, got {cap}"
                )));
            }
        }
        if let Some(cap) = delta_cap {
            if cap.is_nan() || cap <= 0.0 || cap > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "delta cap must lie in (0, 1], got {cap}"
                )));
            }
        }
        Ok(Self {
            step_params,
            steps_taken: 0,
            epsilon_cap,
            delta_cap,
        })
    }

    pub fn unbounded(step_params: PrivacyParams) -> Self {
        Self {
            step_params,
            steps_taken: 0,
            epsilon_cap: None,
            delta_cap: None,
        }
    }

    pub fn step_params(&self) -> PrivacyParams {
        self.step_params
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    pub fn spent_epsilon(&self) -> f64 {
        self.steps_taken as f64 * self.step_params.epsilon()
    }

    pub fn spent_delta(&self) -> f64 {
        self.steps_taken as f64 * self.step_params.delta()
    }

    /// Charge one training step under sequential composition.
    pub fn charge_step(&mut self) -> Result<()> {
        let next = self.steps_taken + 1;
        let epsilon = next as f64 * self.step_params.epsilon();
        if let Some(cap) = self.epsilon_cap {
            if epsilon > cap {
                return Err(Error::BudgetExhausted {
                    resource: "epsilon",
                    step: next,
                    would_spend: epsilon,
                    cap,
                });
            }
        }
        let delta = next as f64 * self.step_params.delta();
        if let Some(cap) = self.delta_cap {
            if delta > cap {
                return Err(Error::BudgetExhausted {
                    resource: "delta",
                    step: next,
                    would_spend: delta,
                    cap,
                });
            }
        }
        self.steps_taken = next;
        Ok(())
    }
}
