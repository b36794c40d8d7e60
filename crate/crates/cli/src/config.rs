//! Run configuration: built-in defaults, overridden by a flat
//! `key = value` config file, overridden again by command-line flags.

use std::path::{Path, PathBuf};

use dptext_core::corpus::read_key_values;
use dptext_core::features::FeatureScheme;
use dptext_core::trainer::{ClipMode, TrainConfig};
use dptext_core::{ClipNorm, PrivacyParams, SigmaMode};

use crate::CliError;

/// Whether training runs the private loop or the plain baseline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TrainMode {
    #[default]
    Dp,
    Baseline,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub metrics_out: Option<PathBuf>,
    pub mode: TrainMode,
    pub scheme: FeatureScheme,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub clip_mode: ClipMode,
    pub sigma_mode: SigmaMode,
    pub noise: bool,
    pub l2: f64,
    pub epsilon_cap: Option<f64>,
    pub delta_cap: Option<f64>,
    pub split: (f64, f64, f64),
    pub split_seed: u64,
    pub min_doc_freq: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            stopwords: None,
            vocab: None,
            model: None,
            report: None,
            metrics_out: None,
            mode: TrainMode::Dp,
            scheme: FeatureScheme::Count,
            lr: 0.1,
            epochs: 20,
            batch_size: 32,
            clip: 1.0,
            epsilon: 1.0,
            delta: 1e-5,
            seed: 42,
            clip_mode: ClipMode::PerExample,
            sigma_mode: SigmaMode::Literal,
            noise: true,
            l2: 0.0,
            epsilon_cap: None,
            delta_cap: None,
            split: (0.8, 0.1, 0.1),
            split_seed: 7,
            min_doc_freq: 1,
        }
    }
}

fn bad_value(key: &str, value: &str, wanted: &str) -> CliError {
    CliError::Usage(format!("config key {key:?}: expected {wanted}, got {value:?}"))
}

fn parse_f64(key: &str, value: &str) -> Result<f64, CliError> {
    value.parse().map_err(|_| bad_value(key, value, "a number"))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, CliError> {
    value
        .parse()
        .map_err(|_| bad_value(key, value, "a non-negative integer"))
}

fn parse_u64(key: &str, value: &str) -> Result<u64, CliError> {
    value
        .parse()
        .map_err(|_| bad_value(key, value, "a non-negative integer"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad_value(key, value, "true or false")),
    }
}

fn parse_optional_cap(key: &str, value: &str) -> Result<Option<f64>, CliError> {
    if value == "none" {
        Ok(None)
    } else {
        parse_f64(key, value).map(Some)
    }
}

pub fn parse_clip_mode(value: &str) -> Result<ClipMode, CliError> {
    match value {
        "batch" => Ok(ClipMode::Batch),
        "per_example" => Ok(ClipMode::PerExample),
        _ => Err(bad_value("clip_mode", value, "batch or per_example")),
    }
}

pub fn parse_sigma_mode(value: &str) -> Result<SigmaMode, CliError> {
    match value {
        "literal" => Ok(SigmaMode::Literal),
        "sensitivity" => Ok(SigmaMode::Sensitivity),
        _ => Err(bad_value("sigma_mode", value, "literal or sensitivity")),
    }
}

pub fn parse_scheme(value: &str) -> Result<FeatureScheme, CliError> {
    match value {
        "count" => Ok(FeatureScheme::Count),
        "tfidf" => Ok(FeatureScheme::TfIdf),
        _ => Err(bad_value("scheme", value, "count or tfidf")),
    }
}

pub fn parse_mode(value: &str) -> Result<TrainMode, CliError> {
    match value {
        "dp" => Ok(TrainMode::Dp),
        "baseline" => Ok(TrainMode::Baseline),
        _ => Err(bad_value("mode", value, "dp or baseline")),
    }
}

pub fn parse_split(value: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<f64> = value
        .split(',')
        .map(|p| parse_f64("split", p.trim()))
        .collect::<Result<_, _>>()?;
    if parts.len() != 3 {
        return Err(bad_value(
            "split",
            value,
            "three comma-separated fractions",
        ));
    }
    Ok((parts[0], parts[1], parts[2]))
}

impl RunConfig {
    /// Apply a `key = value` config file on top of the defaults.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let entries = read_key_values(path)
            .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
        for (key, value) in entries {
            self.apply_entry(&key, &value)?;
        }
        Ok(())
    }

    fn apply_entry(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "stopwords" => self.stopwords = Some(PathBuf::from(value)),
            "vocab" => self.vocab = Some(PathBuf::from(value)),
            "model" => self.model = Some(PathBuf::from(value)),
            "report" => self.report = Some(PathBuf::from(value)),
            "metrics_out" => self.metrics_out = Some(PathBuf::from(value)),
            "mode" => self.mode = parse_mode(value)?,
            "scheme" => self.scheme = parse_scheme(value)?,
            "lr" => self.lr = parse_f64(key, value)?,
            "epochs" => self.epochs = parse_usize(key, value)?,
            "batch_size" => self.batch_size = parse_usize(key, value)?,
            "clip" => self.clip = parse_f64(key, value)?,
            "epsilon" => self.epsilon = parse_f64(key, value)?,
            "delta" => self.delta = parse_f64(key, value)?,
            "seed" => self.seed = parse_u64(key, value)?,
            "clip_mode" => self.clip_mode = parse_clip_mode(value)?,
            "sigma_mode" => self.sigma_mode = parse_sigma_mode(value)?,
            "noise" => self.noise = parse_bool(key, value)?,
            "l2" => self.l2 = parse_f64(key, value)?,
            "epsilon_cap" => self.epsilon_cap = parse_optional_cap(key, value)?,
            "delta_cap" => self.delta_cap = parse_optional_cap(key, value)?,
            "split" => self.split = parse_split(value)?,
            "split_seed" => self.split_seed = parse_u64(key, value)?,
            "min_doc_freq" => self.min_doc_freq = parse_usize(key, value)?,
            other => {
                return Err(CliError::Usage(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    /// Build the trainer config, validating parameter ranges.
    pub fn to_train_config(&self) -> Result<TrainConfig, CliError> {
        let config = TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            clip: ClipNorm::new(self.clip).map_err(|e| CliError::Usage(e.to_string()))?,
            privacy: PrivacyParams::new(self.epsilon, self.delta)
                .map_err(|e| CliError::Usage(e.to_string()))?,
            seed: self.seed,
            clip_mode: self.clip_mode,
            sigma_mode: self.sigma_mode,
            noise_enabled: self.noise,
            l2: self.l2,
            epsilon_cap: self.epsilon_cap,
            delta_cap: self.delta_cap,
        };
        config
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }

    pub fn require(path: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
        path.clone().ok_or_else(|| {
            CliError::Usage(format!(
                "missing {what}: pass --{what} or set `{what}` in the config file",
                what = what
            ))
        })
    }

    /// Stable textual echo of every setting, for the run report.
    pub fn echo_entries(&self) -> Vec<(String, String)> {
        let mode = match self.mode {
            TrainMode::Dp => "dp",
            TrainMode::Baseline => "baseline",
        };
        let scheme = match self.scheme {
            FeatureScheme::Count => "count",
            FeatureScheme::TfIdf => "tfidf",
        };
        let clip_mode = match self.clip_mode {
            ClipMode::Batch => "batch",
            ClipMode::PerExample => "per_example",
        };
        let sigma_mode = match self.sigma_mode {
            SigmaMode::Literal => "literal",
            SigmaMode::Sensitivity => "sensitivity",
        };
        let cap = |v: &Option<f64>| v.map_or("none".to_string(), |c| c.to_string());
        vec![
            ("mode".into(), mode.into()),
            ("scheme".into(), scheme.into()),
            ("seed".into(), self.seed.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("lr".into(), self.lr.to_string()),
            ("l2".into(), self.l2.to_string()),
            ("clip".into(), self.clip.to_string()),
            ("clip_mode".into(), clip_mode.into()),
            ("sigma_mode".into(), sigma_mode.into()),
            ("noise".into(), self.noise.to_string()),
            ("epsilon".into(), self.epsilon.to_string()),
            ("delta".into(), self.delta.to_string()),
            ("epsilon_cap".into(), cap(&self.epsilon_cap)),
            ("delta_cap".into(), cap(&self.delta_cap)),
            (
                "split".into(),
                format!("{},{},{}", self.split.0, self.split.1, self.split.2),
            ),
            ("split_seed".into(), self.split_seed.to_string()),
        ]
    }
}
