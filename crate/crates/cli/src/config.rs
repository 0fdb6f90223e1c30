//! Run configuration: a flat JSON object whose keys mirror every tunable of
//! the pipeline. Missing keys take the built-in defaults, unknown keys are
//! rejected, and ranges are checked after all overrides are applied.

use std::fs;
use std::path::Path;

use crydetect::features::BlockKind;
use crydetect::models::{ClassifierKind, RbfGamma, TrainConfig};
use crydetect::pipeline::{PipelineConfig, PreprocessConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("config key `{key}` {message}")]
    Range { key: &'static str, message: String },
    #[error("unknown feature block `{0}`")]
    UnknownBlock(String),
    #[error("unknown classifier `{0}` (expected gbm, svm-linear or svm-rbf)")]
    UnknownClassifier(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AutoKeyword {
    #[serde(rename = "auto")]
    Auto,
}

/// `"auto"` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSetting {
    Auto(AutoKeyword),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sample_rate: u32,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub filter_order: usize,
    pub silence_dbfs: f64,
    pub frame_length: usize,
    pub hop: usize,
    pub n_mfcc: usize,
    pub n_mels: usize,
    pub contrast_bands: usize,
    pub contrast_alpha: f64,
    pub blocks: Vec<String>,
    pub classifier: String,
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub svm_c: f64,
    pub rbf_gamma: GammaSetting,
    pub svm_epochs: usize,
    pub smo_tol: f64,
    pub smo_max_iter: usize,
    pub seed: u64,
    pub rope: f64,
    pub n_mc: usize,
    pub exclude_silent_train: bool,
    pub silence_short_circuit: bool,
    pub allow_participant_overlap: bool,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pre = PreprocessConfig::default();
        let pipe = PipelineConfig::default();
        let train = TrainConfig::default();
        Self {
            sample_rate: pre.sample_rate,
            band_low_hz: pre.band_low_hz,
            band_high_hz: pre.band_high_hz,
            filter_order: pre.filter_order,
            silence_dbfs: pre.silence_dbfs,
            frame_length: pre.frame_length,
            hop: pre.hop,
            n_mfcc: pre.n_mfcc,
            n_mels: pre.n_mels,
            contrast_bands: pre.contrast_bands,
            contrast_alpha: pre.contrast_alpha,
            blocks: pipe.blocks.iter().map(|b| b.name().to_owned()).collect(),
            classifier: pipe.classifier.name().to_owned(),
            n_trees: train.n_trees,
            learning_rate: train.learning_rate,
            max_depth: train.max_depth,
            min_samples_leaf: train.min_samples_leaf,
            svm_c: train.svm_c,
            rbf_gamma: GammaSetting::Auto(AutoKeyword::Auto),
            svm_epochs: train.svm_epochs,
            smo_tol: train.smo_tol,
            smo_max_iter: train.smo_max_iter,
            seed: train.seed,
            rope: 0.0,
            n_mc: crydetect::eval::DEFAULT_N_MC,
            exclude_silent_train: pipe.exclude_silent_train,
            silence_short_circuit: pipe.silence_short_circuit,
            allow_participant_overlap: pipe.allow_participant_overlap,
            workers: pipe.workers,
        }
    }
}

fn range(key: &'static str, ok: bool, message: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Range {
            key,
            message: message.into(),
        })
    }
}

fn positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
    range(
        key,
        v.is_finite() && v > 0.0,
        format!("must be a positive number, got {v}"),
    )
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn block_kinds(&self) -> Result<Vec<BlockKind>, ConfigError> {
        self.blocks
            .iter()
            .map(|b| b.parse().map_err(|_| ConfigError::UnknownBlock(b.clone())))
            .collect()
    }

    pub fn classifier_kind(&self) -> Result<ClassifierKind, ConfigError> {
        self.classifier
            .parse()
            .map_err(|_| ConfigError::UnknownClassifier(self.classifier.clone()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        range(
            "sample_rate",
            (1000..=384_000).contains(&self.sample_rate),
            format!("must lie in 1000..=384000, got {}", self.sample_rate),
        )?;
        let nyquist = self.sample_rate as f64 / 2.0;
        positive("band_low_hz", self.band_low_hz)?;
        range(
            "band_high_hz",
            self.band_high_hz.is_finite() && self.band_high_hz > self.band_low_hz && self.band_high_hz < nyquist,
            format!("must lie between band_low_hz and {nyquist}, got {}", self.band_high_hz),
        )?;
        range(
            "filter_order",
            (2..=16).contains(&self.filter_order) && self.filter_order.is_multiple_of(2),
            format!("must be an even number in 2..=16, got {}", self.filter_order),
        )?;
        range(
            "silence_dbfs",
            self.silence_dbfs.is_finite() && self.silence_dbfs <= 0.0,
            format!("must be a finite level at or below 0 dBFS, got {}", self.silence_dbfs),
        )?;
        range(
            "frame_length",
            (16..=65_536).contains(&self.frame_length),
            format!("must lie in 16..=65536, got {}", self.frame_length),
        )?;
        range(
            "hop",
            self.hop >= 1 && self.hop <= self.frame_length,
            format!("must lie in 1..=frame_length, got {}", self.hop),
        )?;
        range(
            "n_mels",
            (1..=512).contains(&self.n_mels),
            format!("must lie in 1..=512, got {}", self.n_mels),
        )?;
        range(
            "n_mfcc",
            self.n_mfcc >= 1 && self.n_mfcc <= self.n_mels,
            format!("must lie in 1..=n_mels, got {}", self.n_mfcc),
        )?;
        range(
            "contrast_bands",
            (1..=12).contains(&self.contrast_bands),
            format!("must lie in 1..=12, got {}", self.contrast_bands),
        )?;
        range(
            "contrast_alpha",
            self.contrast_alpha > 0.0 && self.contrast_alpha <= 0.5,
            format!("must lie in (0, 0.5], got {}", self.contrast_alpha),
        )?;
        range("blocks", !self.blocks.is_empty(), "must name at least one block")?;
        self.block_kinds()?;
        self.classifier_kind()?;
        range("n_trees", self.n_trees >= 1, "must be at least 1")?;
        range(
            "learning_rate",
            self.learning_rate > 0.0 && self.learning_rate <= 1.0,
            format!("must lie in (0, 1], got {}", self.learning_rate),
        )?;
        range(
            "max_depth",
            (1..=32).contains(&self.max_depth),
            format!("must lie in 1..=32, got {}", self.max_depth),
        )?;
        range("min_samples_leaf", self.min_samples_leaf >= 1, "must be at least 1")?;
        positive("svm_c", self.svm_c)?;
        if let GammaSetting::Value(g) = self.rbf_gamma {
            positive("rbf_gamma", g)?;
        }
        range("svm_epochs", self.svm_epochs >= 1, "must be at least 1")?;
        positive("smo_tol", self.smo_tol)?;
        range("smo_max_iter", self.smo_max_iter >= 1, "must be at least 1")?;
        range(
            "rope",
            self.rope.is_finite() && self.rope >= 0.0,
            format!("must be a non-negative number, got {}", self.rope),
        )?;
        range("n_mc", self.n_mc >= 1, "must be at least 1")?;
        Ok(())
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, ConfigError> {
        self.validate()?;
        Ok(PipelineConfig {
            preprocess: PreprocessConfig {
                sample_rate: self.sample_rate,
                band_low_hz: self.band_low_hz,
                band_high_hz: self.band_high_hz,
                filter_order: self.filter_order,
                silence_dbfs: self.silence_dbfs,
                frame_length: self.frame_length,
                hop: self.hop,
                n_mfcc: self.n_mfcc,
                n_mels: self.n_mels,
                contrast_bands: self.contrast_bands,
                contrast_alpha: self.contrast_alpha,
            },
            blocks: self.block_kinds()?,
            classifier: self.classifier_kind()?,
            train: TrainConfig {
                n_trees: self.n_trees,
                learning_rate: self.learning_rate,
                max_depth: self.max_depth,
                min_samples_leaf: self.min_samples_leaf,
                svm_c: self.svm_c,
                rbf_gamma: match self.rbf_gamma {
                    GammaSetting::Auto(_) => RbfGamma::Auto,
                    GammaSetting::Value(g) => RbfGamma::Value(g),
                },
                svm_epochs: self.svm_epochs,
                smo_tol: self.smo_tol,
                smo_max_iter: self.smo_max_iter,
                seed: self.seed,
            },
            exclude_silent_train: self.exclude_silent_train,
            silence_short_circuit: self.silence_short_circuit,
            allow_participant_overlap: self.allow_participant_overlap,
            workers: self.workers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library() {
        let cfg = RunConfig::default().pipeline().unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn checked_in_defaults_match_builtin() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.json");
        assert_eq!(RunConfig::load(&path).unwrap(), RunConfig::default());
    }

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig {
            rbf_gamma: GammaSetting::Value(0.25),
            ..RunConfig::default()
        };
        let back: RunConfig = serde_json::from_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert!(RunConfig::default().to_json().contains("\"rbf_gamma\": \"auto\""));
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"n_trees": 7}"#).unwrap();
        assert_eq!(cfg.n_trees, 7);
        assert_eq!(cfg.hop, 160);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"n_tree": 7}"#).unwrap_err();
        assert!(err.to_string().contains("n_tree"));
    }

    #[test]
    fn ranges_checked() {
        let bad = [
            RunConfig {
                hop: 0,
                ..RunConfig::default()
            },
            RunConfig {
                band_high_hz: 9000.0,
                ..RunConfig::default()
            },
            RunConfig {
                filter_order: 3,
                ..RunConfig::default()
            },
            RunConfig {
                n_mfcc: 41,
                ..RunConfig::default()
            },
            RunConfig {
                learning_rate: 0.0,
                ..RunConfig::default()
            },
            RunConfig {
                rope: -0.1,
                ..RunConfig::default()
            },
            RunConfig {
                rbf_gamma: GammaSetting::Value(-1.0),
                ..RunConfig::default()
            },
            RunConfig {
                blocks: vec!["mfcc".into(), "pitch".into()],
                ..RunConfig::default()
            },
            RunConfig {
                classifier: "forest".into(),
                ..RunConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        RunConfig::default().validate().unwrap();
    }
}
