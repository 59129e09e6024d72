//! One place for every numeric default, readable from and dumpable to TOML.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{hop_length, LoudnessConfig, MfccConfig, PitchConfig};
use crate::loss_train::{AdamConfig, AnalysisConfig, LossConfig, TrainConfig};
use crate::nn::{Architecture, ModelKind};
use crate::xsynth::InterpolationFactor;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {message}")]
    Io { path: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioSection {
    pub sample_rate: u32,
    pub frame_rate: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub harmonics: usize,
    pub noise_bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: usize,
    pub latent: usize,
    pub encoder_hidden: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub f0_min: f64,
    pub f0_max: f64,
    pub yin_threshold: f64,
    pub pitch_window: usize,
    pub loudness_fft: usize,
    pub mfcc_fft: usize,
    pub mfcc_mels: usize,
    pub mfcc_coefficients: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub fft_sizes: Vec<usize>,
    pub overlap: f64,
    pub log_weight: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub window: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub steps: u64,
    pub checkpoint_every: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XsynthSection {
    pub p: f64,
}

/// Effective settings for every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub audio: AudioSection,
    pub synth: SynthSection,
    pub model: ModelSection,
    pub features: FeatureSection,
    pub loss: LossSection,
    pub train: TrainSection,
    pub xsynth: XsynthSection,
}

impl Default for AudioSection {
    fn default() -> Self {
        Self {
            sample_rate: crate::audio_io::DEFAULT_SAMPLE_RATE,
            frame_rate: 250,
        }
    }
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            harmonics: crate::synth::DEFAULT_HARMONICS,
            noise_bins: crate::synth::DEFAULT_NOISE_BINS,
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden: crate::nn::DEFAULT_HIDDEN,
            latent: crate::nn::DEFAULT_LATENT,
            encoder_hidden: crate::nn::DEFAULT_ENCODER_HIDDEN,
        }
    }
}

impl Default for FeatureSection {
    fn default() -> Self {
        let (p, l, m) = (PitchConfig::default(), LoudnessConfig::default(), MfccConfig::default());
        Self {
            f0_min: p.f0_min,
            f0_max: p.f0_max,
            yin_threshold: p.threshold,
            pitch_window: p.window,
            loudness_fft: l.n_fft,
            mfcc_fft: m.n_fft,
            mfcc_mels: m.n_mels,
            mfcc_coefficients: m.n_mfcc,
        }
    }
}

impl Default for LossSection {
    fn default() -> Self {
        let l = LossConfig::default();
        Self {
            fft_sizes: l.fft_sizes,
            overlap: l.overlap,
            log_weight: l.log_weight,
            eps: l.eps,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            window: t.window,
            learning_rate: t.adam.learning_rate,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            adam_eps: t.adam.eps,
            steps: t.steps,
            checkpoint_every: t.checkpoint_every,
        }
    }
}

impl Default for XsynthSection {
    fn default() -> Self {
        Self {
            p: crate::xsynth::DEFAULT_P,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            audio: AudioSection::default(),
            synth: SynthSection::default(),
            model: ModelSection::default(),
            features: FeatureSection::default(),
            loss: LossSection::default(),
            train: TrainSection::default(),
            xsynth: XsynthSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// SHA-256 of the canonical TOML dump, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        hop_length(self.audio.sample_rate, self.audio.frame_rate as f64).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if InterpolationFactor::new(self.xsynth.p).is_err() {
            return invalid(format!("xsynth.p = {} outside [0, 1]", self.xsynth.p));
        }
        if !(self.features.f0_min > 0.0 && self.features.f0_min < self.features.f0_max) {
            return invalid("features.f0_min must be positive and below f0_max".into());
        }
        self.architecture(ModelKind::Latent).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.loss_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn hop(&self) -> usize {
        (self.audio.sample_rate / self.audio.frame_rate) as usize
    }

    pub fn analysis(&self) -> AnalysisConfig {
        let f = &self.features;
        let mut a = AnalysisConfig::with_rates(self.audio.sample_rate, self.audio.frame_rate as f64);
        a.pitch.f0_min = f.f0_min;
        a.pitch.f0_max = f.f0_max;
        a.pitch.threshold = f.yin_threshold;
        a.pitch.window = f.pitch_window;
        a.loudness.n_fft = f.loudness_fft;
        a.mfcc.n_fft = f.mfcc_fft;
        a.mfcc.n_mels = f.mfcc_mels;
        a.mfcc.n_mfcc = f.mfcc_coefficients;
        a
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            fft_sizes: self.loss.fft_sizes.clone(),
            overlap: self.loss.overlap,
            log_weight: self.loss.log_weight,
            eps: self.loss.eps,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            batch_size: t.batch_size,
            window: t.window,
            adam: AdamConfig {
                learning_rate: t.learning_rate,
                beta1: t.beta1,
                beta2: t.beta2,
                eps: t.adam_eps,
            },
            steps: t.steps,
            checkpoint_every: t.checkpoint_every,
            seed: self.seed,
        }
    }

    pub fn architecture(&self, kind: ModelKind) -> Architecture {
        let (s, m) = (&self.synth, &self.model);
        let mut arch = match kind {
            ModelKind::Timbre => Architecture::timbre(s.harmonics, s.noise_bins, m.hidden),
            ModelKind::Latent => Architecture::latent(
                s.harmonics,
                s.noise_bins,
                m.hidden,
                m.latent,
                m.encoder_hidden,
                self.features.mfcc_coefficients,
            ),
        };
        arch.sample_rate = self.audio.sample_rate;
        arch.frame_rate = self.audio.frame_rate;
        arch
    }
}
