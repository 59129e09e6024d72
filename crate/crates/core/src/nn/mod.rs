//! Decoder, encoder and checkpoint container.
//!
//! The decoder maps frame-rate pitch and loudness (and optionally a latent
//! vector) to synthesizer controls; the encoder maps MFCC frames to that
//! latent vector. Parameters live in generic containers, see [`layers`].

mod checkpoint;
mod decoder;
mod encoder;
pub mod layers;

pub use checkpoint::{ModelCheckpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use decoder::{decoder_forward, decoder_graph, DecoderParams};
pub use encoder::{encoder_forward, encoder_graph, EncoderParams};

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::features::{FeatureTrack, MfccTrack};

pub const DEFAULT_HIDDEN: usize = 128;
pub const DEFAULT_LATENT: usize = 16;
pub const DEFAULT_ENCODER_HIDDEN: usize = 128;
/// Divisor applied to MIDI pitch before it enters the decoder.
pub const F0_SCALE: f64 = 127.0;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("frame count mismatch: {0}")]
    FrameMismatch(String),
    #[error("latent input supplied to a decoder without a latent stack")]
    UnexpectedLatent,
    #[error("latent model needs MFCC input")]
    MissingLatent,
    #[error("input width {got} does not match architecture width {expected}")]
    Width { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("checkpoint {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint tensor mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Which conditioning the decoder receives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Pitch and loudness only.
    Timbre,
    /// Pitch, loudness and an MFCC-derived latent vector.
    Latent,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Timbre => "timbre",
            ModelKind::Latent => "latent",
        }
    }
}

/// Fixed-order integer description of a model, stored in checkpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub kind: ModelKind,
    pub harmonics: usize,
    pub noise_bins: usize,
    /// Width of the decoder dense stacks and recurrent layer.
    pub hidden: usize,
    /// Latent width; ignored for [`ModelKind::Timbre`].
    pub latent: usize,
    pub encoder_hidden: usize,
    pub n_mfcc: usize,
    pub sample_rate: u32,
    pub frame_rate: u32,
}

impl Architecture {
    pub fn timbre(harmonics: usize, noise_bins: usize, hidden: usize) -> Self {
        Self {
            kind: ModelKind::Timbre,
            harmonics,
            noise_bins,
            hidden,
            latent: 0,
            encoder_hidden: 0,
            n_mfcc: 0,
            sample_rate: crate::audio_io::DEFAULT_SAMPLE_RATE,
            frame_rate: 250,
        }
    }

    pub fn latent(harmonics: usize, noise_bins: usize, hidden: usize, latent: usize, encoder_hidden: usize, n_mfcc: usize) -> Self {
        Self {
            kind: ModelKind::Latent,
            latent,
            encoder_hidden,
            n_mfcc,
            ..Self::timbre(harmonics, noise_bins, hidden)
        }
    }

    pub fn latent_width(&self) -> Option<usize> {
        (self.kind == ModelKind::Latent).then_some(self.latent)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::Architecture(m.to_string()));
        if self.harmonics == 0 || self.hidden == 0 {
            return bad("harmonics and hidden width must be positive");
        }
        if self.noise_bins < 2 {
            return bad("need at least 2 noise bins");
        }
        if self.kind == ModelKind::Latent && (self.latent == 0 || self.encoder_hidden == 0 || self.n_mfcc == 0) {
            return bad("latent model needs positive latent, encoder and MFCC widths");
        }
        if self.sample_rate == 0 || self.frame_rate == 0 || self.sample_rate % self.frame_rate != 0 {
            return bad("frame rate must divide sample rate");
        }
        Ok(())
    }

    pub fn hop(&self) -> usize {
        (self.sample_rate / self.frame_rate) as usize
    }
}

/// Conditioning statistics measured on the training set.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub loudness_mean: f64,
    pub loudness_std: f64,
    pub f0_scale: f64,
    /// Per-coefficient MFCC mean; empty for timbre models.
    pub mfcc_mean: Vec<f64>,
    pub mfcc_std: Vec<f64>,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            loudness_mean: 0.0,
            loudness_std: 1.0,
            f0_scale: F0_SCALE,
            mfcc_mean: Vec::new(),
            mfcc_std: Vec::new(),
        }
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt().max(1e-3))
}

impl Normalization {
    /// Statistics over every frame of every track.
    pub fn fit(tracks: &[&FeatureTrack], mfccs: &[&MfccTrack]) -> Self {
        let (loudness_mean, loudness_std) = mean_std(tracks.iter().flat_map(|t| t.loudness.iter().copied()));
        let width = mfccs.first().map_or(0, |m| m.width());
        let (mut mfcc_mean, mut mfcc_std) = (Vec::with_capacity(width), Vec::with_capacity(width));
        for c in 0..width {
            let (m, s) = mean_std(
                mfccs
                    .iter()
                    .flat_map(move |t| (0..t.frames()).map(move |f| t.coefficients.data()[f * width + c])),
            );
            mfcc_mean.push(m);
            mfcc_std.push(s);
        }
        Self {
            loudness_mean,
            loudness_std,
            f0_scale: F0_SCALE,
            mfcc_mean,
            mfcc_std,
        }
    }

    /// MIDI pitch over `f0_scale`; `f0` must already be held through
    /// unvoiced frames.
    pub fn f0(&self, f0_hz: &[f64]) -> Vec<f64> {
        f0_hz.iter().map(|&f| (69.0 + 12.0 * (f.max(1e-3) / 440.0).log2()) / self.f0_scale).collect()
    }

    pub fn loudness(&self, db: &[f64]) -> Vec<f64> {
        db.iter().map(|&l| (l - self.loudness_mean) / self.loudness_std).collect()
    }

    pub fn mfcc(&self, track: &MfccTrack) -> Result<MfccTrack, NnError> {
        let width = track.width();
        if width != self.mfcc_mean.len() {
            return Err(NnError::Width {
                expected: self.mfcc_mean.len(),
                got: width,
            });
        }
        let mut coefficients = track.coefficients.clone();
        for row in coefficients.data_mut().chunks_mut(width) {
            for ((v, m), s) in row.iter_mut().zip(&self.mfcc_mean).zip(&self.mfcc_std) {
                *v = (*v - m) / s;
            }
        }
        Ok(MfccTrack {
            coefficients,
            frame_rate: track.frame_rate,
        })
    }
}

/// Every trainable tensor of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub decoder: DecoderParams<T>,
    pub encoder: Option<EncoderParams<T>>,
}

impl<T> ModelParams<T> {
    pub fn visit<U>(&self, f: &mut impl FnMut(&str, &T) -> U) -> ModelParams<U> {
        ModelParams {
            decoder: self.decoder.visit("decoder", f),
            encoder: self.encoder.as_ref().map(|e| e.visit("encoder", f)),
        }
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit(&mut |n, _| names.push(n.to_string()));
        names
    }
}

impl ModelParams<Tensor> {
    /// Seeded initialization for `arch`.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self, NnError> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let decoder = DecoderParams::init(arch.harmonics, arch.noise_bins, arch.hidden, arch.latent_width(), &mut rng);
        let encoder = match arch.kind {
            ModelKind::Timbre => None,
            ModelKind::Latent => Some(EncoderParams::init(arch.n_mfcc, arch.encoder_hidden, arch.latent, &mut rng)),
        };
        Ok(Self { decoder, encoder })
    }

    /// Leaves in visiting order.
    pub fn to_flat(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        self.visit(&mut |_, t| out.push(t.clone()));
        out
    }

    /// Same structure with leaves replaced, in visiting order.
    pub fn with_flat(&self, mut flat: Vec<Tensor>) -> Self {
        flat.reverse();
        self.visit(&mut |_, _| flat.pop().expect("flat parameter count"))
    }

    pub fn bind<'t>(&self, tape: &'t Tape) -> ModelParams<Var<'t>> {
        self.visit(&mut |_, t| tape.param(t.clone()))
    }

    pub fn parameter_count(&self) -> usize {
        self.to_flat().iter().map(Tensor::len).sum()
    }
}
