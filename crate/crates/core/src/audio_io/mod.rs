//! Mono audio clips, WAV files and sample-rate conversion.

mod resample;
mod wav;

pub use resample::resample;
pub use wav::{read_wav, write_wav};

use std::path::PathBuf;

use thiserror::Error;

/// Operating rate of every model in this crate.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("audio file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("malformed RIFF/WAVE data: {0}")]
    Malformed(String),
    #[error("unsupported WAV encoding: format tag {format}, {bits} bits per sample")]
    UnsupportedEncoding { format: u16, bits: u16 },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A mono sample sequence at a fixed rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::InvalidClip(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// RMS level in dB relative to full scale; `-inf` for digital silence.
    pub fn rms_dbfs(&self) -> f64 {
        20.0 * self.rms().log10()
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Copy of `len` samples starting at `start`.
    pub fn window(&self, start: usize, len: usize) -> Self {
        Self {
            samples: self.samples[start..start + len].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn truncated(mut self, len: usize) -> Self {
        self.samples.truncate(len);
        self
    }
}
