//! Analysis side of the pipeline: frame-rate pitch, loudness, MFCCs and the
//! measured harmonic distribution of an input signal.
//!
//! All extractors share one framing convention: frame `i` is centered on
//! sample `i * hop`, and a clip of `n` samples has `n / hop` frames. The
//! synthesizer uses the same convention when it interpolates controls, so
//! analysis and synthesis line up sample for sample.

mod dump;
mod harmonics;
mod loudness;
mod mfcc;
mod pitch;

pub use dump::{DumpError, FeatureArray, FeatureDump, FEATURE_MAGIC, FEATURE_VERSION};
pub use harmonics::{extract_input_harmonics, HarmonicConfig, HarmonicTrack};
pub use loudness::{extract_loudness, LoudnessConfig};
pub use mfcc::{extract_mfcc, MfccConfig, MfccTrack};
pub use pitch::{extract_pitch, PitchConfig};

use thiserror::Error;

use crate::audio_io::AudioClip;

/// f0 fed to the decoder before the first voiced frame.
pub const DEFAULT_HELD_F0: f64 = 440.0;
pub const DEFAULT_FRAME_RATE: f64 = 250.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("clip of {len} samples is shorter than one {window}-sample analysis window")]
    TooShort { len: usize, window: usize },
    #[error("frame rate {frame_rate} does not divide sample rate {sample_rate}")]
    FrameRate { sample_rate: u32, frame_rate: f64 },
    #[error("frame count mismatch: clip has {clip} frames, track has {track}")]
    FrameMismatch { clip: usize, track: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Samples per frame for a clip rate and frame rate, which must divide exactly.
pub fn hop_length(sample_rate: u32, frame_rate: f64) -> Result<usize, FeatureError> {
    let hop = sample_rate as f64 / frame_rate;
    if !(frame_rate > 0.0) || hop.fract() != 0.0 || hop < 1.0 {
        return Err(FeatureError::FrameRate { sample_rate, frame_rate });
    }
    Ok(hop as usize)
}

/// Frame-rate conditioning signals.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTrack {
    /// Hz per frame; 0 marks an unvoiced frame.
    pub f0: Vec<f64>,
    /// dB per frame.
    pub loudness: Vec<f64>,
    /// Voicing confidence in `[0, 1]`.
    pub confidence: Vec<f64>,
    pub frame_rate: f64,
}

impl FeatureTrack {
    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn is_voiced(&self, frame: usize) -> bool {
        self.f0[frame] > 0.0
    }

    /// f0 with unvoiced frames replaced by the last voiced value
    /// ([`DEFAULT_HELD_F0`] before the first voiced frame). Oscillator phase
    /// needs a frequency at every frame.
    pub fn held_f0(&self) -> Vec<f64> {
        let mut last = DEFAULT_HELD_F0;
        self.f0
            .iter()
            .map(|&f| {
                if f > 0.0 {
                    last = f;
                }
                last
            })
            .collect()
    }

    /// Combines the pitch fields of `self` with the loudness of `other`.
    pub fn with_loudness(mut self, other: &FeatureTrack) -> Result<Self, FeatureError> {
        if other.len() != self.len() {
            return Err(FeatureError::FrameMismatch {
                clip: self.len(),
                track: other.len(),
            });
        }
        self.loudness = other.loudness.clone();
        Ok(self)
    }

    /// Frames `start..start + len`.
    pub fn window(&self, start: usize, len: usize) -> Self {
        Self {
            f0: self.f0[start..start + len].to_vec(),
            loudness: self.loudness[start..start + len].to_vec(),
            confidence: self.confidence[start..start + len].to_vec(),
            frame_rate: self.frame_rate,
        }
    }
}

/// Pitch and loudness in one track.
pub fn extract_track(
    clip: &AudioClip,
    pitch: &PitchConfig,
    loudness: &LoudnessConfig,
) -> Result<FeatureTrack, FeatureError> {
    extract_pitch(clip, pitch)?.with_loudness(&extract_loudness(clip, loudness)?)
}
