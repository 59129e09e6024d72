//! Harmonic-plus-noise synthesizers.
//!
//! Controls arrive at frame rate and are linearly interpolated to sample
//! rate (frame `i` sits on sample `i * hop`). Each synthesizer comes in two
//! forms: a streaming evaluator for inference and a graph builder in
//! [`graph`] that records the same computation on an autodiff tape for
//! training. Both apply the same Nyquist masking rules:
//!
//! * at frame rate, harmonic `k` of frame `i` is zeroed when `k·f0_i ≥ f_s/2`;
//! * at sample rate, harmonic `k` is silent when `k·f0(n) ≥ f_s/2`.
//!
//! Masked energy is dropped, never redistributed to the remaining harmonics.

pub mod graph;
mod harmonic;
mod noise;

pub use harmonic::harmonic_synth;
pub use noise::{fir_from_magnitudes, noise_segments, noise_synth};

use thiserror::Error;

use crate::audio_io::AudioClip;
use crate::autodiff::{AutodiffError, Tensor};

pub const DEFAULT_HARMONICS: usize = 64;
pub const DEFAULT_NOISE_BINS: usize = 65;
pub const DEFAULT_HOP: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("control frame mismatch: {0}")]
    FrameMismatch(String),
    #[error("negative f0 {0} Hz")]
    NegativeF0(f64),
    #[error("need at least 2 noise magnitude bins, got {0}")]
    TooFewBins(usize),
    #[error("empty control sequence")]
    Empty,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Frame-rate synthesizer controls.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthControls {
    /// Global amplitude `a(n)` per frame.
    pub amplitude: Vec<f64>,
    /// Harmonic distribution `[frames, K]`.
    pub harmonics: Tensor,
    /// Noise filter magnitude samples `[frames, B]` from 0 Hz to Nyquist.
    pub noise_mags: Tensor,
    pub frame_rate: f64,
}

impl SynthControls {
    pub fn frames(&self) -> usize {
        self.amplitude.len()
    }

    pub fn harmonic_count(&self) -> usize {
        self.harmonics.shape()[1]
    }

    pub fn noise_bins(&self) -> usize {
        self.noise_mags.shape()[1]
    }

    fn check(&self, f0: &[f64]) -> Result<(), SynthError> {
        let f = self.frames();
        if f == 0 {
            return Err(SynthError::Empty);
        }
        if self.harmonics.shape()[0] != f || self.noise_mags.shape()[0] != f || f0.len() != f {
            return Err(SynthError::FrameMismatch(format!(
                "amplitude {f}, harmonics {}, noise {}, f0 {}",
                self.harmonics.shape()[0],
                self.noise_mags.shape()[0],
                f0.len()
            )));
        }
        check_f0(f0)
    }
}

pub(crate) fn check_f0(f0: &[f64]) -> Result<(), SynthError> {
    match f0.iter().find(|&&f| !(f >= 0.0)) {
        Some(&f) => Err(SynthError::NegativeF0(f)),
        None => Ok(()),
    }
}

/// Number of leading harmonics strictly below Nyquist at fundamental `f0`.
pub fn active_harmonics(f0: f64, sample_rate: f64, k: usize) -> usize {
    if f0 <= 0.0 {
        return k;
    }
    let ratio = sample_rate / 2.0 / f0;
    let below = ratio.ceil() as usize - 1;
    below.min(k)
}

/// Zeroes, per frame, every harmonic at or above Nyquist.
pub fn nyquist_mask(harmonics: &Tensor, f0: &[f64], sample_rate: f64) -> Tensor {
    let (frames, k) = harmonics.dims2();
    let mut out = harmonics.clone();
    for i in 0..frames {
        let active = active_harmonics(f0[i], sample_rate, k);
        out.data_mut()[i * k + active..(i + 1) * k].iter_mut().for_each(|a| *a = 0.0);
    }
    out
}

/// Linear interpolation of `[frames, D]` values to `[frames * hop, D]`,
/// holding the last frame.
pub fn upsample_controls(frame_values: &Tensor, hop: usize) -> Result<Tensor, SynthError> {
    if frame_values.is_empty() {
        return Err(SynthError::Empty);
    }
    if hop == 0 {
        return Err(SynthError::FrameMismatch("hop must be at least 1".into()));
    }
    let (frames, dims) = match frame_values.shape() {
        [f] => (*f, 1),
        [f, d] => (*f, *d),
        s => return Err(SynthError::FrameMismatch(format!("expected [frames] or [frames, D], got {s:?}"))),
    };
    let data = crate::autodiff::upsample_linear(frame_values.data(), frames, dims, hop);
    let mut shape = frame_values.shape().to_vec();
    shape[0] = frames * hop;
    Ok(Tensor::new(shape, data)?)
}

/// Harmonic plus filtered-noise output, `frames * hop` samples.
pub fn render(f0: &[f64], controls: &SynthControls, sample_rate: u32, seed: u64) -> Result<AudioClip, SynthError> {
    let harmonic = harmonic_synth(f0, controls, sample_rate)?;
    let hop = harmonic.len() / controls.frames();
    let noise = noise_synth(&controls.noise_mags, hop, seed, sample_rate)?;
    let samples = harmonic.samples().iter().zip(noise.samples()).map(|(h, n)| h + n).collect();
    Ok(AudioClip::new(samples, sample_rate).expect("finite synth output"))
}

pub(crate) fn hop_for(controls: &SynthControls, sample_rate: u32) -> Result<usize, SynthError> {
    crate::features::hop_length(sample_rate, controls.frame_rate)
        .map_err(|e| SynthError::FrameMismatch(e.to_string()))
}
