use std::f64::consts::PI;

use super::{hop_length, FeatureError, FeatureTrack};
use crate::audio_io::AudioClip;
use crate::autodiff::Tensor;
use crate::dsp::{centered_frame, hann_periodic, RealSpectrum};

#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicConfig {
    pub n_fft: usize,
    pub harmonics: usize,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            harmonics: 64,
        }
    }
}

/// Measured harmonic distribution `[frames, K]`; every row is either all
/// zero or sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicTrack {
    pub amplitudes: Tensor,
    pub frame_rate: f64,
}

impl HarmonicTrack {
    pub fn frames(&self) -> usize {
        self.amplitudes.shape()[0]
    }

    pub fn harmonics(&self) -> usize {
        self.amplitudes.shape()[1]
    }
}

/// Magnitude of the Hann window's transform `offset` bins from its peak,
/// relative to the peak.
fn hann_kernel(offset: f64) -> f64 {
    let d = offset.abs();
    if d < 1e-9 {
        return 1.0;
    }
    if (d - 1.0).abs() < 1e-9 {
        return 0.5;
    }
    let sinc = (PI * d).sin() / (PI * d);
    (sinc / (1.0 - d * d)).abs()
}

/// Gain of linear bin interpolation on a stationary sinusoid lying `frac`
/// bins above a bin center.
fn interpolation_gain(frac: f64) -> f64 {
    (1.0 - frac) * hann_kernel(frac) + frac * hann_kernel(1.0 - frac)
}

/// For each voiced frame, samples the STFT magnitude at `k·f0` by linear
/// bin interpolation (divided by the interpolation gain of the Hann
/// window, so that a stationary partial reads the same wherever it falls
/// between bins), zeroes harmonics at or above Nyquist, and normalizes the
/// row to unit sum.
pub fn extract_input_harmonics(
    clip: &AudioClip,
    track: &FeatureTrack,
    cfg: &HarmonicConfig,
) -> Result<HarmonicTrack, FeatureError> {
    if cfg.harmonics == 0 {
        return Err(FeatureError::Config("harmonic count must be at least 1".into()));
    }
    let hop = hop_length(clip.sample_rate(), track.frame_rate)?;
    let frames = clip.len() / hop;
    if frames != track.len() {
        return Err(FeatureError::FrameMismatch {
            clip: frames,
            track: track.len(),
        });
    }
    let n = cfg.n_fft;
    let k_max = cfg.harmonics;
    let sr = clip.sample_rate() as f64;
    let nyquist = sr / 2.0;
    let window = hann_periodic(n);
    let mut spectrum = RealSpectrum::new(n);
    let mut frame = vec![0.0; n];
    let mut mags = vec![0.0; spectrum.bins()];
    let mut data = vec![0.0; frames * k_max];
    for i in 0..frames {
        let f0 = track.f0[i];
        if f0 <= 0.0 {
            continue;
        }
        centered_frame(clip.samples(), i * hop, n, &mut frame);
        frame.iter_mut().zip(&window).for_each(|(x, w)| *x *= w);
        spectrum.magnitudes(&frame, &mut mags);
        let row = &mut data[i * k_max..(i + 1) * k_max];
        for (k, a) in row.iter_mut().enumerate() {
            let f = (k + 1) as f64 * f0;
            if f >= nyquist {
                break;
            }
            let pos = f * n as f64 / sr;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            let hi = (lo + 1).min(mags.len() - 1);
            *a = ((1.0 - frac) * mags[lo] + frac * mags[hi]) / interpolation_gain(frac);
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|a| *a /= total);
        }
    }
    Ok(HarmonicTrack {
        amplitudes: Tensor::matrix(frames, k_max, data).expect("harmonic shape"),
        frame_rate: track.frame_rate,
    })
}
