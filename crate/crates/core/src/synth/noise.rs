use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SynthError;
use crate::audio_io::AudioClip;
use crate::autodiff::{Tape, Tensor};
use crate::dsp::{hann_periodic, hann_symmetric};

/// Linear map from `B` magnitude samples (0 Hz to Nyquist) to a centered,
/// Hann-windowed linear-phase FIR of `2(B−1)+1` taps, as a `[taps, B]`
/// matrix. This is the frequency-sampling design: inverse real DFT of the
/// zero-phase response, rotated so the peak sits on the middle tap.
pub fn fir_from_magnitudes(bins: usize) -> Result<Tensor, SynthError> {
    if bins < 2 {
        return Err(SynthError::TooFewBins(bins));
    }
    let n = 2 * (bins - 1);
    let taps = n + 1;
    let delay = (taps - 1) / 2;
    let window = hann_symmetric(taps);
    let mut m = vec![0.0; taps * bins];
    for t in 0..taps {
        let lag = t as f64 - delay as f64;
        for k in 0..bins {
            let weight = if k == 0 || k == bins - 1 { 1.0 } else { 2.0 };
            let c = (2.0 * PI * k as f64 * lag / n as f64).cos();
            m[t * bins + k] = window[t] * weight * c / n as f64;
        }
    }
    Ok(Tensor::matrix(taps, bins, m).expect("fir matrix shape"))
}

/// Seeded white-noise segments, `2·hop` samples per frame, each shaped by a
/// periodic Hann window so that adjacent segments overlap-add at 50%.
pub fn noise_segments(seed: u64, frames: usize, hop: usize) -> Vec<f64> {
    let len = 2 * hop;
    let window = hann_periodic(len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(frames * len);
    for _ in 0..frames {
        out.extend(window.iter().map(|w| w * rng.random_range(-1.0..1.0)));
    }
    out
}

/// Filtered noise: per frame, a frequency-sampled FIR built from that
/// frame's magnitudes filters a fresh noise segment; segments overlap-add.
pub fn noise_synth(noise_mags: &Tensor, hop: usize, seed: u64, sample_rate: u32) -> Result<AudioClip, SynthError> {
    let (frames, bins) = noise_mags.dims2();
    if bins < 2 {
        return Err(SynthError::TooFewBins(bins));
    }
    if frames == 0 || noise_mags.rank() != 2 {
        return Err(SynthError::Empty);
    }
    let tape = Tape::new();
    let mags = tape.constant(noise_mags.clone());
    let out = super::graph::noise_graph(&tape, mags, hop, seed)?;
    let samples = out.value().data().to_vec();
    Ok(AudioClip::new(samples, sample_rate).expect("finite noise output"))
}
