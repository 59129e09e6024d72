use std::f64::consts::TAU;

use super::{active_harmonics, hop_for, nyquist_mask, SynthControls, SynthError};
use crate::audio_io::AudioClip;
use crate::autodiff::{harmonic_sines, wrap_phase};

/// Oscillator bank `x(n) = a(n) Σ_k A_k(n) sin(φ_k(n))` with
/// `φ_k(n) = 2π k Σ_{m ≤ n} f0(m) / f_s`, evaluated sample by sample.
///
/// The running phase is wrapped to `[0, 2π)` after every sample and all
/// harmonics start at zero phase.
pub fn harmonic_synth(f0: &[f64], controls: &SynthControls, sample_rate: u32) -> Result<AudioClip, SynthError> {
    controls.check(f0)?;
    let hop = hop_for(controls, sample_rate)?;
    let fs = sample_rate as f64;
    let frames = controls.frames();
    let k = controls.harmonic_count();
    let masked = nyquist_mask(&controls.harmonics, f0, fs);
    let amps = masked.data();
    let a = &controls.amplitude;

    let mut out = Vec::with_capacity(frames * hop);
    let mut phase = 0.0;
    let mut sines = vec![0.0; k];
    let mut row = vec![0.0; k];
    for i in 0..frames {
        let next = if i + 1 < frames { i + 1 } else { i };
        let (ra, rb) = (&amps[i * k..(i + 1) * k], &amps[next * k..(next + 1) * k]);
        for j in 0..hop {
            let frac = j as f64 / hop as f64;
            let f = f0[i] + frac * (f0[next] - f0[i]);
            phase = wrap_phase(phase + TAU * f / fs);
            let gain = a[i] + frac * (a[next] - a[i]);
            let m = active_harmonics(f, fs, k);
            if gain == 0.0 || m == 0 {
                out.push(0.0);
                continue;
            }
            for ((r, &x), &y) in row[..m].iter_mut().zip(ra).zip(rb) {
                *r = x + frac * (y - x);
            }
            harmonic_sines(phase, &mut sines[..m]);
            let s: f64 = row[..m].iter().zip(&sines[..m]).map(|(r, s)| r * s).sum();
            out.push(gain * s);
        }
    }
    Ok(AudioClip::new(out, sample_rate).expect("finite oscillator output"))
}
