//! Drive the harmonic-plus-noise synthesizer directly with hand-built controls.
//!
//! `cargo run --example render_tone -- out.wav`

use std::error::Error;

use ddsp_vocal::audio_io::write_wav;
use ddsp_vocal::autodiff::Tensor;
use ddsp_vocal::synth::{render, SynthControls};

const SR: u32 = 16000;
const FRAME_RATE: f64 = 250.0;

fn main() -> Result<(), Box<dyn Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "tone.wav".into());
    let (frames, k, bins) = (500, 32, 65);

    // A two-second glide from 196 Hz to 392 Hz with a slow swell.
    let f0: Vec<f64> = (0..frames).map(|i| 196.0 * 2f64.powf(i as f64 / frames as f64)).collect();
    let amplitude: Vec<f64> =
        (0..frames).map(|i| 0.4 * (std::f64::consts::PI * i as f64 / frames as f64).sin()).collect();

    // Harmonic profile drifts from bright (1/k) to dark (1/k^3).
    let mut harmonics = Vec::with_capacity(frames * k);
    for i in 0..frames {
        let t = i as f64 / frames as f64;
        let row: Vec<f64> = (1..=k).map(|h| (h as f64).powf(-(1.0 + 2.0 * t))).collect();
        let sum: f64 = row.iter().sum();
        harmonics.extend(row.iter().map(|a| a / sum));
    }

    // Breath noise: a gentle high shelf.
    let noise: Vec<f64> = (0..frames)
        .flat_map(|_| (0..bins).map(|b| 0.002 + 0.006 * b as f64 / bins as f64))
        .collect();

    let controls = SynthControls {
        amplitude,
        harmonics: Tensor::matrix(frames, k, harmonics)?,
        noise_mags: Tensor::matrix(frames, bins, noise)?,
        frame_rate: FRAME_RATE,
    };
    let audio = render(&f0, &controls, SR, 42)?;
    write_wav(&audio, &out)?;
    println!("wrote {out}: {} samples, {:.1} dBFS RMS", audio.len(), audio.rms_dbfs());
    Ok(())
}
