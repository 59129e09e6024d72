//! Deterministic synthetic signals standing in for recorded datasets.
//!
//! The vocal-like generator sings short phrases of formant-shaped notes
//! separated by silence; the instrument generators play bright harmonic
//! tones without formants. All are seeded and sample-exact across runs.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio_io::AudioClip;

/// `amplitude · sin(2π f t)`.
pub fn sine(freq: f64, amplitude: f64, seconds: f64, sample_rate: u32) -> AudioClip {
    harmonic_tone(freq, &[amplitude], seconds, sample_rate)
}

/// Stationary tone with harmonic `k + 1` at amplitude `amplitudes[k]`.
pub fn harmonic_tone(f0: f64, amplitudes: &[f64], seconds: f64, sample_rate: u32) -> AudioClip {
    let n = (seconds * sample_rate as f64).round() as usize;
    let fs = sample_rate as f64;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            amplitudes
                .iter()
                .enumerate()
                .map(|(k, a)| a * (TAU * (k + 1) as f64 * f0 * t).sin())
                .sum()
        })
        .collect();
    AudioClip::new(samples, sample_rate).expect("finite tone")
}

/// Linear frequency sweep from `f_start` to `f_end`.
pub fn chirp(f_start: f64, f_end: f64, amplitude: f64, seconds: f64, sample_rate: u32) -> AudioClip {
    let n = (seconds * sample_rate as f64).round() as usize;
    let fs = sample_rate as f64;
    let mut phase: f64 = 0.0;
    let samples = (0..n)
        .map(|i| {
            let f = f_start + (f_end - f_start) * i as f64 / n.max(1) as f64;
            let s = amplitude * phase.sin();
            phase = (phase + TAU * f / fs) % TAU;
            s
        })
        .collect();
    AudioClip::new(samples, sample_rate).expect("finite chirp")
}

/// Formant frequencies of five vowels, Hz.
const VOWELS: [[f64; 3]; 5] = [
    [800.0, 1150.0, 2900.0],
    [400.0, 2000.0, 2550.0],
    [270.0, 2300.0, 3000.0],
    [450.0, 800.0, 2830.0],
    [300.0, 870.0, 2240.0],
];

/// One sung or played note.
#[derive(Clone, Copy, Debug)]
struct Note {
    start: usize,
    len: usize,
    f0: f64,
    vowel: usize,
}

fn phrase_plan(rng: &mut ChaCha8Rng, total: usize, fs: f64, scale: &[f64], gaps: bool) -> Vec<Note> {
    let mut notes = Vec::new();
    let mut t = (0.05 * fs) as usize;
    while t < total {
        let phrase_notes = rng.random_range(2..5);
        for _ in 0..phrase_notes {
            let len = (rng.random_range(0.18..0.45) * fs) as usize;
            if t + len > total {
                break;
            }
            notes.push(Note {
                start: t,
                len,
                f0: scale[rng.random_range(0..scale.len())],
                vowel: rng.random_range(0..VOWELS.len()),
            });
            t += len;
        }
        t += if gaps { (rng.random_range(0.15..0.35) * fs) as usize } else { (0.02 * fs) as usize };
        if notes.is_empty() {
            break;
        }
    }
    notes
}

fn resonance(f: f64, centre: f64, bandwidth: f64) -> f64 {
    1.0 / (1.0 + ((f - centre) / bandwidth).powi(2))
}

/// Renders notes with a per-note harmonic recipe. `shape(f0, k, vowel)`
/// gives the amplitude of harmonic `k` (1-based).
fn render_notes(
    notes: &[Note],
    total: usize,
    sample_rate: u32,
    gain: f64,
    vibrato: f64,
    noise: f64,
    rng: &mut ChaCha8Rng,
    shape: impl Fn(f64, usize, usize) -> f64,
) -> AudioClip {
    let fs = sample_rate as f64;
    let mut out = vec![0.0; total];
    let ramp = (0.02 * fs) as usize;
    for note in notes {
        let max_k = ((fs / 2.0) / (note.f0 * 1.03)).floor() as usize;
        let amps: Vec<f64> = (1..=max_k.min(40)).map(|k| shape(note.f0, k, note.vowel)).collect();
        // L1 normalization bounds the peak regardless of phase alignment.
        let norm: f64 = amps.iter().sum::<f64>().max(1e-12);
        let mut phase = rng.random_range(0.0..TAU);
        let rate = rng.random_range(4.5..6.0);
        for i in 0..note.len {
            let env = (i.min(note.len - 1 - i) as f64 / ramp as f64).min(1.0);
            let f = note.f0 * (1.0 + vibrato * (TAU * rate * i as f64 / fs).sin());
            phase = (phase + TAU * f / fs) % TAU;
            let tone: f64 = amps.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * phase).sin()).sum();
            let breath = noise * rng.random_range(-1.0..1.0);
            out[note.start + i] += gain * env * (tone / norm + breath);
        }
    }
    AudioClip::new(out, sample_rate).expect("finite fixture")
}

/// Vowel-like singing: formant-shaped harmonics, vibrato, breath noise and
/// silent gaps between phrases.
pub fn vocal_like(seed: u64, seconds: f64, sample_rate: u32) -> AudioClip {
    vocal_like_with_breath(seed, seconds, sample_rate, 0.02)
}

/// [`vocal_like`] with a chosen breath-noise level (uniform noise amplitude
/// relative to the normalized tone). Zero gives a purely harmonic voice.
pub fn vocal_like_with_breath(seed: u64, seconds: f64, sample_rate: u32, breath: f64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = (seconds * sample_rate as f64) as usize;
    let scale = [196.0, 220.0, 246.9, 261.6, 293.7, 329.6];
    let notes = phrase_plan(&mut rng, total, sample_rate as f64, &scale, true);
    render_notes(&notes, total, sample_rate, 0.8, 0.01, breath, &mut rng, |f0, k, v| {
        let f = f0 * k as f64;
        let [f1, f2, f3] = VOWELS[v];
        (resonance(f, f1, 90.0) + 0.7 * resonance(f, f2, 110.0) + 0.4 * resonance(f, f3, 150.0) + 0.02) / k as f64
    })
}

/// Brass-like tones: bright, slowly decaying harmonic series, no formants.
pub fn brass_like(seed: u64, seconds: f64, sample_rate: u32) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = (seconds * sample_rate as f64) as usize;
    let scale = [233.1, 261.6, 293.7, 349.2, 392.0];
    let notes = phrase_plan(&mut rng, total, sample_rate as f64, &scale, false);
    render_notes(&notes, total, sample_rate, 0.8, 0.003, 0.005, &mut rng, |_, k, _| {
        let k = k as f64;
        (k / 3.0).min(1.0) * k.powf(-0.8)
    })
}

/// Synthesizer lead: sawtooth-like series.
pub fn synth_like(seed: u64, seconds: f64, sample_rate: u32) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = (seconds * sample_rate as f64) as usize;
    let scale = [261.6, 311.1, 349.2, 392.0, 466.2];
    let notes = phrase_plan(&mut rng, total, sample_rate as f64, &scale, false);
    render_notes(&notes, total, sample_rate, 0.8, 0.0, 0.0, &mut rng, |_, k, _| 1.0 / k as f64)
}
