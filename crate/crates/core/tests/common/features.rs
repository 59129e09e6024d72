//! Feature-extraction oracles. Each function returns the worst deviation it
//! measured so tests can assert on it and the acceptance target can print it.

use std::f64::consts::{PI, TAU};

use ddsp_vocal::audio_io::AudioClip;
use ddsp_vocal::features::{
    extract_input_harmonics, extract_loudness, extract_mfcc, extract_pitch, HarmonicConfig, LoudnessConfig,
    MfccConfig, PitchConfig,
};
use ddsp_vocal::fixtures::{chirp, harmonic_tone, sine, vocal_like};

use super::randoms;

const SR: u32 = 16000;
const HOP: usize = 64;

/// Frames whose analysis windows lie fully inside the clip.
fn interior(frames: usize, window: usize) -> std::ops::Range<usize> {
    let margin = window / (2 * HOP) + 1;
    margin..frames.saturating_sub(margin)
}

/// Worst relative f0 error of the pitch tracker over interior frames of
/// stationary tones, and the number of interior frames reported unvoiced.
pub fn yin_tone_error() -> (f64, usize) {
    let cfg = PitchConfig::default();
    let mut worst: f64 = 0.0;
    let mut unvoiced = 0;
    let tones: Vec<(f64, AudioClip)> = [82.4, 110.0, 220.0, 330.3, 440.0, 659.3, 987.8]
        .iter()
        .map(|&f| (f, sine(f, 0.5, 1.0, SR)))
        .chain([(146.8, harmonic_tone(146.8, &[0.3, 0.6, 0.2, 0.1], 1.0, SR))])
        .collect();
    for (f, clip) in tones {
        let track = extract_pitch(&clip, &cfg).unwrap();
        for i in interior(track.len(), cfg.window) {
            if track.f0[i] == 0.0 {
                unvoiced += 1;
            } else {
                worst = worst.max((track.f0[i] / f - 1.0).abs());
            }
        }
    }
    (worst, unvoiced)
}

/// Worst relative error against the instantaneous frequency of a
/// 200 → 400 Hz linear chirp at each frame center.
pub fn yin_chirp_error() -> f64 {
    let cfg = PitchConfig::default();
    let secs = 2.0;
    let clip = chirp(200.0, 400.0, 0.5, secs, SR);
    let n = clip.len() as f64;
    let track = extract_pitch(&clip, &cfg).unwrap();
    interior(track.len(), cfg.window)
        .map(|i| {
            let truth = 200.0 + 200.0 * (i * HOP) as f64 / n;
            if track.f0[i] == 0.0 {
                1.0
            } else {
                (track.f0[i] / truth - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Worst deviation, in dB, of `loudness(g·x) − loudness(x)` from
/// `20·log10(g)` over frames above the floor.
pub fn loudness_gain_error() -> f64 {
    let cfg = LoudnessConfig::default();
    let clip = vocal_like(4, 2.0, SR);
    let base = extract_loudness(&clip, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for g in [0.5, 0.1, 0.03, 1.2] {
        let scaled = extract_loudness(&clip.scaled(g), &cfg).unwrap();
        let shift = 20.0 * f64::log10(g);
        for (a, b) in base.loudness.iter().zip(&scaled.loudness) {
            if a.min(*b) > cfg.floor_db + 1.0 {
                worst = worst.max((b - a - shift).abs());
            }
        }
    }
    worst
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Direct-summation MFCC of the frame centered on `center`: periodic Hann,
/// DFT power, triangular HTK mel bands, natural log, orthonormal DCT-II.
pub fn brute_force_mfcc(x: &[f64], center: usize, cfg: &MfccConfig, sample_rate: f64) -> Vec<f64> {
    let n = cfg.n_fft;
    let frame: Vec<f64> = (0..n)
        .map(|j| {
            let idx = center as isize - (n / 2) as isize + j as isize;
            let v = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] } else { 0.0 };
            v * (0.5 - 0.5 * (TAU * j as f64 / n as f64).cos())
        })
        .collect();
    let power: Vec<f64> = (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in frame.iter().enumerate() {
                let w = TAU * ((k * j) % n) as f64 / n as f64;
                re += v * w.cos();
                im -= v * w.sin();
            }
            re * re + im * im
        })
        .collect();
    let top = hz_to_mel(sample_rate / 2.0);
    let centers: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let log_mel: Vec<f64> = (0..cfg.n_mels)
        .map(|m| {
            let e: f64 = power
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let f = k as f64 * sample_rate / n as f64;
                    let up = (f - centers[m]) / (centers[m + 1] - centers[m]);
                    let down = (centers[m + 2] - f) / (centers[m + 2] - centers[m + 1]);
                    p * up.min(down).max(0.0)
                })
                .sum();
            e.max(cfg.energy_floor).ln()
        })
        .collect();
    let m = cfg.n_mels as f64;
    (0..cfg.n_mfcc)
        .map(|q| {
            let s: f64 = log_mel
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI * q as f64 * (i as f64 + 0.5) / m).cos())
                .sum();
            s * if q == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() }
        })
        .collect()
}

/// Worst `max|mfcc − oracle| / max|oracle|` over a few frames of a voice
/// with added noise, including the zero-padded first frame.
pub fn mfcc_relative_error() -> f64 {
    let cfg = MfccConfig::default();
    let voice = vocal_like(6, 0.5, SR);
    let noise = randoms(6, voice.len(), -0.05, 0.05);
    let x: Vec<f64> = voice.samples().iter().zip(noise).map(|(a, b)| a + b).collect();
    let clip = AudioClip::new(x.clone(), SR).unwrap();
    let track = extract_mfcc(&clip, &cfg).unwrap();
    [0, 17, 60, 100]
        .iter()
        .map(|&f| {
            let oracle = brute_force_mfcc(&x, f * HOP, &cfg, SR as f64);
            let got = track.coefficients.row(f);
            let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            got.iter().zip(&oracle).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
        })
        .fold(0.0, f64::max)
}

/// Worst relative error of the measured `A_2/A_1` and `A_3/A_1` ratios on
/// tones with harmonics `1 : 0.5 : 0.25`, over interior frames.
pub fn harmonic_ratio_error() -> f64 {
    let cfg = PitchConfig::default();
    let mut worst: f64 = 0.0;
    for f0 in [196.0, 220.0, 233.3, 311.1, 440.0] {
        let clip = harmonic_tone(f0, &[0.4, 0.2, 0.1], 1.0, SR);
        let track = extract_pitch(&clip, &cfg).unwrap();
        let h = extract_input_harmonics(&clip, &track, &HarmonicConfig::default()).unwrap();
        let k = h.harmonics();
        for i in interior(h.frames(), HarmonicConfig::default().n_fft) {
            let row = &h.amplitudes.data()[i * k..(i + 1) * k];
            worst = worst.max((row[1] / row[0] / 0.5 - 1.0).abs());
            worst = worst.max((row[2] / row[0] / 0.25 - 1.0).abs());
        }
    }
    worst
}
