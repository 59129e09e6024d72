use super::{hop_length, FeatureError, FeatureTrack, DEFAULT_FRAME_RATE};
use crate::audio_io::AudioClip;
use crate::dsp::{a_weighting_db, centered_frame, hann_periodic, RealSpectrum};

pub(crate) const DEFAULT_FLOOR_DB: f64 = -80.0;

#[derive(Clone, Debug, PartialEq)]
pub struct LoudnessConfig {
    pub frame_rate: f64,
    pub n_fft: usize,
    pub floor_db: f64,
}

impl Default for LoudnessConfig {
    fn default() -> Self {
        Self {
            frame_rate: DEFAULT_FRAME_RATE,
            n_fft: 1024,
            floor_db: DEFAULT_FLOOR_DB,
        }
    }
}

/// Per-frame A-weighted mean-square level in dB, clamped at `floor_db`.
///
/// A full-scale sine at 1 kHz reads about −3 dB. f0 and confidence are left
/// at zero.
pub fn extract_loudness(clip: &AudioClip, cfg: &LoudnessConfig) -> Result<FeatureTrack, FeatureError> {
    let hop = hop_length(clip.sample_rate(), cfg.frame_rate)?;
    let n = cfg.n_fft;
    let sr = clip.sample_rate() as f64;
    let window = hann_periodic(n);
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    let mut spectrum = RealSpectrum::new(n);
    let bins = spectrum.bins();
    // Power weights; one-sided bins count twice except DC and Nyquist.
    let weights: Vec<f64> = (0..bins)
        .map(|k| {
            let f = k as f64 * sr / n as f64;
            let fold = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            fold * 10f64.powf(a_weighting_db(f) / 10.0)
        })
        .collect();

    let frames = clip.len() / hop;
    let mut frame = vec![0.0; n];
    let mut power = vec![0.0; bins];
    let loudness = (0..frames)
        .map(|i| {
            centered_frame(clip.samples(), i * hop, n, &mut frame);
            frame.iter_mut().zip(&window).for_each(|(x, w)| *x *= w);
            spectrum.powers(&frame, &mut power);
            let ms: f64 = power.iter().zip(&weights).map(|(p, w)| p * w).sum::<f64>() / (n as f64 * window_energy);
            if ms > 0.0 {
                (10.0 * ms.log10()).max(cfg.floor_db)
            } else {
                cfg.floor_db
            }
        })
        .collect();
    Ok(FeatureTrack {
        f0: vec![0.0; frames],
        loudness,
        confidence: vec![0.0; frames],
        frame_rate: cfg.frame_rate,
    })
}
