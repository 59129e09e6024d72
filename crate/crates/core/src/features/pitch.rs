use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{hop_length, FeatureError, FeatureTrack, DEFAULT_FRAME_RATE};
use crate::audio_io::AudioClip;

/// YIN pitch tracker settings.
#[derive(Clone, Debug, PartialEq)]
pub struct PitchConfig {
    pub f0_min: f64,
    pub f0_max: f64,
    pub frame_rate: f64,
    /// Absolute threshold on the cumulative-mean-normalized difference.
    pub threshold: f64,
    /// Integration window in samples.
    pub window: usize,
    /// Frames quieter than this mean-square level are unvoiced outright.
    pub silence_power: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            f0_min: 50.0,
            f0_max: 1000.0,
            frame_rate: DEFAULT_FRAME_RATE,
            threshold: 0.15,
            window: 1024,
            silence_power: 1e-10,
        }
    }
}

struct Yin {
    window: usize,
    tau_min: usize,
    tau_max: usize,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    a: Vec<Complex<f64>>,
    b: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Yin {
    fn new(cfg: &PitchConfig, sample_rate: f64) -> Self {
        let tau_min = ((sample_rate / cfg.f0_max).floor() as usize).max(2);
        let tau_max = (sample_rate / cfg.f0_min).ceil() as usize;
        let fft_len = (cfg.window + tau_max + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            window: cfg.window,
            tau_min,
            tau_max,
            fft_len,
            forward,
            inverse,
            a: vec![Complex::new(0.0, 0.0); fft_len],
            b: vec![Complex::new(0.0, 0.0); fft_len],
            scratch: vec![Complex::new(0.0, 0.0); scratch_len],
        }
    }

    fn segment_len(&self) -> usize {
        self.window + self.tau_max + 1
    }

    /// Difference function `d(τ) = Σ_j (x_j − x_{j+τ})²` for `τ ≤ tau_max`,
    /// with the cross term from an FFT correlation.
    fn difference(&mut self, seg: &[f64]) -> Vec<f64> {
        let w = self.window;
        for (i, c) in self.a.iter_mut().enumerate() {
            *c = Complex::new(if i < w { seg[i] } else { 0.0 }, 0.0);
        }
        for (i, c) in self.b.iter_mut().enumerate() {
            *c = Complex::new(seg.get(i).copied().unwrap_or(0.0), 0.0);
        }
        self.forward.process_with_scratch(&mut self.a, &mut self.scratch);
        self.forward.process_with_scratch(&mut self.b, &mut self.scratch);
        for (a, b) in self.a.iter_mut().zip(&self.b) {
            *a = a.conj() * b;
        }
        self.inverse.process_with_scratch(&mut self.a, &mut self.scratch);
        let scale = 1.0 / self.fft_len as f64;

        let mut prefix = Vec::with_capacity(seg.len() + 1);
        prefix.push(0.0);
        for &x in seg {
            prefix.push(prefix.last().unwrap() + x * x);
        }
        let e0 = prefix[w];
        (0..=self.tau_max)
            .map(|tau| {
                let et = prefix[tau + w] - prefix[tau];
                (e0 + et - 2.0 * self.a[tau].re * scale).max(0.0)
            })
            .collect()
    }
}

/// Cumulative-mean-normalized difference; `d'(0) = 1`.
fn normalize(d: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0; d.len()];
    let mut running = 0.0;
    for tau in 1..d.len() {
        running += d[tau];
        out[tau] = if running > 0.0 { d[tau] * tau as f64 / running } else { 1.0 };
    }
    out
}

/// Returns (f0, confidence) for one normalized difference curve.
fn pick_period(dn: &[f64], tau_min: usize, threshold: f64, sample_rate: f64, cfg: &PitchConfig) -> (f64, f64) {
    let tau_max = dn.len() - 1;
    let mut chosen = None;
    let mut tau = tau_min;
    while tau < tau_max {
        if dn[tau] < threshold {
            while tau + 1 < tau_max && dn[tau + 1] < dn[tau] {
                tau += 1;
            }
            chosen = Some(tau);
            break;
        }
        tau += 1;
    }
    let Some(tau) = chosen else {
        let best = dn[tau_min..].iter().copied().fold(f64::INFINITY, f64::min);
        return (0.0, (1.0 - best).clamp(0.0, 1.0));
    };
    let (y0, y1, y2) = (dn[tau - 1], dn[tau], dn[tau + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let shift = if denom.abs() > 1e-15 { (0.5 * (y0 - y2) / denom).clamp(-1.0, 1.0) } else { 0.0 };
    let period = tau as f64 + shift;
    let f0 = sample_rate / period;
    let confidence = (1.0 - y1).clamp(0.0, 1.0);
    if f0 < cfg.f0_min || f0 > cfg.f0_max {
        return (0.0, confidence.min(threshold));
    }
    (f0, confidence)
}

/// Frame-rate f0 and voicing confidence with the YIN estimator. Loudness is
/// left at the default floor; see [`super::extract_track`].
pub fn extract_pitch(clip: &AudioClip, cfg: &PitchConfig) -> Result<FeatureTrack, FeatureError> {
    if !(cfg.f0_min > 0.0 && cfg.f0_max > cfg.f0_min) || cfg.window == 0 {
        return Err(FeatureError::Config(format!(
            "pitch range [{}, {}] window {}",
            cfg.f0_min, cfg.f0_max, cfg.window
        )));
    }
    let hop = hop_length(clip.sample_rate(), cfg.frame_rate)?;
    if clip.len() < cfg.window {
        return Err(FeatureError::TooShort {
            len: clip.len(),
            window: cfg.window,
        });
    }
    let sr = clip.sample_rate() as f64;
    let frames = clip.len() / hop;
    let mut yin = Yin::new(cfg, sr);
    let seg_len = yin.segment_len();
    let mut seg = vec![0.0; seg_len];
    let mut f0 = Vec::with_capacity(frames);
    let mut confidence = Vec::with_capacity(frames);
    let x = clip.samples();
    for i in 0..frames {
        crate::dsp::centered_frame(x, i * hop, seg_len, &mut seg);
        let power = seg[..cfg.window].iter().map(|s| s * s).sum::<f64>() / cfg.window as f64;
        if power < cfg.silence_power {
            f0.push(0.0);
            confidence.push(0.0);
            continue;
        }
        let d = yin.difference(&seg);
        let dn = normalize(&d);
        let (f, c) = pick_period(&dn, yin.tau_min, cfg.threshold, sr, cfg);
        f0.push(f);
        confidence.push(c);
    }
    Ok(FeatureTrack {
        loudness: vec![super::loudness::DEFAULT_FLOOR_DB; frames],
        f0,
        confidence,
        frame_rate: cfg.frame_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sine(f: f64, secs: f64) -> AudioClip {
        let n = (16000.0 * secs) as usize;
        AudioClip::new((0..n).map(|i| 0.5 * (TAU * f * i as f64 / 16000.0).sin()).collect(), 16000).unwrap()
    }

    #[test]
    fn difference_function_matches_direct_sum() {
        let cfg = PitchConfig::default();
        let mut yin = Yin::new(&cfg, 16000.0);
        let seg: Vec<f64> = (0..yin.segment_len()).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let d = yin.difference(&seg);
        for tau in [0, 1, 17, 100, yin.tau_max] {
            let direct: f64 = (0..cfg.window).map(|j| (seg[j] - seg[j + tau]).powi(2)).sum();
            assert!((d[tau] - direct).abs() < 1e-8 * direct.max(1.0), "tau {tau}");
        }
    }

    #[test]
    fn tracks_a_sine() {
        let t = extract_pitch(&sine(220.0, 1.0), &PitchConfig::default()).unwrap();
        assert_eq!(t.len(), 250);
        for i in 10..240 {
            assert!((t.f0[i] - 220.0).abs() < 2.2, "frame {i}: {}", t.f0[i]);
            assert!(t.confidence[i] > 0.9);
        }
    }

    #[test]
    fn silence_is_unvoiced() {
        let t = extract_pitch(&AudioClip::silence(16000, 16000), &PitchConfig::default()).unwrap();
        assert!(t.f0.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn too_short() {
        let r = extract_pitch(&AudioClip::silence(500, 16000), &PitchConfig::default());
        assert!(matches!(r, Err(FeatureError::TooShort { .. })));
    }
}
