use super::{hop_length, FeatureError, DEFAULT_FRAME_RATE};
use crate::audio_io::AudioClip;
use crate::autodiff::Tensor;
use crate::dsp::{centered_frame, dct2_ortho, hann_periodic, mel_filterbank, RealSpectrum};

#[derive(Clone, Debug, PartialEq)]
pub struct MfccConfig {
    pub frame_rate: f64,
    pub n_fft: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    /// Mel energies are clamped here before the log.
    pub energy_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_rate: DEFAULT_FRAME_RATE,
            n_fft: 1024,
            n_mels: 128,
            n_mfcc: 30,
            energy_floor: 1e-10,
        }
    }
}

/// Per-frame cepstral coefficients, `[frames, n_mfcc]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MfccTrack {
    pub coefficients: Tensor,
    pub frame_rate: f64,
}

impl MfccTrack {
    pub fn frames(&self) -> usize {
        self.coefficients.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.coefficients.shape()[1]
    }

    pub fn window(&self, start: usize, len: usize) -> Self {
        let w = self.width();
        let data = self.coefficients.data()[start * w..(start + len) * w].to_vec();
        Self {
            coefficients: Tensor::matrix(len, w, data).expect("window shape"),
            frame_rate: self.frame_rate,
        }
    }
}

/// Power spectrum → triangular mel energies → natural log → orthonormal
/// DCT-II, keeping the first `n_mfcc` coefficients.
pub fn extract_mfcc(clip: &AudioClip, cfg: &MfccConfig) -> Result<MfccTrack, FeatureError> {
    if cfg.n_mfcc == 0 || cfg.n_mfcc > cfg.n_mels {
        return Err(FeatureError::Config(format!(
            "n_mfcc {} must be in 1..={}",
            cfg.n_mfcc, cfg.n_mels
        )));
    }
    let hop = hop_length(clip.sample_rate(), cfg.frame_rate)?;
    let n = cfg.n_fft;
    let window = hann_periodic(n);
    let bank = mel_filterbank(cfg.n_mels, n, clip.sample_rate() as f64);
    let mut spectrum = RealSpectrum::new(n);
    let frames = clip.len() / hop;
    let mut frame = vec![0.0; n];
    let mut power = vec![0.0; spectrum.bins()];
    let mut data = Vec::with_capacity(frames * cfg.n_mfcc);
    for i in 0..frames {
        centered_frame(clip.samples(), i * hop, n, &mut frame);
        frame.iter_mut().zip(&window).for_each(|(x, w)| *x *= w);
        spectrum.powers(&frame, &mut power);
        let log_mel: Vec<f64> = bank
            .iter()
            .map(|filter| {
                let e: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(cfg.energy_floor).ln()
            })
            .collect();
        data.extend(dct2_ortho(&log_mel, cfg.n_mfcc));
    }
    Ok(MfccTrack {
        coefficients: Tensor::matrix(frames, cfg.n_mfcc, data).expect("mfcc shape"),
        frame_rate: cfg.frame_rate,
    })
}
