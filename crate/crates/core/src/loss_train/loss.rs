use rustfft::FftPlanner;

use super::TrainError;
use crate::audio_io::AudioClip;
use crate::autodiff::{Tape, Tensor, Var};
use crate::dsp::hann_periodic;

/// Multi-resolution spectrogram comparison settings.
#[derive(Clone, Debug, PartialEq)]
pub struct LossConfig {
    pub fft_sizes: Vec<usize>,
    /// Fraction of each window shared with the next one.
    pub overlap: f64,
    /// Weight of the log-magnitude term.
    pub log_weight: f64,
    /// Offset inside the logarithm.
    pub eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            fft_sizes: vec![2048, 1024, 512, 256, 128, 64],
            overlap: 0.75,
            log_weight: 1.0,
            eps: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.fft_sizes.is_empty() {
            return Err(TrainError::Config("fft_sizes must not be empty".into()));
        }
        if let Some(n) = self.fft_sizes.iter().find(|&&n| n < 64 || !n.is_power_of_two()) {
            return Err(TrainError::Config(format!("fft size {n} is not a power of two >= 64")));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(TrainError::Config(format!("overlap {} outside [0, 1)", self.overlap)));
        }
        if !(self.log_weight >= 0.0) || !(self.eps > 0.0) {
            return Err(TrainError::Config("log weight must be >= 0 and eps > 0".into()));
        }
        Ok(())
    }

    pub fn hop(&self, n: usize) -> usize {
        ((n as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }
}

/// Frames needed to cover `len` samples; the tail is zero-padded, and a
/// signal shorter than the window still gets one frame.
fn frame_count(len: usize, n: usize, hop: usize) -> usize {
    if len <= n {
        1
    } else {
        1 + (len - n).div_ceil(hop)
    }
}

/// `[frames, n/2 + 1]` Hann-windowed STFT magnitudes of a rank-1 signal.
fn magnitudes<'t>(x: Var<'t>, n: usize, hop: usize, planner: &mut FftPlanner<f64>) -> Result<Var<'t>, TrainError> {
    let frames = frame_count(x.shape()[0], n, hop);
    let window = x.tape().constant(Tensor::vector(hann_periodic(n)));
    Ok(x.frame(n, hop, frames)?.mul(window)?.rfft(planner)?.complex_abs()?)
}

/// Σ over FFT sizes of `mean|S_p − S_t| + w · mean|log(S_p + ε) − log(S_t + ε)|`
/// on the tape. Both inputs are rank-1 signals of equal length.
pub fn multiscale_spectral_loss<'t>(pred: Var<'t>, target: Var<'t>, cfg: &LossConfig) -> Result<Var<'t>, TrainError> {
    cfg.validate()?;
    let (lp, lt) = (pred.shape(), target.shape());
    if lp.len() != 1 || lp != lt {
        return Err(TrainError::LengthMismatch { pred: lp, target: lt });
    }
    let mut planner = FftPlanner::new();
    let mut total: Option<Var<'t>> = None;
    for &n in &cfg.fft_sizes {
        let hop = cfg.hop(n);
        let sp = magnitudes(pred, n, hop, &mut planner)?;
        let st = magnitudes(target, n, hop, &mut planner)?;
        let mut term = sp.sub(st)?.abs().mean();
        if cfg.log_weight > 0.0 {
            let log_p = sp.add_scalar(cfg.eps).log()?;
            let log_t = st.add_scalar(cfg.eps).log()?;
            term = term.add(log_p.sub(log_t)?.abs().mean().scale(cfg.log_weight))?;
        }
        total = Some(match total {
            Some(t) => t.add(term)?,
            None => term,
        });
    }
    Ok(total.expect("non-empty fft sizes"))
}

/// The same loss as a plain number.
pub fn spectral_distance(pred: &AudioClip, target: &AudioClip, cfg: &LossConfig) -> Result<f64, TrainError> {
    if pred.sample_rate() != target.sample_rate() {
        return Err(TrainError::Config(format!(
            "sample rates differ: {} vs {}",
            pred.sample_rate(),
            target.sample_rate()
        )));
    }
    let tape = Tape::new();
    let p = tape.constant(Tensor::vector(pred.samples().to_vec()));
    let t = tape.constant(Tensor::vector(target.samples().to_vec()));
    Ok(multiscale_spectral_loss(p, t, cfg)?.value().item())
}
