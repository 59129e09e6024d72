//! Inference pipelines: plain resynthesis through a trained decoder, and
//! cross-synthesis that blends the decoder's harmonic distribution with the
//! harmonics measured on the input.

use thiserror::Error;

use crate::audio_io::{resample, AudioClip};
use crate::autodiff::Tensor;
use crate::features::{extract_input_harmonics, extract_mfcc, extract_track, FeatureError, FeatureTrack, HarmonicConfig, MfccTrack};
use crate::loss_train::AnalysisConfig;
use crate::nn::{decoder_forward, encoder_forward, ModelCheckpoint, ModelKind, NnError};
use crate::synth::{active_harmonics, render, SynthControls, SynthError};

/// Default blend strength.
pub const DEFAULT_P: f64 = 0.7;

#[derive(Debug, Error)]
pub enum XsynthError {
    #[error("interpolation factor {0} outside [0, 1]")]
    Factor(f64),
    #[error("cross-synthesis needs a timbre checkpoint; this one is a latent model")]
    LatentCheckpoint,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] NnError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// Blend weight `p` in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct InterpolationFactor(f64);

impl InterpolationFactor {
    pub fn new(p: f64) -> Result<Self, XsynthError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(XsynthError::Factor(p))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for InterpolationFactor {
    fn default() -> Self {
        Self(DEFAULT_P)
    }
}

/// `A_out = (1 − p)·A_pred + p·A_in` where `k·f0 < f_s/2`, else 0. Rows are
/// not renormalized after masking. The endpoints return the masked inputs
/// exactly and interior values are clamped to lie between the two inputs.
pub fn interpolate_harmonics(
    a_pred: &Tensor,
    a_in: &Tensor,
    p: InterpolationFactor,
    f0: &[f64],
    sample_rate: f64,
) -> Result<Tensor, XsynthError> {
    if a_pred.rank() != 2 || a_pred.shape() != a_in.shape() || f0.len() != a_pred.shape()[0] {
        return Err(XsynthError::Shape(format!(
            "predicted {:?}, input {:?}, f0 {}",
            a_pred.shape(),
            a_in.shape(),
            f0.len()
        )));
    }
    let (frames, k) = a_pred.dims2();
    let p = p.value();
    let mut out = vec![0.0; frames * k];
    for i in 0..frames {
        let active = active_harmonics(f0[i], sample_rate, k);
        let (pr, ir) = (a_pred.row(i), a_in.row(i));
        for j in 0..active {
            let (a, b) = (pr[j], ir[j]);
            out[i * k + j] = if p == 0.0 {
                a
            } else if p == 1.0 {
                b
            } else {
                (a + p * (b - a)).clamp(a.min(b), a.max(b))
            };
        }
    }
    Ok(Tensor::matrix(frames, k, out).expect("blend shape"))
}

/// Input features at a model's rates.
#[derive(Clone, Debug)]
pub struct Analysis {
    /// The input resampled to the model rate.
    pub clip: AudioClip,
    pub track: FeatureTrack,
    pub mfcc: Option<MfccTrack>,
}

impl Analysis {
    /// f0 per frame with unvoiced frames held, as fed to the oscillators.
    pub fn synth_f0(&self) -> Vec<f64> {
        self.track.held_f0()
    }
}

pub fn analyze(input: &AudioClip, ckpt: &ModelCheckpoint, cfg: &AnalysisConfig) -> Result<Analysis, XsynthError> {
    let clip = resample(input, ckpt.arch.sample_rate);
    let track = extract_track(&clip, &cfg.pitch, &cfg.loudness)?;
    let mfcc = match ckpt.kind() {
        ModelKind::Latent => Some(extract_mfcc(&clip, &cfg.mfcc)?),
        ModelKind::Timbre => None,
    };
    Ok(Analysis { clip, track, mfcc })
}

/// Decoder controls for an analyzed input.
pub fn predict_controls(ckpt: &ModelCheckpoint, analysis: &Analysis) -> Result<SynthControls, XsynthError> {
    let norm = &ckpt.norm;
    let z = match (&ckpt.params.encoder, &analysis.mfcc) {
        (Some(enc), Some(m)) => Some(encoder_forward(enc, &norm.mfcc(m)?)?),
        (Some(_), None) => return Err(NnError::MissingLatent.into()),
        _ => None,
    };
    Ok(decoder_forward(
        &ckpt.params.decoder,
        &norm.f0(&analysis.synth_f0()),
        &norm.loudness(&analysis.track.loudness),
        z.as_ref(),
        analysis.track.frame_rate,
    )?)
}

/// Reconstruction (latent models) or timbre transfer (timbre models).
pub fn resynthesize(input: &AudioClip, ckpt: &ModelCheckpoint, seed: u64) -> Result<AudioClip, XsynthError> {
    resynthesize_with(input, ckpt, seed, &AnalysisConfig::for_model(&ckpt.arch))
}

pub fn resynthesize_with(input: &AudioClip, ckpt: &ModelCheckpoint, seed: u64, cfg: &AnalysisConfig) -> Result<AudioClip, XsynthError> {
    let analysis = analyze(input, ckpt, cfg)?;
    let controls = predict_controls(ckpt, &analysis)?;
    Ok(render(&analysis.synth_f0(), &controls, ckpt.arch.sample_rate, seed)?)
}

/// Timbre transfer with the harmonic distribution pulled toward the
/// input's own harmonics by `p`. Amplitude and noise controls pass through.
pub fn cross_synthesize(input: &AudioClip, ckpt: &ModelCheckpoint, p: InterpolationFactor, seed: u64) -> Result<AudioClip, XsynthError> {
    cross_synthesize_with(input, ckpt, p, seed, &AnalysisConfig::for_model(&ckpt.arch))
}

pub fn cross_synthesize_with(
    input: &AudioClip,
    ckpt: &ModelCheckpoint,
    p: InterpolationFactor,
    seed: u64,
    cfg: &AnalysisConfig,
) -> Result<AudioClip, XsynthError> {
    if ckpt.kind() == ModelKind::Latent {
        return Err(XsynthError::LatentCheckpoint);
    }
    let analysis = analyze(input, ckpt, cfg)?;
    let mut controls = predict_controls(ckpt, &analysis)?;
    let harmonic_cfg = HarmonicConfig {
        harmonics: ckpt.arch.harmonics,
        ..HarmonicConfig::default()
    };
    let measured = extract_input_harmonics(&analysis.clip, &analysis.track, &harmonic_cfg)?;
    let f0 = analysis.synth_f0();
    let fs = ckpt.arch.sample_rate as f64;
    controls.harmonics = interpolate_harmonics(&controls.harmonics, &measured.amplitudes, p, &f0, fs)?;
    Ok(render(&f0, &controls, ckpt.arch.sample_rate, seed)?)
}
