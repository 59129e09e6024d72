//! Finite-difference checks of the spectral loss through the synthesizer
//! and through whole models. Shared by the oracle tests and the acceptance
//! target.

use ddsp_vocal::autodiff::{Tape, Tensor, Var};
use ddsp_vocal::fixtures::vocal_like;
use ddsp_vocal::loss_train::{multiscale_spectral_loss, window_loss, AnalysisConfig, LossConfig, TrainingClip};
use ddsp_vocal::nn::{Architecture, ModelCheckpoint, ModelParams, Normalization};
use ddsp_vocal::synth::graph::{render_graph, ControlVars};

use super::{numeric_gradient, randoms, relative_error};

const SR: f64 = 16000.0;
const HOP: usize = 64;
const FRAMES: usize = 32;
/// The log-magnitude term is strongly curved where spectra are small, so
/// central differences need a short step to keep truncation error down.
const STEP: f64 = 1e-7;

/// Random small synthesizer instance: K = 8 harmonics, B = 17 noise bins,
/// 32 frames (2048 samples).
pub struct RenderCase {
    pub f0: Vec<f64>,
    pub amplitude: Tensor,
    pub harmonics: Tensor,
    pub noise: Tensor,
    pub target: Tensor,
}

impl RenderCase {
    pub fn new(seed: u64) -> Self {
        let (k, b) = (8, 17);
        let f0 = randoms(seed, FRAMES, 150.0, 450.0);
        let amplitude = Tensor::matrix(FRAMES, 1, randoms(seed + 1, FRAMES, 0.1, 0.6)).unwrap();
        let harmonics = Tensor::matrix(FRAMES, k, randoms(seed + 2, FRAMES * k, 0.0, 0.3)).unwrap();
        let noise = Tensor::matrix(FRAMES, b, randoms(seed + 3, FRAMES * b, 0.0, 0.05)).unwrap();
        let target = Tensor::vector(randoms(seed + 4, FRAMES * HOP, -0.3, 0.3));
        Self {
            f0,
            amplitude,
            harmonics,
            noise,
            target,
        }
    }

    /// Loss with the three controls supplied as tape variables.
    fn loss<'t>(&self, tape: &'t Tape, a: Var<'t>, h: Var<'t>, n: Var<'t>) -> Var<'t> {
        let controls = ControlVars {
            amplitude: a,
            harmonics: h,
            noise_mags: n,
        };
        let f0 = tape.constant(Tensor::vector(self.f0.clone()));
        let audio = render_graph(tape, f0, controls, SR, HOP, 11).unwrap();
        let target = tape.constant(self.target.clone());
        multiscale_spectral_loss(audio, target, &LossConfig::default()).unwrap()
    }

    fn value(&self, a: &Tensor, h: &Tensor, n: &Tensor) -> f64 {
        let tape = Tape::new();
        let v = self.loss(&tape, tape.constant(a.clone()), tape.constant(h.clone()), tape.constant(n.clone()));
        v.value().item()
    }

    /// Relative errors of the gradients w.r.t. amplitude, harmonic
    /// distribution and noise magnitudes.
    pub fn gradient_errors(&self) -> [f64; 3] {
        let tape = Tape::new();
        let (a, h, n) = (
            tape.param(self.amplitude.clone()),
            tape.param(self.harmonics.clone()),
            tape.param(self.noise.clone()),
        );
        let loss = self.loss(&tape, a, h, n);
        let g = tape.backward(&loss).unwrap();
        let na = numeric_gradient(&self.amplitude, STEP, |x| self.value(x, &self.harmonics, &self.noise));
        let nh = numeric_gradient(&self.harmonics, STEP, |x| self.value(&self.amplitude, x, &self.noise));
        let nn = numeric_gradient(&self.noise, STEP, |x| self.value(&self.amplitude, &self.harmonics, x));
        [
            relative_error(&g.wrt(&a), &na, 1e-8),
            relative_error(&g.wrt(&h), &nh, 1e-8),
            relative_error(&g.wrt(&n), &nn, 1e-8),
        ]
    }
}

/// Largest per-tensor relative error between taped and finite-difference
/// gradients of the training loss w.r.t. every model parameter. Parameters
/// are jittered away from initialization so no tensor has a zero gradient
/// by construction.
pub fn model_gradient_error(arch: Architecture, seed: u64) -> (f64, String) {
    let with_mfcc = arch.latent_width().is_some();
    let analysis = AnalysisConfig::for_model(&arch);
    let audio = vocal_like(seed, 0.5, arch.sample_rate);
    let clip = TrainingClip::analyze(&audio, &analysis, with_mfcc).unwrap();
    let mfccs: Vec<_> = clip.mfcc.iter().collect();
    let norm = Normalization::fit(&[&clip.track], &mfccs);
    let mut model = ModelCheckpoint::init(arch, norm, seed).unwrap();
    let flat: Vec<Tensor> = model
        .params
        .to_flat()
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let jitter = randoms(seed * 100 + i as u64, t.len(), -0.3, 0.3);
            let data = t.data().iter().zip(jitter).map(|(v, j)| v + j).collect();
            Tensor::new(t.shape().to_vec(), data).unwrap()
        })
        .collect();
    model.params = model.params.with_flat(flat.clone());
    let start = 40;
    let lcfg = LossConfig::default();

    let tape = Tape::new();
    let bound = model.params.bind(&tape);
    let loss = window_loss(&tape, &bound, &model, &clip, start, FRAMES, 5, &lcfg).unwrap();
    let g = tape.backward(&loss).unwrap();
    let analytic = bound.visit(&mut |_, v| g.wrt(v)).to_flat();

    let value = |params: &ModelParams<Tensor>| {
        let tape = Tape::new();
        let bound = params.bind(&tape);
        window_loss(&tape, &bound, &model, &clip, start, FRAMES, 5, &lcfg).unwrap().value().item()
    };
    let names = model.params.names();
    let mut worst = (0.0, String::new());
    for (i, tensor) in flat.iter().enumerate() {
        let numeric = numeric_gradient(tensor, STEP, |x| {
            let mut probe = flat.clone();
            probe[i] = x.clone();
            value(&model.params.with_flat(probe))
        });
        let err = relative_error(&analytic[i], &numeric, 1e-8);
        if err > worst.0 {
            worst = (err, names[i].clone());
        }
    }
    worst
}
