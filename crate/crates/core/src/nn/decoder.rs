use rand_chacha::ChaCha8Rng;

use super::layers::{exp_sigmoid, plain, Dense, Gru, Mlp};
use super::NnError;
use crate::autodiff::{Tensor, Var};
use crate::synth::graph::ControlVars;
use crate::synth::SynthControls;

const STACK_DEPTH: usize = 2;

/// Per-input dense stacks → concatenation → GRU → dense → three heads.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams<T> {
    pub f0_stack: Mlp<T>,
    pub loudness_stack: Mlp<T>,
    pub latent_stack: Option<Mlp<T>>,
    pub gru: Gru<T>,
    pub trunk: Mlp<T>,
    pub amplitude_head: Dense<T>,
    pub harmonic_head: Dense<T>,
    pub noise_head: Dense<T>,
}

impl<T> DecoderParams<T> {
    pub fn visit<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> DecoderParams<U> {
        let p = |name: &str| format!("{prefix}.{name}");
        DecoderParams {
            f0_stack: self.f0_stack.visit(&p("f0"), f),
            loudness_stack: self.loudness_stack.visit(&p("loudness"), f),
            latent_stack: self.latent_stack.as_ref().map(|m| m.visit(&p("latent"), f)),
            gru: self.gru.visit(&p("gru"), f),
            trunk: self.trunk.visit(&p("trunk"), f),
            amplitude_head: self.amplitude_head.visit(&p("amplitude_head"), f),
            harmonic_head: self.harmonic_head.visit(&p("harmonic_head"), f),
            noise_head: self.noise_head.visit(&p("noise_head"), f),
        }
    }
}

impl DecoderParams<Tensor> {
    pub fn init(harmonics: usize, noise_bins: usize, hidden: usize, latent: Option<usize>, rng: &mut ChaCha8Rng) -> Self {
        let f0_stack = Mlp::init(1, hidden, STACK_DEPTH, rng);
        let loudness_stack = Mlp::init(1, hidden, STACK_DEPTH, rng);
        let latent_stack = latent.map(|l| Mlp::init(l, hidden, STACK_DEPTH, rng));
        let inputs = hidden * if latent.is_some() { 3 } else { 2 };
        Self {
            f0_stack,
            loudness_stack,
            latent_stack,
            gru: Gru::init(inputs, hidden, rng),
            trunk: Mlp::init(hidden, hidden, 1, rng),
            amplitude_head: Dense::init(hidden, 1, rng),
            harmonic_head: Dense::init(hidden, harmonics, rng),
            noise_head: Dense::init(hidden, noise_bins, rng),
        }
    }

    pub fn harmonics(&self) -> usize {
        self.harmonic_head.bias.len()
    }

    pub fn noise_bins(&self) -> usize {
        self.noise_head.bias.len()
    }

    pub fn latent_width(&self) -> Option<usize> {
        self.latent_stack.as_ref().map(|m| m.layers[0].dense.weight.shape()[0])
    }
}

fn check_frames(f0: usize, loudness: usize, z: Option<usize>) -> Result<(), NnError> {
    if f0 != loudness || z.is_some_and(|z| z != f0) {
        return Err(NnError::FrameMismatch(format!("f0 {f0}, loudness {loudness}, latent {z:?}")));
    }
    if f0 == 0 {
        return Err(NnError::FrameMismatch("no frames".into()));
    }
    Ok(())
}

/// Decoder on a tape. `f0` and `loudness` are normalized `[T, 1]`, `z` is `[T, L]`.
pub fn decoder_graph<'t>(
    params: &DecoderParams<Var<'t>>,
    f0: Var<'t>,
    loudness: Var<'t>,
    z: Option<Var<'t>>,
) -> Result<ControlVars<'t>, NnError> {
    check_frames(f0.shape()[0], loudness.shape()[0], z.map(|z| z.shape()[0]))?;
    let mut branches = vec![params.f0_stack.forward(f0)?, params.loudness_stack.forward(loudness)?];
    match (&params.latent_stack, z) {
        (Some(stack), Some(z)) => branches.push(stack.forward(z)?),
        (None, Some(_)) => return Err(NnError::UnexpectedLatent),
        (Some(_), None) => return Err(NnError::MissingLatent),
        (None, None) => {}
    }
    let h = params.gru.forward(Var::concat(&branches, 1)?)?;
    let h = params.trunk.forward(h)?;
    Ok(ControlVars {
        amplitude: exp_sigmoid(params.amplitude_head.forward(h)?)?,
        harmonics: params.harmonic_head.forward(h)?.softmax(),
        noise_mags: exp_sigmoid(params.noise_head.forward(h)?)?,
    })
}

/// Tape-free decoder evaluation on normalized inputs.
pub fn decoder_forward(
    params: &DecoderParams<Tensor>,
    f0: &[f64],
    loudness: &[f64],
    z: Option<&Tensor>,
    frame_rate: f64,
) -> Result<SynthControls, NnError> {
    let frames = f0.len();
    check_frames(frames, loudness.len(), z.map(|z| z.dims2().0))?;
    let mut branches = vec![plain::mlp(&params.f0_stack, f0, frames), plain::mlp(&params.loudness_stack, loudness, frames)];
    match (&params.latent_stack, z) {
        (Some(stack), Some(z)) => {
            let expected = params.latent_width().unwrap_or(0);
            if z.dims2().1 != expected {
                return Err(NnError::Width {
                    expected,
                    got: z.dims2().1,
                });
            }
            branches.push(plain::mlp(stack, z.data(), frames));
        }
        (None, Some(_)) => return Err(NnError::UnexpectedLatent),
        (Some(_), None) => return Err(NnError::MissingLatent),
        (None, None) => {}
    }
    let widths: Vec<usize> = branches.iter().map(|b| b.len() / frames).collect();
    let mut joined = Vec::with_capacity(frames * widths.iter().sum::<usize>());
    for t in 0..frames {
        for (b, w) in branches.iter().zip(&widths) {
            joined.extend_from_slice(&b[t * w..(t + 1) * w]);
        }
    }
    let h = plain::gru(&params.gru, &joined, frames);
    let h = plain::mlp(&params.trunk, &h, frames);

    let amplitude = plain::dense(&params.amplitude_head, &h, frames).into_iter().map(plain::exp_sigmoid).collect();
    let k = params.harmonics();
    let mut harmonics = plain::dense(&params.harmonic_head, &h, frames);
    plain::softmax_rows(&mut harmonics, k);
    let b = params.noise_bins();
    let noise: Vec<f64> = plain::dense(&params.noise_head, &h, frames).into_iter().map(plain::exp_sigmoid).collect();
    Ok(SynthControls {
        amplitude,
        harmonics: Tensor::matrix(frames, k, harmonics)?,
        noise_mags: Tensor::matrix(frames, b, noise)?,
        frame_rate,
    })
}
