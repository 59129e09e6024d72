use rand_chacha::ChaCha8Rng;

use super::layers::{plain, Dense, Gru};
use super::NnError;
use crate::autodiff::{Tensor, Var};
use crate::features::MfccTrack;

/// GRU over MFCC frames followed by a linear projection to the latent width.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams<T> {
    pub gru: Gru<T>,
    pub projection: Dense<T>,
}

impl<T> EncoderParams<T> {
    pub fn visit<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> EncoderParams<U> {
        EncoderParams {
            gru: self.gru.visit(&format!("{prefix}.gru"), f),
            projection: self.projection.visit(&format!("{prefix}.projection"), f),
        }
    }
}

impl EncoderParams<Tensor> {
    pub fn init(n_mfcc: usize, hidden: usize, latent: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            gru: Gru::init(n_mfcc, hidden, rng),
            projection: Dense::init(hidden, latent, rng),
        }
    }

    pub fn input_width(&self) -> usize {
        self.gru.input_size()
    }

    pub fn latent_width(&self) -> usize {
        self.projection.bias.len()
    }
}

/// Encoder on a tape; `mfcc` is `[T, n_mfcc]`, the result `[T, latent]`.
pub fn encoder_graph<'t>(params: &EncoderParams<Var<'t>>, mfcc: Var<'t>) -> Result<Var<'t>, NnError> {
    let expected = params.gru.input_weight.shape()[0];
    let got = mfcc.shape().get(1).copied().unwrap_or(0);
    if got != expected {
        return Err(NnError::Width { expected, got });
    }
    Ok(params.projection.forward(params.gru.forward(mfcc)?)?)
}

/// Tape-free encoder evaluation. Coefficients are used as given; the
/// checkpoint's MFCC statistics are applied by the caller.
pub fn encoder_forward(params: &EncoderParams<Tensor>, mfcc: &MfccTrack) -> Result<Tensor, NnError> {
    if mfcc.width() != params.input_width() {
        return Err(NnError::Width {
            expected: params.input_width(),
            got: mfcc.width(),
        });
    }
    let frames = mfcc.frames();
    let h = plain::gru(&params.gru, mfcc.coefficients.data(), frames);
    let z = plain::dense(&params.projection, &h, frames);
    Ok(Tensor::matrix(frames, params.latent_width(), z)?)
}
