//! Tape-based reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Operations are evaluated eagerly and recorded on a [`Tape`]. A single
//! [`Tape::backward`] sweep from a scalar output yields [`Gradients`] for
//! every recorded node:
//!
//! ```
//! use ddsp_vocal::autodiff::{Tape, Tensor};
//!
//! let tape = Tape::new();
//! let x = tape.param(Tensor::scalar(3.0));
//! let y = x.mul(x).unwrap();
//! let grads = tape.backward(&y).unwrap();
//! assert_eq!(grads.wrt(&x).item(), 6.0);
//! ```
//!
//! Binary elementwise operations accept equal shapes, a scalar on either
//! side, or an operand whose shape is a trailing suffix of the other's
//! (broadcast over leading dimensions). Nothing else broadcasts.
//!
//! Besides the generic primitives the tape carries a few fused signal
//! operations (framing, real FFT, oscillator bank, per-frame convolution)
//! whose adjoints are written by hand; they keep the synthesizer and the
//! spectral loss affordable at audio rate.

mod tape;
mod tensor;

pub use tape::{Gradients, Tape, Var};
pub(crate) use tape::{harmonic_sines, upsample_linear, wrap_phase, ConvolveSpec};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("backward requires a scalar output, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("variable does not belong to this tape")]
    NotOnTape,
}
