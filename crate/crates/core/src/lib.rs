//! Differentiable harmonic-plus-noise synthesis with vocal effects.
//!
//! The crate covers the whole loop: WAV I/O and resampling ([`audio_io`]),
//! pitch/loudness/MFCC analysis ([`features`]), a small reverse-mode
//! autodiff engine ([`autodiff`]), decoder and encoder networks ([`nn`]),
//! the oscillator bank and filtered-noise synthesizers ([`synth`]),
//! multi-resolution spectral training ([`loss_train`]) and the
//! harmonic-blending cross-synthesis effect ([`xsynth`]).

pub mod audio_io;
pub mod autodiff;
mod binio;
pub mod dsp;
pub mod features;
pub mod nn;
pub mod synth;
pub mod config;
pub mod fixtures;
pub mod loss_train;
pub mod xsynth;
pub mod cli;
