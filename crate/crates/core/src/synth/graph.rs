//! Synthesizers recorded on an autodiff tape.

use std::f64::consts::TAU;
use std::rc::Rc;

use super::{active_harmonics, check_f0, fir_from_magnitudes, noise_segments, SynthError};
use crate::autodiff::{ConvolveSpec, Tape, Tensor, Var};

/// Frame-rate control variables, as produced by the decoder graph.
#[derive(Clone, Copy, Debug)]
pub struct ControlVars<'t> {
    /// `[frames, 1]`
    pub amplitude: Var<'t>,
    /// `[frames, K]`
    pub harmonics: Var<'t>,
    /// `[frames, B]`
    pub noise_mags: Var<'t>,
}

fn frame_count(v: &Var<'_>) -> usize {
    v.value().shape().first().copied().unwrap_or(0)
}

/// Oscillator bank on the tape. `f0` is `[frames]`, `amplitude`
/// `[frames, 1]`, `harmonics` `[frames, K]`; the result has
/// `frames * hop` samples.
pub fn harmonic_graph<'t>(
    tape: &'t Tape,
    f0: Var<'t>,
    amplitude: Var<'t>,
    harmonics: Var<'t>,
    sample_rate: f64,
    hop: usize,
) -> Result<Var<'t>, SynthError> {
    let f0_values = f0.value();
    check_f0(f0_values.data())?;
    let frames = f0_values.len();
    let (hf, k) = harmonics.value().dims2();
    if hf != frames || frame_count(&amplitude) != frames || amplitude.value().len() != frames {
        return Err(SynthError::FrameMismatch(format!(
            "f0 {frames}, amplitude {:?}, harmonics {:?}",
            amplitude.shape(),
            harmonics.shape()
        )));
    }

    let mut mask = vec![1.0; frames * k];
    for (i, &f) in f0_values.data().iter().enumerate() {
        let active = active_harmonics(f, sample_rate, k);
        mask[i * k + active..(i + 1) * k].iter_mut().for_each(|m| *m = 0.0);
    }
    let mask = tape.constant(Tensor::matrix(frames, k, mask).expect("mask shape"));

    let f0_up = f0.upsample(hop)?;
    let active: Vec<u16> = f0_up
        .value()
        .data()
        .iter()
        .map(|&f| active_harmonics(f, sample_rate, k).min(u16::MAX as usize) as u16)
        .collect();
    let phase = f0_up.scale(TAU / sample_rate).cumsum().wrap_phase();
    let amps = harmonics.mul(mask)?.upsample(hop)?;
    let bank = amps.harmonic_bank(phase, Rc::new(active))?;
    let gain = amplitude.reshape(vec![frames])?.upsample(hop)?;
    Ok(bank.mul(gain)?)
}

/// Filtered-noise synthesizer on the tape; `noise_mags` is `[frames, B]`.
pub fn noise_graph<'t>(tape: &'t Tape, noise_mags: Var<'t>, hop: usize, seed: u64) -> Result<Var<'t>, SynthError> {
    let (frames, bins) = noise_mags.value().dims2();
    let fir = fir_from_magnitudes(bins)?;
    let taps = fir.shape()[0];
    // [B, taps] so that mags · firᵀ gives one impulse response per row.
    let mut fir_t = vec![0.0; bins * taps];
    for t in 0..taps {
        for b in 0..bins {
            fir_t[b * taps + t] = fir.data()[t * bins + b];
        }
    }
    let fir_t = tape.constant(Tensor::matrix(bins, taps, fir_t).expect("fir shape"));
    let ir = noise_mags.matmul(fir_t)?;
    let spec = ConvolveSpec {
        segments: noise_segments(seed, frames, hop),
        segment_len: 2 * hop,
        hop,
        out_len: frames * hop,
    };
    Ok(ir.frame_convolve(Rc::new(spec))?)
}

/// Harmonic plus noise on the tape.
pub fn render_graph<'t>(
    tape: &'t Tape,
    f0: Var<'t>,
    controls: ControlVars<'t>,
    sample_rate: f64,
    hop: usize,
    seed: u64,
) -> Result<Var<'t>, SynthError> {
    let h = harmonic_graph(tape, f0, controls.amplitude, controls.harmonics, sample_rate, hop)?;
    let n = noise_graph(tape, controls.noise_mags, hop, seed)?;
    Ok(h.add(n)?)
}
