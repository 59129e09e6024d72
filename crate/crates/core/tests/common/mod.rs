//! Oracles shared by the integration tests. Everything here is computed
//! directly from definitions, independently of the library's fast paths.
#![allow(dead_code)]

use std::f64::consts::TAU;

use ddsp_vocal::autodiff::{Tape, Tensor, Var};

pub mod features;
pub mod gradients;

/// Central finite differences of a scalar function of one tensor.
pub fn numeric_gradient(x: &Tensor, h: f64, f: impl Fn(&Tensor) -> f64) -> Tensor {
    let mut g = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe);
        probe.data_mut()[i] = orig - h;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        g.data_mut()[i] = (up - down) / (2.0 * h);
    }
    g
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn relative_error(a: &Tensor, b: &Tensor, floor: f64) -> f64 {
    let diff: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(floor)
}

/// Largest entrywise `|a − b| / max(|a|, |b|, floor)`.
pub fn max_entry_error(a: &Tensor, b: &Tensor, floor: f64) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Pins a closure to the higher-ranked signature the helpers expect.
pub fn graph<F>(f: F) -> F
where
    F: for<'t> Fn(Var<'t>) -> Var<'t>,
{
    f
}

/// Analytic gradient of `f` at `x` via the tape.
pub fn tape_gradient(x: &Tensor, f: impl for<'t> Fn(Var<'t>) -> Var<'t>) -> (f64, Tensor) {
    let tape = Tape::new();
    let v = tape.param(x.clone());
    let y = f(v);
    let g = tape.backward(&y).unwrap();
    (y.value().item(), g.wrt(&v))
}

/// Value of the same function without recording gradients.
pub fn tape_value(x: &Tensor, f: impl for<'t> Fn(Var<'t>) -> Var<'t>) -> f64 {
    let tape = Tape::new();
    f(tape.constant(x.clone())).value().item()
}

/// Checks the taped gradient of `f` against finite differences.
pub fn check_gradient(x: &Tensor, h: f64, f: impl for<'t> Fn(Var<'t>) -> Var<'t> + Copy) -> f64 {
    let (_, analytic) = tape_gradient(x, f);
    let numeric = numeric_gradient(x, h, |p| tape_value(p, f));
    relative_error(&analytic, &numeric, 1e-8)
}

/// Magnitudes of the plain DFT, bins 0..=n/2, normalized so a sinusoid of
/// amplitude `a` that completes an integer number of cycles reads `a`.
pub fn dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let cos: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64).cos()).collect();
    let sin: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64).sin()).collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &v) in x.iter().enumerate() {
                let j = (k * i) % n;
                re += v * cos[j];
                im -= v * sin[j];
            }
            let scale = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            scale * (re * re + im * im).sqrt() / n as f64
        })
        .collect()
}

/// Single-bin DFT power `|X(f)|²` at an arbitrary frequency.
pub fn goertzel_power(x: &[f64], freq: f64, sample_rate: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let w = TAU * freq * i as f64 / sample_rate;
        re += v * w.cos();
        im -= v * w.sin();
    }
    re * re + im * im
}

/// Deterministic pseudo-random values in `[lo, hi)` (xorshift), so oracles
/// do not depend on the library's generators.
pub fn randoms(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            lo + (hi - lo) * ((s >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}
