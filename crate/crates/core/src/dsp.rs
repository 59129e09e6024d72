//! Shared signal-processing helpers: windows, spectra, mel scale, DCT.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Periodic Hann window (sums to one at 50% overlap).
pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Symmetric Hann window (zero at both ends).
pub fn hann_symmetric(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Copies `n` samples centered on `center`, zero-padding outside the signal.
pub fn centered_frame(x: &[f64], center: usize, n: usize, out: &mut [f64]) {
    let start = center as isize - (n / 2) as isize;
    for (j, o) in out.iter_mut().enumerate().take(n) {
        let idx = start + j as isize;
        *o = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] } else { 0.0 };
    }
}

/// Reusable forward FFT of real frames.
pub struct RealSpectrum {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl RealSpectrum {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n);
        let scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Self {
            n,
            fft,
            buf: vec![Complex::new(0.0, 0.0); n],
            scratch,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bins(&self) -> usize {
        self.n / 2 + 1
    }

    /// One-sided spectrum of `frame` (length `n`).
    pub fn transform(&mut self, frame: &[f64]) -> &[Complex<f64>] {
        for (b, &x) in self.buf.iter_mut().zip(frame) {
            *b = Complex::new(x, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        &self.buf[..self.n / 2 + 1]
    }

    pub fn magnitudes(&mut self, frame: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.transform(frame)) {
            *o = c.norm();
        }
    }

    pub fn powers(&mut self, frame: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.transform(frame)) {
            *o = c.norm_sqr();
        }
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank on the HTK mel scale spanning 0 Hz to Nyquist,
/// as a `[n_mels][n_fft/2 + 1]` weight matrix with unit peak height.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: f64) -> Vec<Vec<f64>> {
    let bins = n_fft / 2 + 1;
    let top = hz_to_mel(sample_rate / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|b| {
                    let f = b as f64 * sample_rate / n_fft as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II of `x`, keeping the first `keep` coefficients.
pub fn dct2_ortho(x: &[f64], keep: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..keep)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                .sum();
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            s * scale
        })
        .collect()
}

/// A-weighting gain in dB (IEC 61672), normalized to 0 dB at 1 kHz.
pub fn a_weighting_db(f: f64) -> f64 {
    if f <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let f2 = f * f;
    let num = 12194.0f64.powi(2) * f2 * f2;
    let den = (f2 + 20.6f64.powi(2))
        * ((f2 + 107.7f64.powi(2)) * (f2 + 737.9f64.powi(2))).sqrt()
        * (f2 + 12194.0f64.powi(2));
    20.0 * (num / den).log10() + 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_weighting_reference_points() {
        assert!(a_weighting_db(1000.0).abs() < 0.01);
        assert!((a_weighting_db(100.0) + 19.1).abs() < 0.1);
        assert!((a_weighting_db(10000.0) + 2.5).abs() < 0.1);
    }

    #[test]
    fn hann_periodic_overlap_adds_to_one() {
        let w = hann_periodic(128);
        for i in 0..64 {
            assert!((w[i] + w[i + 64] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mel_round_trip() {
        for f in [0.0, 100.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn dct_of_constant_has_only_dc() {
        let c = dct2_ortho(&[2.0; 8], 4);
        assert!((c[0] - 2.0 * 8f64.sqrt()).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn i0_known_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.2660658777520082).abs() < 1e-12);
    }
}
