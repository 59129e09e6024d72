use std::f64::consts::PI;

use super::AudioClip;
use crate::dsp::bessel_i0;

/// Taps on each side of the interpolation point.
const HALF_TAPS: usize = 32;
const KAISER_BETA: f64 = 8.0;
/// Passband edge as a fraction of the lower Nyquist frequency.
const CUTOFF: f64 = 0.94;
/// Above this many phases the kernel is evaluated directly instead of tabulated.
const MAX_TABLE_PHASES: usize = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

struct Kernel {
    /// Cutoff relative to the source Nyquist (1.0 = no anti-aliasing needed).
    cutoff: f64,
    i0_beta: f64,
}

impl Kernel {
    fn new(ratio: f64) -> Self {
        Self {
            cutoff: CUTOFF * ratio.min(1.0),
            i0_beta: bessel_i0(KAISER_BETA),
        }
    }

    /// Kernel value at offset `x` source samples from the interpolation point.
    fn eval(&self, x: f64) -> f64 {
        let r = x / HALF_TAPS as f64;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / self.i0_beta;
        let arg = PI * self.cutoff * x;
        let sinc = if arg.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
        self.cutoff * sinc * window
    }

    /// Taps for an interpolation point `frac` in `[0, 1)` past source index
    /// `base`; tap `j` multiplies source sample `base + j - HALF_TAPS + 1`.
    fn taps(&self, frac: f64) -> [f64; 2 * HALF_TAPS] {
        let mut t = [0.0; 2 * HALF_TAPS];
        for (j, tj) in t.iter_mut().enumerate() {
            let pos = j as f64 - (HALF_TAPS as f64 - 1.0);
            *tj = self.eval(pos - frac);
        }
        t
    }
}

/// Band-limited conversion to `target_rate` with a Kaiser-windowed sinc
/// (32 taps per side). The rate ratio is reduced to `up / down` and each of
/// the `up` polyphase branches is tabulated once.
pub fn resample(clip: &AudioClip, target_rate: u32) -> AudioClip {
    assert!(target_rate > 0, "target rate must be positive");
    let source_rate = clip.sample_rate();
    if target_rate == source_rate {
        return clip.clone();
    }
    let g = gcd(source_rate as u64, target_rate as u64);
    let (up, down) = ((target_rate as u64 / g) as usize, (source_rate as u64 / g) as usize);
    let kernel = Kernel::new(target_rate as f64 / source_rate as f64);
    let out_len = (clip.len() as f64 * target_rate as f64 / source_rate as f64).round() as usize;
    let x = clip.samples();
    let table: Option<Vec<[f64; 2 * HALF_TAPS]>> =
        (up <= MAX_TABLE_PHASES).then(|| (0..up).map(|p| kernel.taps(p as f64 / up as f64)).collect());

    let mut out = Vec::with_capacity(out_len);
    for m in 0..out_len {
        // Output m sits at source position m * down / up.
        let num = m * down;
        let base = num / up;
        let phase = num % up;
        let direct;
        let taps = match &table {
            Some(t) => &t[phase],
            None => {
                direct = kernel.taps(phase as f64 / up as f64);
                &direct
            }
        };
        let first = base as isize - HALF_TAPS as isize + 1;
        let mut acc = 0.0;
        for (j, &w) in taps.iter().enumerate() {
            let idx = first + j as isize;
            if idx >= 0 && (idx as usize) < x.len() {
                acc += w * x[idx as usize];
            }
        }
        out.push(acc);
    }
    AudioClip::new(out, target_rate).expect("finite resampled output")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_bit_exact() {
        let clip = AudioClip::new(vec![0.1, -0.3, 0.7], 22050).unwrap();
        assert_eq!(resample(&clip, 22050), clip);
    }

    #[test]
    fn output_length_rounds() {
        let clip = AudioClip::silence(1000, 44100);
        assert_eq!(resample(&clip, 16000).len(), 363);
        let clip = AudioClip::silence(48000 * 4, 48000);
        assert_eq!(resample(&clip, 16000).len(), 64000);
    }

    #[test]
    fn dc_gain_is_unity() {
        let clip = AudioClip::new(vec![0.5; 4800], 48000).unwrap();
        let out = resample(&clip, 16000);
        for &s in &out.samples()[100..1500] {
            assert!((s - 0.5).abs() < 1e-3, "{s}");
        }
    }
}
