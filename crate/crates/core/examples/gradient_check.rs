//! Compare reverse-mode gradients of the spectral loss through the
//! synthesizer with central finite differences.
//!
//! `cargo run --release --example gradient_check`

use std::error::Error;

use ddsp_vocal::autodiff::{Tape, Tensor};
use ddsp_vocal::fixtures::vocal_like;
use ddsp_vocal::loss_train::{multiscale_spectral_loss, LossConfig};
use ddsp_vocal::synth::graph::{render_graph, ControlVars};

const SR: u32 = 16000;
const HOP: usize = 64;
const FRAMES: usize = 16;
const K: usize = 6;
const B: usize = 9;

struct Controls {
    amplitude: Tensor,
    harmonics: Tensor,
    noise: Tensor,
}

fn loss(c: &Controls, f0: &Tensor, target: &Tensor, cfg: &LossConfig) -> Result<(f64, [Tensor; 3]), Box<dyn Error>> {
    let tape = Tape::new();
    let controls = ControlVars {
        amplitude: tape.param(c.amplitude.clone()),
        harmonics: tape.param(c.harmonics.clone()),
        noise_mags: tape.param(c.noise.clone()),
    };
    let (a, h, n) = (controls.amplitude, controls.harmonics, controls.noise_mags);
    let audio = render_graph(&tape, tape.constant(f0.clone()), controls, SR as f64, HOP, 3)?;
    let l = multiscale_spectral_loss(audio, tape.constant(target.clone()), cfg)?;
    let grads = tape.backward(&l)?;
    Ok((l.value().item(), [grads.wrt(&a), grads.wrt(&h), grads.wrt(&n)]))
}

fn entry(c: &mut Controls, which: usize, i: usize) -> &mut f64 {
    let t = match which {
        0 => &mut c.amplitude,
        1 => &mut c.harmonics,
        _ => &mut c.noise,
    };
    &mut t.data_mut()[i]
}

fn main() -> Result<(), Box<dyn Error>> {
    let cfg = LossConfig {
        fft_sizes: vec![256, 128, 64],
        ..LossConfig::default()
    };
    let target = Tensor::vector(vocal_like(1, (FRAMES * HOP) as f64 / SR as f64, SR).into_samples());
    let f0 = Tensor::vector((0..FRAMES).map(|i| 180.0 + 4.0 * i as f64).collect());
    let mut c = Controls {
        amplitude: Tensor::matrix(FRAMES, 1, (0..FRAMES).map(|i| 0.2 + 0.01 * i as f64).collect())?,
        harmonics: Tensor::matrix(FRAMES, K, (0..FRAMES * K).map(|i| 1.0 / (1 + i % K) as f64).collect())?,
        noise: Tensor::matrix(FRAMES, B, (0..FRAMES * B).map(|i| 0.01 + 0.001 * (i % B) as f64).collect())?,
    };
    let (value, analytic) = loss(&c, &f0, &target, &cfg)?;
    println!("loss {value:.6}");

    let h = 1e-6;
    for (which, name) in ["amplitude", "harmonics", "noise magnitudes"].iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in (0..analytic[which].len()).step_by(7) {
            let x = *entry(&mut c, which, i);
            *entry(&mut c, which, i) = x + h;
            let up = loss(&c, &f0, &target, &cfg)?.0;
            *entry(&mut c, which, i) = x - h;
            let down = loss(&c, &f0, &target, &cfg)?.0;
            *entry(&mut c, which, i) = x;
            let numeric = (up - down) / (2.0 * h);
            let exact = analytic[which].data()[i];
            worst = worst.max((exact - numeric).abs() / exact.abs().max(numeric.abs()).max(1e-8));
        }
        println!("{name:17} worst relative error {worst:.2e}");
    }
    Ok(())
}
