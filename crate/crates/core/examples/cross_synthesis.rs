//! Impose a vocal's harmonic profile on a trained instrument model at
//! several interpolation factors.
//!
//! `cargo run --release --example cross_synthesis -- timbre.bin [voice.wav]`
//!
//! `p = 0` is the plain instrument resynthesis, `p = 1` uses the voice's
//! measured harmonic distribution outright.

use std::error::Error;

use ddsp_vocal::audio_io::{read_wav, resample, write_wav};
use ddsp_vocal::fixtures::vocal_like;
use ddsp_vocal::loss_train::{spectral_distance, LossConfig};
use ddsp_vocal::nn::ModelCheckpoint;
use ddsp_vocal::xsynth::{cross_synthesize, InterpolationFactor};

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let model = ModelCheckpoint::load(args.next().ok_or("usage: cross_synthesis timbre.bin [voice.wav]")?)?;
    let rate = model.arch.sample_rate;
    let voice = match args.next() {
        Some(path) => resample(&read_wav(path)?, rate),
        None => vocal_like(5, 2.0, rate),
    };

    let lcfg = LossConfig::default();
    let plain = cross_synthesize(&voice, &model, InterpolationFactor::new(0.0)?, 0)?;
    let reference = voice.clone().truncated(plain.len());
    println!("   p   to voice   to p=0");
    for p in [0.0, 0.25, 0.5, 0.7, 1.0] {
        let audio = cross_synthesize(&voice, &model, InterpolationFactor::new(p)?, 0)?;
        println!(
            "{p:4.2}   {:8.3}   {:6.3}",
            spectral_distance(&audio, &reference, &lcfg)?,
            spectral_distance(&audio, &plain, &lcfg)?
        );
        write_wav(&audio, format!("xsynth_p{:03}.wav", (p * 100.0).round() as u32))?;
    }
    Ok(())
}
