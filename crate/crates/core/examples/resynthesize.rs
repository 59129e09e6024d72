//! Re-render a vocal clip through a trained model.
//!
//! `cargo run --release --example resynthesize -- model.bin [input.wav] [out.wav]`

use std::error::Error;

use ddsp_vocal::audio_io::{read_wav, resample, write_wav};
use ddsp_vocal::fixtures::vocal_like;
use ddsp_vocal::loss_train::{spectral_distance, LossConfig};
use ddsp_vocal::nn::ModelCheckpoint;
use ddsp_vocal::xsynth::resynthesize;

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let model = ModelCheckpoint::load(args.next().ok_or("usage: resynthesize model.bin [input.wav] [out.wav]")?)?;
    let rate = model.arch.sample_rate;
    let input = match args.next() {
        Some(path) => resample(&read_wav(path)?, rate),
        None => vocal_like(7, 2.0, rate),
    };
    let out = args.next().unwrap_or_else(|| "resynth.wav".into());

    let audio = resynthesize(&input, &model, 0)?;
    let reference = input.clone().truncated(audio.len());
    println!("{} model at step {}", model.kind().name(), model.step);
    println!("spectral distance to input: {:.3}", spectral_distance(&audio, &reference, &LossConfig::default())?);
    write_wav(&audio, &out)?;
    println!("wrote {out}");
    Ok(())
}
