//! Print the architecture, normalization and parameter tensors of a checkpoint.
//!
//! `cargo run --example inspect_checkpoint -- model.bin`
//! Without an argument a freshly initialized latent model is shown.

use std::error::Error;

use ddsp_vocal::nn::{Architecture, ModelCheckpoint, Normalization};

fn main() -> Result<(), Box<dyn Error>> {
    let model = match std::env::args().nth(1) {
        Some(path) => ModelCheckpoint::load(path)?,
        None => ModelCheckpoint::init(Architecture::latent(64, 65, 32, 16, 32, 30), Normalization::default(), 0)?,
    };
    let a = &model.arch;
    println!("kind: {}", model.kind().name());
    println!("step: {}  seed: {}", model.step, model.seed);
    println!("rates: {} Hz audio, {} Hz frames (hop {})", a.sample_rate, a.frame_rate, a.hop());
    println!("harmonics: {}  noise bins: {}  hidden: {}", a.harmonics, a.noise_bins, a.hidden);
    if let Some(z) = a.latent_width() {
        println!("latent: {z}  encoder hidden: {}  mfcc: {}", a.encoder_hidden, a.n_mfcc);
    }
    let n = &model.norm;
    println!("loudness norm: mean {:.2} dB, std {:.2} dB", n.loudness_mean, n.loudness_std);

    let mut rows = Vec::new();
    model.params.visit(&mut |name, t| rows.push((name.to_string(), t.shape().to_vec(), t.len())));
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    for (name, shape, _) in &rows {
        println!("  {name:width$}  {shape:?}");
    }
    println!("parameters: {}", model.params.parameter_count());
    Ok(())
}
