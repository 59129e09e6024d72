//! Latent-model training on a vocal/instrument mixture, reporting how far
//! each checkpoint's rendering of an unseen vocal clip is from the last one.
//!
//! `cargo run --release --example sweet_spot -- [learning_rate] [breath] [batch] [out_dir]`
//!
//! Early checkpoints carry the instrument timbre over the vocal's pitch and
//! loudness; later ones drift toward reconstructing the voice itself.

use std::error::Error;
use std::path::PathBuf;

use ddsp_vocal::audio_io::{write_wav, AudioClip};
use ddsp_vocal::fixtures::{brass_like, synth_like, vocal_like_with_breath};
use ddsp_vocal::loss_train::{
    mix_datasets, spectral_distance, train, AdamConfig, AnalysisConfig, Dataset, LossConfig, TrainConfig,
    TrainingClip,
};
use ddsp_vocal::nn::Architecture;
use ddsp_vocal::xsynth::resynthesize;

const SR: u32 = 16000;

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let learning_rate: f64 = args.next().map_or(Ok(1e-3), |s| s.parse())?;
    let breath: f64 = args.next().map_or(Ok(0.0), |s| s.parse())?;
    let batch_size: usize = args.next().map_or(Ok(2), |s| s.parse())?;
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| "sweet_spot".into()));
    std::fs::create_dir_all(&out_dir)?;

    let arch = Architecture::latent(64, 65, 32, 16, 32, 30);
    let analysis = AnalysisConfig::for_model(&arch);
    let analyze = |clip: AudioClip| TrainingClip::analyze(&clip, &analysis, true);
    let vocal = Dataset::new((10..14).map(|s| analyze(vocal_like_with_breath(s, 4.0, SR, breath))).collect::<Result<_, _>>()?)?;
    let instrument = Dataset::new(vec![
        analyze(brass_like(20, 4.0, SR))?,
        analyze(synth_like(21, 4.0, SR))?,
        analyze(brass_like(22, 4.0, SR))?,
        analyze(synth_like(23, 4.0, SR))?,
    ])?;
    let data = mix_datasets(vocal, instrument, 0.5)?;

    let tcfg = TrainConfig {
        batch_size,
        steps: 2000,
        checkpoint_every: 250,
        adam: AdamConfig {
            learning_rate,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let outcome = train(&data, arch, &tcfg, &LossConfig::default())?;

    let held_out = vocal_like_with_breath(99, 2.0, SR, breath);
    let lcfg = LossConfig::default();
    let last = outcome.checkpoints.last().ok_or("no checkpoints")?;
    let reference = resynthesize(&held_out, last, 1)?;
    println!("step   smoothed loss   to last   same-ckpt floor");
    for ckpt in &outcome.checkpoints {
        let s = ckpt.step as usize;
        let smoothed = outcome.losses[s - 250..s].iter().sum::<f64>() / 250.0;
        let a = resynthesize(&held_out, ckpt, 1)?;
        let b = resynthesize(&held_out, ckpt, 2)?;
        println!(
            "{s:5}   {smoothed:12.3}   {:7.3}   {:15.3}",
            spectral_distance(&a, &reference, &lcfg)?,
            spectral_distance(&a, &b, &lcfg)?
        );
        ckpt.save(out_dir.join(format!("ckpt_{s}.bin")))?;
        write_wav(&a, out_dir.join(format!("held_out_{s}.wav")))?;
    }
    Ok(())
}
