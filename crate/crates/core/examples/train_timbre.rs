//! Train a timbre decoder on a synthetic instrument and save its checkpoints.
//!
//! `cargo run --release --example train_timbre -- [steps] [out_dir]`

use std::error::Error;
use std::path::PathBuf;
use std::time::Instant;

use ddsp_vocal::fixtures::brass_like;
use ddsp_vocal::loss_train::{
    AnalysisConfig, Dataset, LossConfig, TrainConfig, TrainEvent, Trainer, TrainingClip, TrainingSet,
};
use ddsp_vocal::nn::Architecture;

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(Ok(400), |s| s.parse())?;
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| "timbre_run".into()));
    std::fs::create_dir_all(&out_dir)?;

    let arch = Architecture::timbre(32, 33, 32);
    let analysis = AnalysisConfig::for_model(&arch);
    let clips = (0..3)
        .map(|seed| TrainingClip::analyze(&brass_like(seed, 3.0, analysis.sample_rate), &analysis, false))
        .collect::<Result<Vec<_>, _>>()?;
    let data = TrainingSet::Single(Dataset::new(clips)?);

    let tcfg = TrainConfig {
        window: 8192,
        steps,
        checkpoint_every: (steps / 4).max(1),
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&data, arch, tcfg, LossConfig::default())?;
    let start = Instant::now();
    let outcome = trainer.run(|event| {
        match event {
            TrainEvent::Step { step, loss } if step % 50 == 0 => {
                println!("step {step:5}  loss {loss:8.3}  {:5.0} s", start.elapsed().as_secs_f64());
            }
            TrainEvent::Checkpoint(ckpt) => {
                let path = out_dir.join(format!("ckpt_{}.bin", ckpt.step));
                ckpt.save(&path)?;
                println!("saved {}", path.display());
            }
            _ => {}
        }
        Ok(())
    })?;
    let tail = &outcome.losses[outcome.losses.len().saturating_sub(50)..];
    println!("final 50-step mean loss: {:.3}", tail.iter().sum::<f64>() / tail.len() as f64);
    Ok(())
}
