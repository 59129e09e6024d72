mod common;

use std::f64::consts::TAU;

use common::randoms;
use ddsp_vocal::audio_io::AudioClip;
use ddsp_vocal::autodiff::Tensor;
use ddsp_vocal::fixtures::{brass_like, sine, vocal_like};
use ddsp_vocal::loss_train::{
    adam_step, mix_datasets, spectral_distance, train, AdamConfig, AdamState, AnalysisConfig, Dataset, LossConfig,
    TrainConfig, TrainError, Trainer, TrainingClip, TrainingSet,
};
use ddsp_vocal::nn::Architecture;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Loss computed from its definition with a direct DFT per frame.
fn brute_force_loss(pred: &[f64], target: &[f64], cfg: &LossConfig) -> f64 {
    let stft = |x: &[f64], n: usize, hop: usize| -> Vec<Vec<f64>> {
        let frames = if x.len() <= n { 1 } else { 1 + (x.len() - n).div_ceil(hop) };
        (0..frames)
            .map(|f| {
                (0..=n / 2)
                    .map(|k| {
                        let (mut re, mut im) = (0.0, 0.0);
                        for j in 0..n {
                            let v = x.get(f * hop + j).copied().unwrap_or(0.0);
                            let w = 0.5 - 0.5 * (TAU * j as f64 / n as f64).cos();
                            let ph = TAU * (k * j) as f64 / n as f64;
                            re += v * w * ph.cos();
                            im -= v * w * ph.sin();
                        }
                        (re * re + im * im).sqrt()
                    })
                    .collect()
            })
            .collect()
    };
    let mut total = 0.0;
    for &n in &cfg.fft_sizes {
        let hop = (n as f64 * (1.0 - cfg.overlap)).round() as usize;
        let (sp, st) = (stft(pred, n, hop), stft(target, n, hop));
        let count = (sp.len() * sp[0].len()) as f64;
        let mut lin = 0.0;
        let mut log = 0.0;
        for (rp, rt) in sp.iter().zip(&st) {
            for (p, t) in rp.iter().zip(rt) {
                lin += (p - t).abs();
                log += ((p + cfg.eps).ln() - (t + cfg.eps).ln()).abs();
            }
        }
        total += lin / count + cfg.log_weight * log / count;
    }
    total
}

#[test]
fn spectral_loss_matches_direct_dft() {
    let cfg = LossConfig {
        fft_sizes: vec![256, 128, 64],
        ..LossConfig::default()
    };
    for (len, seed) in [(700, 1), (200, 2), (64, 3)] {
        let p = randoms(seed, len, -0.5, 0.5);
        let t = randoms(seed + 10, len, -0.5, 0.5);
        let want = brute_force_loss(&p, &t, &cfg);
        let got = spectral_distance(
            &AudioClip::new(p, 16000).unwrap(),
            &AudioClip::new(t, 16000).unwrap(),
            &cfg,
        )
        .unwrap();
        assert!((got - want).abs() < 1e-9 * want.max(1.0), "len {len}: {got} vs {want}");
    }
}

#[test]
fn spectral_loss_is_zero_only_for_identical_signals() {
    let a = sine(440.0, 0.5, 0.25, 16000);
    assert_eq!(spectral_distance(&a, &a, &LossConfig::default()).unwrap(), 0.0);
    let b = sine(450.0, 0.5, 0.25, 16000);
    assert!(spectral_distance(&a, &b, &LossConfig::default()).unwrap() > 0.0);
    let short = sine(440.0, 0.5, 0.1, 16000);
    assert!(matches!(
        spectral_distance(&a, &short, &LossConfig::default()),
        Err(TrainError::LengthMismatch { .. })
    ));
}

#[test]
fn adam_minimizes_a_quadratic() {
    let hyper = AdamConfig {
        learning_rate: 0.3,
        ..AdamConfig::default()
    };
    let mut x = vec![Tensor::scalar(5.0)];
    let mut state = AdamState::new(&x);
    for _ in 0..100 {
        let g = vec![Tensor::scalar(2.0 * x[0].item())];
        adam_step(&mut x, &g, &mut state, &hyper).unwrap();
    }
    assert!(x[0].item().abs() < 0.5, "x = {}", x[0].item());
}

#[test]
fn adam_matches_reference_update() {
    let hyper = AdamConfig {
        learning_rate: 0.01,
        beta1: 0.8,
        beta2: 0.95,
        eps: 1e-6,
    };
    let start = randoms(1, 6, -1.0, 1.0);
    let mut x = vec![Tensor::vector(start.clone())];
    let mut state = AdamState::new(&x);
    let (mut rx, mut m, mut v) = (start, vec![0.0; 6], vec![0.0; 6]);
    for t in 1..=7 {
        let g = randoms(100 + t, 6, -2.0, 2.0);
        adam_step(&mut x, &[Tensor::vector(g.clone())], &mut state, &hyper).unwrap();
        for i in 0..6 {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            let mh = m[i] / (1.0 - hyper.beta1.powi(t as i32));
            let vh = v[i] / (1.0 - hyper.beta2.powi(t as i32));
            rx[i] -= hyper.learning_rate * mh / (vh.sqrt() + hyper.eps);
        }
    }
    for (a, b) in x[0].data().iter().zip(&rx) {
        assert!((a - b).abs() < 1e-14);
    }
    assert_eq!(state.step, 7);
}

fn clips(make: fn(u64, f64, u32) -> AudioClip, seeds: &[u64], seconds: f64, mfcc: bool) -> Dataset {
    let cfg = AnalysisConfig::default();
    Dataset::new(
        seeds
            .iter()
            .map(|&s| TrainingClip::analyze(&make(s, seconds, 16000), &cfg, mfcc).unwrap())
            .collect(),
    )
    .unwrap()
}

#[test]
fn mixture_draws_follow_the_ratio() {
    let vocal = clips(vocal_like, &[1, 2], 0.5, false);
    let inst = clips(brass_like, &[3, 4, 5], 0.5, false);
    let set = mix_datasets(vocal, inst, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 10_000;
    let window = 16;
    let mut vocal_count = 0;
    let mut inst_clips = [0usize; 3];
    for _ in 0..n {
        let d = set.draw(window, &mut rng);
        let clip = set.clip(&d);
        assert!(d.start_frame + window <= clip.frames());
        if d.from_vocal {
            vocal_count += 1;
        } else {
            inst_clips[d.clip] += 1;
        }
    }
    let share = vocal_count as f64 / n as f64;
    assert!((share - 0.5).abs() <= 0.02, "vocal share {share}");
    let inst_total: usize = inst_clips.iter().sum();
    for c in inst_clips {
        assert!((c as f64 / inst_total as f64 - 1.0 / 3.0).abs() < 0.03);
    }
}

#[test]
fn degenerate_mixtures_are_rejected() {
    for ratio in [0.0, 1.0, 1.5, -0.1, f64::NAN] {
        let v = clips(vocal_like, &[1], 0.3, false);
        let i = clips(brass_like, &[2], 0.3, false);
        assert!(matches!(mix_datasets(v, i, ratio), Err(TrainError::Config(_))), "ratio {ratio}");
    }
    assert!(matches!(Dataset::new(vec![]), Err(TrainError::EmptyDataset)));
}

fn tiny_config(steps: u64, every: u64, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 2,
        window: 1024,
        adam: AdamConfig::default(),
        steps,
        checkpoint_every: every,
        seed,
    }
}

fn tiny_loss() -> LossConfig {
    LossConfig {
        fft_sizes: vec![512, 256, 128, 64],
        ..LossConfig::default()
    }
}

#[test]
fn training_is_deterministic_and_checkpoints_on_schedule() {
    let set = TrainingSet::Single(clips(vocal_like, &[1, 2], 0.5, false));
    let arch = Architecture::timbre(8, 9, 8);
    let a = train(&set, arch, &tiny_config(12, 4, 3), &tiny_loss()).unwrap();
    let b = train(&set, arch, &tiny_config(12, 4, 3), &tiny_loss()).unwrap();
    assert_eq!(a.losses, b.losses);
    assert_eq!(a.checkpoints, b.checkpoints);
    assert_eq!(a.checkpoints.iter().map(|c| c.step).collect::<Vec<_>>(), vec![4, 8, 12]);
    assert_eq!(a.losses.len(), 12);
    assert!(a.losses.iter().all(|l| l.is_finite() && *l > 0.0));

    let c = train(&set, arch, &tiny_config(12, 4, 4), &tiny_loss()).unwrap();
    assert_ne!(a.losses, c.losses);
}

#[test]
fn schedule_for_long_runs() {
    let t = TrainConfig {
        steps: 2000,
        checkpoint_every: 500,
        ..TrainConfig::default()
    };
    assert_eq!(t.checkpoint_steps(), vec![500, 1000, 1500, 2000]);
}

#[test]
fn resume_continues_the_step_counter() {
    let set = TrainingSet::Single(clips(vocal_like, &[1], 0.5, false));
    let arch = Architecture::timbre(8, 9, 8);
    let first = train(&set, arch, &tiny_config(3, 3, 1), &tiny_loss()).unwrap();
    let model = first.checkpoints.last().unwrap().clone();
    let mut trainer = Trainer::resume(&set, model, tiny_config(6, 3, 1), tiny_loss()).unwrap();
    assert_eq!(trainer.step_count(), 3);
    let rest = trainer.run(|_| Ok(())).unwrap();
    assert_eq!(rest.losses.len(), 3);
    assert_eq!(rest.checkpoints.iter().map(|c| c.step).collect::<Vec<_>>(), vec![6]);
}

#[test]
fn training_reduces_loss_on_a_steady_tone() {
    let cfg = AnalysisConfig::default();
    let tone = ddsp_vocal::fixtures::harmonic_tone(220.0, &[0.4, 0.2, 0.1], 0.5, 16000);
    let set = TrainingSet::Single(Dataset::new(vec![TrainingClip::analyze(&tone, &cfg, false).unwrap()]).unwrap());
    let tcfg = TrainConfig {
        adam: AdamConfig {
            learning_rate: 3e-3,
            ..AdamConfig::default()
        },
        ..tiny_config(80, 80, 2)
    };
    let out = train(&set, Architecture::timbre(8, 9, 8), &tcfg, &tiny_loss()).unwrap();
    let head: f64 = out.losses[..10].iter().sum::<f64>() / 10.0;
    let tail: f64 = out.losses[70..].iter().sum::<f64>() / 10.0;
    assert!(tail < 0.7 * head, "loss {head:.3} -> {tail:.3}");
}

#[test]
fn configuration_errors() {
    let set = TrainingSet::Single(clips(vocal_like, &[1], 0.25, false));
    let arch = Architecture::timbre(8, 9, 8);
    // 0.25 s is 62 frames; a 64-frame window cannot fit.
    assert!(matches!(
        train(&set, arch, &tiny_config(2, 2, 0).tap(|t| t.window = 4096), &tiny_loss()),
        Err(TrainError::WindowTooLong { window: 4096, .. })
    ));
    assert!(matches!(
        train(&set, arch, &tiny_config(2, 2, 0).tap(|t| t.window = 1000), &tiny_loss()),
        Err(TrainError::Config(_))
    ));
    assert!(matches!(
        train(&set, arch, &tiny_config(2, 3, 0), &tiny_loss()),
        Err(TrainError::Config(_))
    ));
    let latent = Architecture::latent(8, 9, 8, 4, 8, 30);
    assert!(matches!(
        train(&set, latent, &tiny_config(2, 2, 0), &tiny_loss()),
        Err(TrainError::MissingMfcc)
    ));
}

trait Tap: Sized {
    fn tap(self, f: impl FnOnce(&mut Self)) -> Self;
}

impl Tap for TrainConfig {
    fn tap(mut self, f: impl FnOnce(&mut Self)) -> Self {
        f(&mut self);
        self
    }
}

#[test]
fn latent_training_runs_on_mfcc_data() {
    let set = TrainingSet::Single(clips(vocal_like, &[1], 0.5, true));
    let latent = Architecture::latent(8, 9, 8, 4, 8, 30);
    let out = train(&set, latent, &tiny_config(2, 2, 0), &tiny_loss()).unwrap();
    let model = &out.checkpoints[0];
    assert_eq!(model.arch.n_mfcc, 30);
    assert_eq!(model.norm.mfcc_mean.len(), 30);
    assert!(model.params.encoder.is_some());
}
