use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ddsp_vocal::audio_io::{read_wav, write_wav};
use ddsp_vocal::features::{extract_track, FeatureDump, LoudnessConfig, PitchConfig};
use ddsp_vocal::fixtures::{harmonic_tone, sine, vocal_like};
use ddsp_vocal::nn::{Architecture, ModelCheckpoint, Normalization};
use tempfile::TempDir;

/// Small model and short windows so training runs in well under a second.
const SMALL_CONFIG: &str = "\
seed = 5
[synth]
harmonics = 8
noise_bins = 9
[model]
hidden = 8
latent = 4
encoder_hidden = 8
[loss]
fft_sizes = [256, 128, 64]
[train]
window = 1024
steps = 4
checkpoint_every = 2
";

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ddsp-vocal"));
    for a in args {
        cmd.arg(a);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        fs::write(ws.path("small.toml"), SMALL_CONFIG).unwrap();
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn wav(&self, name: &str, clip: &ddsp_vocal::audio_io::AudioClip) -> PathBuf {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).unwrap();
        }
        write_wav(clip, &p).unwrap();
        p
    }

    /// A timbre checkpoint with the small config's shapes.
    fn checkpoint(&self, latent: bool) -> PathBuf {
        let (arch, norm) = if latent {
            (
                Architecture::latent(8, 9, 8, 4, 8, 30),
                Normalization {
                    mfcc_mean: vec![0.0; 30],
                    mfcc_std: vec![1.0; 30],
                    ..Normalization::default()
                },
            )
        } else {
            (Architecture::timbre(8, 9, 8), Normalization::default())
        };
        let p = self.path(if latent { "latent.bin" } else { "timbre.bin" });
        ModelCheckpoint::init(arch, norm, 2).unwrap().save(&p).unwrap();
        p
    }
}

#[test]
fn features_of_one_second_have_250_frames() {
    let ws = Workspace::new();
    let input = ws.wav("tone.wav", &sine(330.0, 0.5, 1.0, 16000));
    let out = ws.path("tone.feat");
    let o = run(&[&"features", &input, &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("wrote 250 frames"));
    assert!(stdout(&o).contains("config hash: "));
    let dump = FeatureDump::load(&out).unwrap();
    for name in ["f0", "loudness", "confidence", "mfcc", "harmonics"] {
        assert_eq!(dump.get(name).unwrap_or_else(|| panic!("{name} missing")).shape[0], 250, "{name}");
    }
    assert_eq!(dump.get("harmonics").unwrap().shape[1], 64);
}

#[test]
fn features_resample_other_rates() {
    let ws = Workspace::new();
    let input = ws.wav("tone48.wav", &sine(330.0, 0.5, 1.0, 48000));
    let out = ws.path("tone48.feat");
    let o = run(&[&"features", &input, &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dump = FeatureDump::load(&out).unwrap();
    assert_eq!(dump.sample_rate, 16000);
    assert_eq!(dump.frames(), Some(250));
}

#[test]
fn missing_input_is_a_usage_error() {
    let ws = Workspace::new();
    let missing = ws.path("nope.wav");
    let o = run(&[&"features", &missing, &ws.path("x.feat")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.wav"), "{}", stderr(&o));

    let ckpt = ws.checkpoint(false);
    let o = run(&[&"resynth", &missing, &ckpt, &ws.path("y.wav")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_of_range_p_is_a_usage_error() {
    let ws = Workspace::new();
    let input = ws.wav("a.wav", &sine(220.0, 0.5, 0.5, 16000));
    let ckpt = ws.checkpoint(false);
    let o = run(&[&"xsynth", &input, &ckpt, &ws.path("o.wav"), &"--p", &"1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!ws.path("o.wav").exists());
}

#[test]
fn bad_config_is_a_usage_error() {
    let ws = Workspace::new();
    fs::write(ws.path("bad.toml"), "[audio]\nframe_rate = 300\n").unwrap();
    let ckpt = ws.checkpoint(false);
    let o = run(&[&"--config", &ws.path("bad.toml"), &"inspect", &ckpt]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupt_checkpoint_is_a_runtime_error() {
    let ws = Workspace::new();
    let input = ws.wav("a.wav", &sine(220.0, 0.5, 0.5, 16000));
    let bad = ws.path("bad.bin");
    fs::write(&bad, b"not a checkpoint").unwrap();
    let o = run(&[&"resynth", &input, &bad, &ws.path("o.wav")]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

fn train_dir(ws: &Workspace) -> PathBuf {
    ws.wav("data/a.wav", &vocal_like(1, 1.0, 16000));
    ws.wav("data/b.wav", &vocal_like(2, 1.0, 16000));
    ws.path("data")
}

#[test]
fn train_writes_checkpoints_on_schedule_and_is_deterministic() {
    let ws = Workspace::new();
    let data = train_dir(&ws);
    let config = ws.path("small.toml");
    let (out1, out2) = (ws.path("run1"), ws.path("run2"));
    for out in [&out1, &out2] {
        let o = run(&[&"--config", &config, &"train", &data, &"--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("seed: 5"));
    }
    for name in ["ckpt_2.bin", "ckpt_4.bin", "metrics.tsv", "config.toml"] {
        let (a, b) = (fs::read(out1.join(name)).unwrap(), fs::read(out2.join(name)).unwrap());
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let names: Vec<String> = fs::read_dir(&out1)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("ckpt_"))
        .collect();
    assert_eq!(names.len(), 2);
    let metrics = fs::read_to_string(out1.join("metrics.tsv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    assert_eq!(ModelCheckpoint::load(out1.join("ckpt_4.bin")).unwrap().step, 4);

    // The dumped config reproduces the run.
    let out3 = ws.path("run3");
    let o = run(&[&"--config", &out1.join("config.toml"), &"train", &data, &"--out", &out3]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(out1.join("ckpt_4.bin")).unwrap(), fs::read(out3.join("ckpt_4.bin")).unwrap());

    let o = run(&[&"--config", &config, &"--seed", &"6", &"train", &data, &"--out", &ws.path("run4")]);
    assert!(o.status.success());
    assert_ne!(metrics, fs::read_to_string(ws.path("run4").join("metrics.tsv")).unwrap());
}

#[test]
fn mixed_latent_training_runs() {
    let ws = Workspace::new();
    ws.wav("vocal/a.wav", &vocal_like(1, 1.0, 16000));
    ws.wav("inst/a.wav", &harmonic_tone(261.6, &[0.3, 0.2, 0.1], 1.0, 16000));
    let mix = format!("{}:{}:0.5", ws.path("vocal").display(), ws.path("inst").display());
    let out = ws.path("mixed");
    let o = run(&[&"--config", &ws.path("small.toml"), &"train", &"--kind", &"latent", &"--mix", &mix, &"--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = ModelCheckpoint::load(out.join("ckpt_4.bin")).unwrap();
    assert_eq!(ckpt.arch.kind.name(), "latent");

    let o = run(&[&"--config", &ws.path("small.toml"), &"train", &"--mix", &format!("{}:{}:1.0", ws.path("vocal").display(), ws.path("inst").display()), &"--out", &ws.path("bad")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn latent_training_without_mfcc_is_rejected_before_training() {
    let ws = Workspace::new();
    let data = train_dir(&ws);
    // Feature dumps next to the WAVs supply pitch and loudness only.
    for name in ["a", "b"] {
        let clip = read_wav(data.join(format!("{name}.wav"))).unwrap();
        let track = extract_track(&clip, &PitchConfig::default(), &LoudnessConfig::default()).unwrap();
        FeatureDump::from_features(16000, &track, None, None).save(data.join(format!("{name}.feat"))).unwrap();
    }
    let out = ws.path("latent");
    let o = run(&[&"--config", &ws.path("small.toml"), &"train", &data, &"--kind", &"latent", &"--out", &out]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).to_lowercase().contains("mfcc"));
    assert!(!out.join("metrics.tsv").exists());
}

#[test]
fn empty_data_dir_is_a_usage_error() {
    let ws = Workspace::new();
    fs::create_dir_all(ws.path("empty")).unwrap();
    let o = run(&[&"train", &ws.path("empty"), &"--out", &ws.path("o")]);
    assert_eq!(o.status.code(), Some(2));
}

fn read_samples(p: &Path) -> Vec<f64> {
    read_wav(p).unwrap().samples().to_vec()
}

#[test]
fn xsynth_p_zero_matches_resynth_and_default_is_0_7() {
    let ws = Workspace::new();
    let input = ws.wav("in.wav", &harmonic_tone(262.0, &[0.3, 0.1, 0.05], 1.0, 16000));
    let ckpt = ws.checkpoint(false);
    let (resynth, x0, x07, xdef) = (ws.path("r.wav"), ws.path("x0.wav"), ws.path("x07.wav"), ws.path("xd.wav"));
    assert!(run(&[&"resynth", &input, &ckpt, &resynth]).status.success());
    assert!(run(&[&"xsynth", &input, &ckpt, &x0, &"--p", &"0"]).status.success());
    assert!(run(&[&"xsynth", &input, &ckpt, &x07, &"--p", &"0.7"]).status.success());
    let o = run(&[&"xsynth", &input, &ckpt, &xdef]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("p: 0.7"));

    assert_eq!(fs::read(&resynth).unwrap(), fs::read(&x0).unwrap());
    assert_eq!(fs::read(&x07).unwrap(), fs::read(&xdef).unwrap());
    assert_ne!(fs::read(&x0).unwrap(), fs::read(&x07).unwrap());
    // Output covers the framed input: 250 frames of 64 samples.
    assert_eq!(read_samples(&resynth).len(), 16000);
}

#[test]
fn xsynth_rejects_latent_checkpoints() {
    let ws = Workspace::new();
    let input = ws.wav("in.wav", &sine(220.0, 0.5, 0.5, 16000));
    let ckpt = ws.checkpoint(true);
    let o = run(&[&"xsynth", &input, &ckpt, &ws.path("o.wav")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("latent"));
    // Resynthesis accepts latent models.
    assert!(run(&[&"resynth", &input, &ckpt, &ws.path("r.wav")]).status.success());
}

#[test]
fn inspect_prints_metadata() {
    let ws = Workspace::new();
    let ckpt = ws.checkpoint(true);
    let o = run(&[&"inspect", &ckpt]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in ["kind: latent", "step: 0", "sample rate: 16000 Hz", "harmonics: 8", "encoder.gru.input_weight"] {
        assert!(text.contains(needle), "missing {needle:?} in\n{text}");
    }
}
