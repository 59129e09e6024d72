//! File-to-file command line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::audio_io::{read_wav, resample, write_wav, AudioClip, AudioError};
use crate::config::PipelineConfig;
use crate::features::{extract_input_harmonics, extract_mfcc, extract_track, FeatureDump, HarmonicConfig};
use crate::loss_train::{mix_datasets, Dataset, TrainError, TrainEvent, Trainer, TrainingClip, TrainingSet};
use crate::nn::{ModelCheckpoint, ModelKind, NnError};
use crate::xsynth::{cross_synthesize_with, resynthesize_with, InterpolationFactor, XsynthError};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, missing inputs, inconsistent configuration.
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        match e {
            AudioError::NotFound(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::EmptyDataset | TrainError::WindowTooLong { .. } | TrainError::MissingMfcc | TrainError::Config(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<XsynthError> for CliError {
    fn from(e: XsynthError) -> Self {
        match e {
            XsynthError::Factor(_) | XsynthError::LatentCheckpoint => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint, CliError> {
    ModelCheckpoint::load(path).map_err(|e| match e {
        NnError::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
            CliError::Usage(format!("checkpoint not found: {}", path.display()))
        }
        e => CliError::Runtime(format!("{}: {e}", path.display())),
    })
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "ddsp-vocal", version, about = "Harmonic-plus-noise resynthesis and vocal cross-synthesis")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Timbre,
    Latent,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract pitch, loudness, MFCC and measured harmonics into a feature dump.
    Features { input: PathBuf, output: PathBuf },
    /// Train a model; writes ckpt_<step>.bin files, metrics.tsv and config.toml.
    Train {
        /// Directory of WAV files (optional when --mix is given).
        data_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "timbre")]
        kind: Kind,
        /// vocal_dir:instrument_dir:ratio, ratio = vocal share of windows.
        #[arg(long)]
        mix: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        checkpoint_every: Option<u64>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Reconstruct (latent models) or timbre-transfer (timbre models) a recording.
    Resynth { input: PathBuf, checkpoint: PathBuf, output: PathBuf },
    /// Timbre transfer with harmonics blended toward the input's own.
    Xsynth {
        input: PathBuf,
        checkpoint: PathBuf,
        output: PathBuf,
        /// Blend factor in [0, 1]; defaults to the config value (0.7).
        #[arg(long, value_parser = parse_factor)]
        p: Option<f64>,
    },
    /// Print checkpoint metadata.
    Inspect { checkpoint: PathBuf },
}

fn parse_factor(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    InterpolationFactor::new(p).map(|f| f.value()).map_err(|e| e.to_string())
}

/// Parses `std::env::args` and runs; the binary's whole body.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| CliError::Usage(e.to_string()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Train {
        steps,
        checkpoint_every,
        hidden,
        learning_rate,
        ..
    } = &cli.command
    {
        if let Some(s) = steps {
            cfg.train.steps = *s;
        }
        if let Some(c) = checkpoint_every {
            cfg.train.checkpoint_every = *c;
        }
        if let Some(h) = hidden {
            cfg.model.hidden = *h;
            cfg.model.encoder_hidden = *h;
        }
        if let Some(lr) = learning_rate {
            cfg.train.learning_rate = *lr;
        }
    }
    if let Command::Xsynth { p: Some(p), .. } = &cli.command {
        cfg.xsynth.p = *p;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    println!("seed: {}", cfg.seed);
    println!("config hash: {}", cfg.hash());

    match cli.command {
        Command::Features { input, output } => cmd_features(&cfg, &input, &output),
        Command::Train {
            data_dir, kind, mix, out, ..
        } => cmd_train(&cfg, data_dir.as_deref(), kind, mix.as_deref(), &out),
        Command::Resynth {
            input,
            checkpoint,
            output,
        } => cmd_resynth(&cfg, &input, &checkpoint, &output),
        Command::Xsynth {
            input,
            checkpoint,
            output,
            ..
        } => cmd_xsynth(&cfg, &input, &checkpoint, &output),
        Command::Inspect { checkpoint } => cmd_inspect(&checkpoint),
    }
}

fn cmd_features(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<(), CliError> {
    let analysis = cfg.analysis();
    let clip = resample(&read_wav(input)?, cfg.audio.sample_rate);
    let track = extract_track(&clip, &analysis.pitch, &analysis.loudness).map_err(runtime)?;
    let mfcc = extract_mfcc(&clip, &analysis.mfcc).map_err(runtime)?;
    let harmonic_cfg = HarmonicConfig {
        harmonics: cfg.synth.harmonics,
        ..HarmonicConfig::default()
    };
    let harmonics = extract_input_harmonics(&clip, &track, &harmonic_cfg).map_err(runtime)?;
    let dump = FeatureDump::from_features(clip.sample_rate(), &track, Some(&mfcc), Some(&harmonics));
    dump.save(output).map_err(|e| runtime(format!("{}: {e}", output.display())))?;
    println!("wrote {} frames to {}", track.len(), output.display());
    Ok(())
}

/// WAV files in `dir`, sorted by name. A sibling `.feat` dump, when
/// present, supplies the features instead of re-extracting them.
fn load_dir(dir: &Path, cfg: &PipelineConfig, with_mfcc: bool) -> Result<Dataset, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    let mut wavs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    wavs.sort();
    if wavs.is_empty() {
        return Err(CliError::Usage(format!("no WAV files in {}", dir.display())));
    }
    let analysis = cfg.analysis();
    let mut clips = Vec::with_capacity(wavs.len());
    for path in wavs {
        let audio = resample(&read_wav(&path)?, cfg.audio.sample_rate);
        let feat = path.with_extension("feat");
        let clip = if feat.exists() {
            let dump = FeatureDump::load(&feat).map_err(|e| runtime(format!("{}: {e}", feat.display())))?;
            TrainingClip::from_dump(audio, &dump)?
        } else {
            TrainingClip::analyze(&audio, &analysis, with_mfcc)?
        };
        clips.push(clip);
    }
    Ok(Dataset::new(clips)?)
}

fn parse_mix(spec: &str) -> Result<(PathBuf, PathBuf, f64), CliError> {
    let bad = || CliError::Usage(format!("--mix expects vocal_dir:instrument_dir:ratio, got {spec:?}"));
    let (dirs, ratio) = spec.rsplit_once(':').ok_or_else(bad)?;
    let (vocal, instrument) = dirs.split_once(':').ok_or_else(bad)?;
    let ratio: f64 = ratio.parse().map_err(|_| bad())?;
    Ok((vocal.into(), instrument.into(), ratio))
}

fn cmd_train(cfg: &PipelineConfig, data_dir: Option<&Path>, kind: Kind, mix: Option<&str>, out: &Path) -> Result<(), CliError> {
    let kind = match kind {
        Kind::Timbre => ModelKind::Timbre,
        Kind::Latent => ModelKind::Latent,
    };
    let with_mfcc = kind == ModelKind::Latent;
    let data = match (mix, data_dir) {
        (Some(spec), _) => {
            let (v, i, ratio) = parse_mix(spec)?;
            mix_datasets(load_dir(&v, cfg, with_mfcc)?, load_dir(&i, cfg, with_mfcc)?, ratio)?
        }
        (None, Some(dir)) => TrainingSet::Single(load_dir(dir, cfg, with_mfcc)?),
        (None, None) => return Err(CliError::Usage("train needs a data directory or --mix".into())),
    };
    let mut trainer = Trainer::new(&data, cfg.architecture(kind), cfg.train_config(), cfg.loss_config())?;

    fs::create_dir_all(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    cfg.save(out.join("config.toml")).map_err(runtime)?;
    let metrics_path = out.join("metrics.tsv");
    let mut metrics = BufWriter::new(File::create(&metrics_path).map_err(|e| runtime(format!("{}: {e}", metrics_path.display())))?);
    let io = |e: std::io::Error| TrainError::Io(e.to_string());
    trainer.run(|event| {
        match event {
            TrainEvent::Step { step, loss } => writeln!(metrics, "{step}\t{loss}").map_err(io)?,
            TrainEvent::Checkpoint(ckpt) => {
                let path = out.join(format!("ckpt_{}.bin", ckpt.step));
                ckpt.save(&path)?;
                metrics.flush().map_err(io)?;
                println!("step {}: wrote {}", ckpt.step, path.display());
            }
        }
        Ok(())
    })?;
    metrics.flush().map_err(runtime)?;
    Ok(())
}

fn write_output(clip: &AudioClip, output: &Path) -> Result<(), CliError> {
    write_wav(clip, output)?;
    println!("wrote {:.2} s to {}", clip.duration_secs(), output.display());
    Ok(())
}

fn cmd_resynth(cfg: &PipelineConfig, input: &Path, checkpoint: &Path, output: &Path) -> Result<(), CliError> {
    let audio = read_wav(input)?;
    let ckpt = load_checkpoint(checkpoint)?;
    let analysis = cfg_analysis_for(cfg, &ckpt);
    write_output(&resynthesize_with(&audio, &ckpt, cfg.seed, &analysis)?, output)
}

fn cmd_xsynth(cfg: &PipelineConfig, input: &Path, checkpoint: &Path, output: &Path) -> Result<(), CliError> {
    let audio = read_wav(input)?;
    let ckpt = load_checkpoint(checkpoint)?;
    let p = InterpolationFactor::new(cfg.xsynth.p)?;
    println!("p: {}", p.value());
    let analysis = cfg_analysis_for(cfg, &ckpt);
    write_output(&cross_synthesize_with(&audio, &ckpt, p, cfg.seed, &analysis)?, output)
}

/// Config extractor settings at the checkpoint's rates and MFCC width.
fn cfg_analysis_for(cfg: &PipelineConfig, ckpt: &ModelCheckpoint) -> crate::loss_train::AnalysisConfig {
    let mut a = cfg.analysis();
    a.sample_rate = ckpt.arch.sample_rate;
    let fr = ckpt.arch.frame_rate as f64;
    a.pitch.frame_rate = fr;
    a.loudness.frame_rate = fr;
    a.mfcc.frame_rate = fr;
    if ckpt.arch.n_mfcc > 0 {
        a.mfcc.n_mfcc = ckpt.arch.n_mfcc;
    }
    a
}

fn cmd_inspect(checkpoint: &Path) -> Result<(), CliError> {
    let c = load_checkpoint(checkpoint)?;
    let a = &c.arch;
    println!("kind: {}", a.kind.name());
    println!("step: {}", c.step);
    println!("init seed: {}", c.seed);
    println!("sample rate: {} Hz, frame rate: {} fps", a.sample_rate, a.frame_rate);
    println!("harmonics: {}, noise bins: {}, hidden: {}", a.harmonics, a.noise_bins, a.hidden);
    if a.kind == ModelKind::Latent {
        println!("latent: {}, encoder hidden: {}, mfcc: {}", a.latent, a.encoder_hidden, a.n_mfcc);
    }
    println!(
        "loudness mean/std: {:.3} / {:.3} dB, f0 scale: {}",
        c.norm.loudness_mean, c.norm.loudness_std, c.norm.f0_scale
    );
    println!("parameters: {}", c.params.parameter_count());
    c.params.visit(&mut |name, t| println!("  {name} {:?}", t.shape()));
    Ok(())
}
