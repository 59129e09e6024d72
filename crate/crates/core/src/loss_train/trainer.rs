use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::data::{TrainingClip, TrainingSet};
use super::loss::{multiscale_spectral_loss, LossConfig};
use super::TrainError;
use crate::autodiff::{Tape, Tensor, Var};
use crate::nn::{decoder_graph, encoder_graph, Architecture, ModelCheckpoint, ModelKind, ModelParams, Normalization};
use crate::synth::graph::render_graph;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Window length in samples; must be a whole number of frames.
    pub window: usize,
    pub adam: AdamConfig,
    pub steps: u64,
    pub checkpoint_every: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 1,
            window: 16000,
            adam: AdamConfig::default(),
            steps: 2000,
            checkpoint_every: 250,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let a = &self.adam;
        if self.batch_size == 0 || self.window == 0 || self.steps == 0 || self.checkpoint_every == 0 {
            return Err(TrainError::Config("batch size, window, steps and checkpoint_every must be positive".into()));
        }
        if self.checkpoint_every > self.steps {
            return Err(TrainError::Config(format!(
                "checkpoint_every {} exceeds total steps {}",
                self.checkpoint_every, self.steps
            )));
        }
        if !(a.learning_rate > 0.0 && a.eps > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return Err(TrainError::Config("Adam settings out of range".into()));
        }
        Ok(())
    }

    /// Steps at which a checkpoint is emitted.
    pub fn checkpoint_steps(&self) -> Vec<u64> {
        let mut s: Vec<u64> = (1..=self.steps / self.checkpoint_every).map(|i| i * self.checkpoint_every).collect();
        if s.last() != Some(&self.steps) {
            s.push(self.steps);
        }
        s
    }
}

/// Spectral loss of one training window on `tape`: conditioning →
/// (encoder) → decoder → synthesizer → loss against the window's audio.
pub fn window_loss<'t>(
    tape: &'t Tape,
    params: &ModelParams<Var<'t>>,
    model: &ModelCheckpoint,
    clip: &TrainingClip,
    start_frame: usize,
    frames: usize,
    noise_seed: u64,
    lcfg: &LossConfig,
) -> Result<Var<'t>, TrainError> {
    let hop = clip.hop()?;
    let track = clip.track.window(start_frame, frames);
    let held = track.held_f0();
    let norm = &model.norm;
    let f0_in = tape.constant(Tensor::matrix(frames, 1, norm.f0(&held))?);
    let loudness_in = tape.constant(Tensor::matrix(frames, 1, norm.loudness(&track.loudness))?);
    let z = match (&params.encoder, model.arch.kind) {
        (Some(enc), ModelKind::Latent) => {
            let mfcc = clip.mfcc.as_ref().ok_or(TrainError::MissingMfcc)?.window(start_frame, frames);
            let mfcc = norm.mfcc(&mfcc)?;
            Some(encoder_graph(enc, tape.constant(mfcc.coefficients))?)
        }
        _ => None,
    };
    let controls = decoder_graph(&params.decoder, f0_in, loudness_in, z)?;
    let f0 = tape.constant(Tensor::vector(held));
    let audio = render_graph(tape, f0, controls, clip.audio.sample_rate() as f64, hop, noise_seed)?;
    let target = clip.audio.samples()[start_frame * hop..(start_frame + frames) * hop].to_vec();
    multiscale_spectral_loss(audio, tape.constant(Tensor::vector(target)), lcfg)
}

/// Progress notifications from [`Trainer::run`].
#[derive(Debug)]
pub enum TrainEvent<'a> {
    Step { step: u64, loss: f64 },
    Checkpoint(&'a ModelCheckpoint),
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoints: Vec<ModelCheckpoint>,
    /// Mean batch loss per step, index 0 is step 1.
    pub losses: Vec<f64>,
}

/// Stateful training loop over one training set.
pub struct Trainer<'d> {
    data: &'d TrainingSet,
    tcfg: TrainConfig,
    lcfg: LossConfig,
    model: ModelCheckpoint,
    adam: AdamState,
    rng: ChaCha8Rng,
    window_frames: usize,
}

impl<'d> Trainer<'d> {
    /// Fits normalization statistics on `data` and initializes `arch`
    /// (its rates are taken from the data).
    pub fn new(data: &'d TrainingSet, arch: Architecture, tcfg: TrainConfig, lcfg: LossConfig) -> Result<Self, TrainError> {
        tcfg.validate()?;
        lcfg.validate()?;
        let clips = data.all_clips();
        let mfccs: Vec<_> = clips.iter().filter_map(|c| c.mfcc.as_ref()).collect();
        let mut arch = arch;
        arch.sample_rate = data.sample_rate();
        let frame_rate = data.frame_rate();
        if frame_rate.fract() != 0.0 {
            return Err(TrainError::Config(format!("frame rate {frame_rate} is not an integer")));
        }
        arch.frame_rate = frame_rate as u32;
        if arch.kind == ModelKind::Latent {
            if !data.has_mfcc() {
                return Err(TrainError::MissingMfcc);
            }
            arch.n_mfcc = mfccs[0].width();
        }
        let tracks: Vec<_> = clips.iter().map(|c| &c.track).collect();
        let norm = match arch.kind {
            ModelKind::Latent => Normalization::fit(&tracks, &mfccs),
            ModelKind::Timbre => Normalization::fit(&tracks, &[]),
        };
        let model = ModelCheckpoint::init(arch, norm, tcfg.seed)?;
        Self::resume(data, model, tcfg, lcfg)
    }

    /// Continues from an existing model (its step counter is kept).
    pub fn resume(data: &'d TrainingSet, model: ModelCheckpoint, tcfg: TrainConfig, lcfg: LossConfig) -> Result<Self, TrainError> {
        tcfg.validate()?;
        lcfg.validate()?;
        let hop = model.arch.hop();
        if data.sample_rate() != model.arch.sample_rate || data.frame_rate() != model.arch.frame_rate as f64 {
            return Err(TrainError::Config("data rates differ from the model's".into()));
        }
        if tcfg.window % hop != 0 {
            return Err(TrainError::Config(format!("window {} is not a multiple of hop {hop}", tcfg.window)));
        }
        let window_frames = tcfg.window / hop;
        if window_frames > data.min_frames() {
            return Err(TrainError::WindowTooLong {
                window: tcfg.window,
                shortest: data.min_frames() * hop,
            });
        }
        if model.arch.kind == ModelKind::Latent && !data.has_mfcc() {
            return Err(TrainError::MissingMfcc);
        }
        let adam = AdamState::new(&model.params.to_flat());
        // The stream is split from the initialization seed so the two never correlate.
        let rng = ChaCha8Rng::seed_from_u64(tcfg.seed ^ 0x5eed_da7a_0000_0001);
        Ok(Self {
            data,
            tcfg,
            lcfg,
            model,
            adam,
            rng,
            window_frames,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.model.step
    }

    pub fn model(&self) -> &ModelCheckpoint {
        &self.model
    }

    /// The current parameters at storage precision, stamped with the step.
    pub fn checkpoint(&self) -> ModelCheckpoint {
        self.model.snapshot(self.model.step)
    }

    /// One optimizer step; returns the mean loss over the batch.
    pub fn step(&mut self) -> Result<f64, TrainError> {
        let batch = self.tcfg.batch_size;
        let draws: Vec<_> = (0..batch)
            .map(|_| (self.data.draw(self.window_frames, &mut self.rng), self.rng.random::<u64>()))
            .collect();
        let mut grads: Option<Vec<Tensor>> = None;
        let mut total = 0.0;
        for (draw, noise_seed) in draws {
            let tape = Tape::new();
            let vars = self.model.params.bind(&tape);
            let clip = self.data.clip(&draw);
            let loss = window_loss(
                &tape,
                &vars,
                &self.model,
                clip,
                draw.start_frame,
                self.window_frames,
                noise_seed,
                &self.lcfg,
            )?;
            let value = loss.value().item();
            if !value.is_finite() {
                return Err(TrainError::NonFinite(self.model.step + 1));
            }
            total += value;
            let g = tape.backward(&loss)?;
            let flat = vars.visit(&mut |_, v| g.wrt(v)).to_flat();
            grads = Some(match grads {
                None => flat,
                Some(mut acc) => {
                    for (a, b) in acc.iter_mut().zip(&flat) {
                        a.data_mut().iter_mut().zip(b.data()).for_each(|(x, y)| *x += y);
                    }
                    acc
                }
            });
        }
        let mut grads = grads.expect("batch size is positive");
        if batch > 1 {
            for g in &mut grads {
                g.data_mut().iter_mut().for_each(|v| *v /= batch as f64);
            }
        }
        let mut flat = self.model.params.to_flat();
        adam_step(&mut flat, &grads, &mut self.adam, &self.tcfg.adam)?;
        self.model.params = self.model.params.with_flat(flat);
        self.model.step += 1;
        Ok(total / batch as f64)
    }

    /// Runs the remaining steps, emitting checkpoints on schedule.
    pub fn run(&mut self, mut observer: impl FnMut(TrainEvent<'_>) -> Result<(), TrainError>) -> Result<TrainOutcome, TrainError> {
        let schedule = self.tcfg.checkpoint_steps();
        let mut outcome = TrainOutcome {
            checkpoints: Vec::new(),
            losses: Vec::new(),
        };
        while self.model.step < self.tcfg.steps {
            let loss = self.step()?;
            let step = self.model.step;
            outcome.losses.push(loss);
            observer(TrainEvent::Step { step, loss })?;
            if schedule.contains(&step) {
                let ckpt = self.checkpoint();
                observer(TrainEvent::Checkpoint(&ckpt))?;
                outcome.checkpoints.push(ckpt);
            }
        }
        Ok(outcome)
    }
}

/// Trains a fresh model and collects every checkpoint.
pub fn train(data: &TrainingSet, arch: Architecture, tcfg: &TrainConfig, lcfg: &LossConfig) -> Result<TrainOutcome, TrainError> {
    Trainer::new(data, arch, tcfg.clone(), lcfg.clone())?.run(|_| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_arithmetic() {
        let t = TrainConfig {
            steps: 2000,
            checkpoint_every: 500,
            ..Default::default()
        };
        assert_eq!(t.checkpoint_steps(), vec![500, 1000, 1500, 2000]);
        let t = TrainConfig {
            steps: 1100,
            checkpoint_every: 500,
            ..Default::default()
        };
        assert_eq!(t.checkpoint_steps(), vec![500, 1000, 1100]);
    }

    #[test]
    fn rejects_bad_cadence() {
        let t = TrainConfig {
            steps: 10,
            checkpoint_every: 20,
            ..Default::default()
        };
        assert!(t.validate().is_err());
    }
}
