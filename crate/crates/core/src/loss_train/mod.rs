//! Multi-resolution spectral loss, Adam, window sampling and the training loop.

mod adam;
mod data;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use data::{mix_datasets, AnalysisConfig, Dataset, TrainingClip, TrainingSet, WindowDraw};
pub use loss::{multiscale_spectral_loss, spectral_distance, LossConfig};
pub use trainer::{train, window_loss, TrainConfig, TrainEvent, TrainOutcome, Trainer};

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::features::FeatureError;
use crate::nn::NnError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training window of {window} samples is longer than the shortest clip ({shortest} samples)")]
    WindowTooLong { window: usize, shortest: usize },
    #[error("latent training needs MFCC features for every clip")]
    MissingMfcc,
    #[error("signal shapes differ: prediction {pred:?}, target {target:?}")]
    LengthMismatch { pred: Vec<usize>, target: Vec<usize> },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("loss became non-finite at step {0}")]
    NonFinite(u64),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] NnError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("{0}")]
    Io(String),
}
