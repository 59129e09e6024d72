use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::audio_io::{resample, AudioClip};
use crate::features::{extract_mfcc, extract_track, hop_length, FeatureDump, FeatureTrack, MfccConfig, MfccTrack};
use crate::features::{LoudnessConfig, PitchConfig};

/// Extractor settings used to prepare training clips.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub sample_rate: u32,
    pub pitch: PitchConfig,
    pub loudness: LoudnessConfig,
    pub mfcc: MfccConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            sample_rate: crate::audio_io::DEFAULT_SAMPLE_RATE,
            pitch: PitchConfig::default(),
            loudness: LoudnessConfig::default(),
            mfcc: MfccConfig::default(),
        }
    }
}

impl AnalysisConfig {
    /// Default extractors at the given rates.
    pub fn with_rates(sample_rate: u32, frame_rate: f64) -> Self {
        let mut cfg = Self {
            sample_rate,
            ..Self::default()
        };
        cfg.pitch.frame_rate = frame_rate;
        cfg.loudness.frame_rate = frame_rate;
        cfg.mfcc.frame_rate = frame_rate;
        cfg
    }

    /// Default extractors matching a model's rates and MFCC width.
    pub fn for_model(arch: &crate::nn::Architecture) -> Self {
        let mut cfg = Self::with_rates(arch.sample_rate, arch.frame_rate as f64);
        if arch.n_mfcc > 0 {
            cfg.mfcc.n_mfcc = arch.n_mfcc;
        }
        cfg
    }
}

/// Audio with its frame-aligned conditioning features.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingClip {
    pub audio: AudioClip,
    pub track: FeatureTrack,
    pub mfcc: Option<MfccTrack>,
}

impl TrainingClip {
    /// Resamples to the analysis rate and runs the extractors.
    pub fn analyze(audio: &AudioClip, cfg: &AnalysisConfig, with_mfcc: bool) -> Result<Self, TrainError> {
        let audio = resample(audio, cfg.sample_rate);
        let track = extract_track(&audio, &cfg.pitch, &cfg.loudness)?;
        let mfcc = if with_mfcc { Some(extract_mfcc(&audio, &cfg.mfcc)?) } else { None };
        Ok(Self { audio, track, mfcc })
    }

    /// Pairs audio with a precomputed feature dump.
    pub fn from_dump(audio: AudioClip, dump: &FeatureDump) -> Result<Self, TrainError> {
        if audio.sample_rate() != dump.sample_rate {
            return Err(TrainError::Config(format!(
                "audio at {} Hz, features at {} Hz",
                audio.sample_rate(),
                dump.sample_rate
            )));
        }
        let track = dump.track().ok_or_else(|| TrainError::Config("feature dump lacks pitch/loudness".into()))?;
        Ok(Self {
            audio,
            track,
            mfcc: dump.mfcc(),
        })
    }

    pub fn frames(&self) -> usize {
        self.track.len()
    }

    pub fn hop(&self) -> Result<usize, TrainError> {
        Ok(hop_length(self.audio.sample_rate(), self.track.frame_rate)?)
    }
}

/// A non-empty set of clips.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    clips: Vec<TrainingClip>,
}

impl Dataset {
    pub fn new(clips: Vec<TrainingClip>) -> Result<Self, TrainError> {
        if clips.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        let first = (clips[0].audio.sample_rate(), clips[0].track.frame_rate);
        if clips.iter().any(|c| (c.audio.sample_rate(), c.track.frame_rate) != first) {
            return Err(TrainError::Config("clips disagree on sample or frame rate".into()));
        }
        for c in &clips {
            if c.mfcc.as_ref().is_some_and(|m| m.frames() != c.frames()) {
                return Err(TrainError::Config("MFCC and pitch frame counts differ".into()));
            }
        }
        Ok(Self { clips })
    }

    pub fn clips(&self) -> &[TrainingClip] {
        &self.clips
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}

/// Where training windows come from. A mixture is a sampling rule, not a
/// merged copy of the audio.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainingSet {
    Single(Dataset),
    Mixed {
        vocal: Dataset,
        instrument: Dataset,
        /// Probability that a window is drawn from `vocal`.
        ratio: f64,
    },
}

/// Combines vocal and instrument sets; `ratio` is the vocal share of
/// drawn windows and must lie strictly between 0 and 1.
pub fn mix_datasets(vocal: Dataset, instrument: Dataset, ratio: f64) -> Result<TrainingSet, TrainError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(TrainError::Config(format!("mix ratio {ratio} outside (0, 1)")));
    }
    if vocal.clips[0].audio.sample_rate() != instrument.clips[0].audio.sample_rate()
        || vocal.clips[0].track.frame_rate != instrument.clips[0].track.frame_rate
    {
        return Err(TrainError::Config("vocal and instrument sets disagree on rates".into()));
    }
    Ok(TrainingSet::Mixed {
        vocal,
        instrument,
        ratio,
    })
}

/// Which set and clip a window came from, and where it starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowDraw {
    pub from_vocal: bool,
    pub clip: usize,
    pub start_frame: usize,
}

impl TrainingSet {
    pub fn all_clips(&self) -> Vec<&TrainingClip> {
        match self {
            TrainingSet::Single(d) => d.clips.iter().collect(),
            TrainingSet::Mixed { vocal, instrument, .. } => vocal.clips.iter().chain(&instrument.clips).collect(),
        }
    }

    pub fn sample_rate(&self) -> u32 {
        self.all_clips()[0].audio.sample_rate()
    }

    pub fn frame_rate(&self) -> f64 {
        self.all_clips()[0].track.frame_rate
    }

    pub fn has_mfcc(&self) -> bool {
        self.all_clips().iter().all(|c| c.mfcc.is_some())
    }

    pub fn min_frames(&self) -> usize {
        self.all_clips().iter().map(|c| c.frames()).min().unwrap_or(0)
    }

    pub fn clip(&self, draw: &WindowDraw) -> &TrainingClip {
        match self {
            TrainingSet::Single(d) => &d.clips[draw.clip],
            TrainingSet::Mixed { vocal, instrument, .. } => {
                if draw.from_vocal {
                    &vocal.clips[draw.clip]
                } else {
                    &instrument.clips[draw.clip]
                }
            }
        }
    }

    /// Picks a source set, then a clip uniformly, then a frame-aligned start.
    pub fn draw(&self, window_frames: usize, rng: &mut ChaCha8Rng) -> WindowDraw {
        let (set, from_vocal) = match self {
            TrainingSet::Single(d) => (d, true),
            TrainingSet::Mixed {
                vocal,
                instrument,
                ratio,
            } => {
                if rng.random_bool(*ratio) {
                    (vocal, true)
                } else {
                    (instrument, false)
                }
            }
        };
        let clip = rng.random_range(0..set.clips.len());
        let slack = set.clips[clip].frames() - window_frames;
        let start_frame = rng.random_range(0..=slack);
        WindowDraw {
            from_vocal,
            clip,
            start_frame,
        }
    }
}
