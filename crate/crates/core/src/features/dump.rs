use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{FeatureTrack, HarmonicTrack, MfccTrack};
use crate::autodiff::Tensor;
use crate::binio::{ByteReader, ByteWriter};

pub const FEATURE_MAGIC: &[u8; 8] = b"DDSPFEAT";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a feature dump (bad magic)")]
    BadMagic,
    #[error("unsupported feature dump version {0}")]
    Version(u32),
    #[error("corrupt feature dump: {0}")]
    Corrupt(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Named `f32` arrays sharing one frame rate.
///
/// Layout (little-endian): magic `DDSPFEAT`, `u32` version, `u32` sample
/// rate, `f64` frame rate, `u32` array count, then per array a `u16`-prefixed
/// UTF-8 name, `u32` rank, `u64` dimensions and the `f32` values.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDump {
    pub sample_rate: u32,
    pub frame_rate: f64,
    pub arrays: Vec<FeatureArray>,
}

impl FeatureDump {
    pub fn new(sample_rate: u32, frame_rate: f64) -> Self {
        Self {
            sample_rate,
            frame_rate,
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, shape: Vec<usize>, values: Vec<f64>) {
        self.arrays.push(FeatureArray {
            name: name.to_string(),
            shape,
            values,
        });
    }

    /// Dump of the standard analysis outputs.
    pub fn from_features(
        sample_rate: u32,
        track: &FeatureTrack,
        mfcc: Option<&MfccTrack>,
        harmonics: Option<&HarmonicTrack>,
    ) -> Self {
        let mut d = Self::new(sample_rate, track.frame_rate);
        let n = track.len();
        d.push("f0", vec![n], track.f0.clone());
        d.push("loudness", vec![n], track.loudness.clone());
        d.push("confidence", vec![n], track.confidence.clone());
        if let Some(m) = mfcc {
            d.push("mfcc", m.coefficients.shape().to_vec(), m.coefficients.data().to_vec());
        }
        if let Some(h) = harmonics {
            d.push("harmonics", h.amplitudes.shape().to_vec(), h.amplitudes.data().to_vec());
        }
        d
    }

    pub fn get(&self, name: &str) -> Option<&FeatureArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn frames(&self) -> Option<usize> {
        self.get("f0").map(|a| a.shape[0])
    }

    pub fn track(&self) -> Option<FeatureTrack> {
        Some(FeatureTrack {
            f0: self.get("f0")?.values.clone(),
            loudness: self.get("loudness")?.values.clone(),
            confidence: self.get("confidence")?.values.clone(),
            frame_rate: self.frame_rate,
        })
    }

    pub fn mfcc(&self) -> Option<MfccTrack> {
        let a = self.get("mfcc")?;
        Some(MfccTrack {
            coefficients: Tensor::new(a.shape.clone(), a.values.clone()).ok()?,
            frame_rate: self.frame_rate,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(FEATURE_MAGIC);
        w.u32(FEATURE_VERSION);
        w.u32(self.sample_rate);
        w.f64(self.frame_rate);
        w.u32(self.arrays.len() as u32);
        for a in &self.arrays {
            w.name(&a.name);
            w.f32_array(&a.shape, &a.values);
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DumpError> {
        let mut r = ByteReader::new(bytes);
        let eof = || DumpError::Corrupt("unexpected end of data".into());
        if r.take(8).ok_or_else(eof)? != FEATURE_MAGIC {
            return Err(DumpError::BadMagic);
        }
        let version = r.u32().ok_or_else(eof)?;
        if version != FEATURE_VERSION {
            return Err(DumpError::Version(version));
        }
        let sample_rate = r.u32().ok_or_else(eof)?;
        let frame_rate = r.f64().ok_or_else(eof)?;
        let count = r.u32().ok_or_else(eof)?;
        let mut dump = Self::new(sample_rate, frame_rate);
        for _ in 0..count {
            let name = r.name().ok_or_else(eof)?;
            let (shape, values) = r.f32_array().ok_or_else(eof)?;
            dump.arrays.push(FeatureArray { name, shape, values });
        }
        if r.remaining() != 0 {
            return Err(DumpError::Corrupt(format!("{} trailing bytes", r.remaining())));
        }
        Ok(dump)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DumpError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DumpError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
