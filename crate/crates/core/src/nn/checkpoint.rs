//! Little-endian checkpoint container:
//!
//! ```text
//! magic "DDSPCKPT" | u32 version
//! u32 × 9  kind, harmonics, noise_bins, hidden, latent, encoder_hidden,
//!          n_mfcc, sample_rate, frame_rate
//! u64 seed | u64 step
//! f64 loudness_mean, loudness_std, f0_scale | u32 n | f64 × n mean | f64 × n std
//! u32 tensor count | (u16 name length, name, u32 rank, u64 dims, f32 values)*
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{Architecture, ModelKind, ModelParams, NnError, Normalization};
use crate::autodiff::Tensor;
use crate::binio::{ByteReader, ByteWriter};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DDSPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained (or freshly initialized) model with everything needed to run it.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub arch: Architecture,
    pub params: ModelParams<Tensor>,
    pub norm: Normalization,
    pub seed: u64,
    pub step: u64,
}

impl ModelCheckpoint {
    /// Freshly initialized model.
    pub fn init(arch: Architecture, norm: Normalization, seed: u64) -> Result<Self, NnError> {
        Ok(Self {
            params: ModelParams::init(&arch, seed)?,
            arch,
            norm,
            seed,
            step: 0,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.arch.kind
    }

    /// Copy with every parameter rounded to the stored `f32` precision, so
    /// that the in-memory value equals what a save/load cycle returns.
    pub fn snapshot(&self, step: u64) -> Self {
        let flat = self.params.to_flat().iter().map(Tensor::round_to_f32).collect();
        Self {
            params: self.params.with_flat(flat),
            step,
            ..self.clone()
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        let a = &self.arch;
        let kind = match a.kind {
            ModelKind::Timbre => 0,
            ModelKind::Latent => 1,
        };
        for v in [
            kind,
            a.harmonics as u32,
            a.noise_bins as u32,
            a.hidden as u32,
            a.latent as u32,
            a.encoder_hidden as u32,
            a.n_mfcc as u32,
            a.sample_rate,
            a.frame_rate,
        ] {
            w.u32(v);
        }
        w.u64(self.seed);
        w.u64(self.step);
        w.f64(self.norm.loudness_mean);
        w.f64(self.norm.loudness_std);
        w.f64(self.norm.f0_scale);
        w.u32(self.norm.mfcc_mean.len() as u32);
        self.norm.mfcc_mean.iter().chain(&self.norm.mfcc_std).for_each(|&v| w.f64(v));
        let names = self.params.names();
        w.u32(names.len() as u32);
        for (name, t) in names.iter().zip(self.params.to_flat()) {
            w.name(name);
            w.f32_array(t.shape(), t.data());
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut r = ByteReader::new(bytes);
        let eof = || NnError::Corrupt("unexpected end of data".into());
        if r.take(8).ok_or_else(eof)? != CHECKPOINT_MAGIC {
            return Err(NnError::BadMagic);
        }
        let version = r.u32().ok_or_else(eof)?;
        if version != CHECKPOINT_VERSION {
            return Err(NnError::Version(version));
        }
        let mut ints = [0u32; 9];
        for v in &mut ints {
            *v = r.u32().ok_or_else(eof)?;
        }
        let kind = match ints[0] {
            0 => ModelKind::Timbre,
            1 => ModelKind::Latent,
            k => return Err(NnError::Corrupt(format!("unknown model kind {k}"))),
        };
        let arch = Architecture {
            kind,
            harmonics: ints[1] as usize,
            noise_bins: ints[2] as usize,
            hidden: ints[3] as usize,
            latent: ints[4] as usize,
            encoder_hidden: ints[5] as usize,
            n_mfcc: ints[6] as usize,
            sample_rate: ints[7],
            frame_rate: ints[8],
        };
        arch.validate().map_err(|e| NnError::Corrupt(e.to_string()))?;
        let seed = r.u64().ok_or_else(eof)?;
        let step = r.u64().ok_or_else(eof)?;
        let loudness_mean = r.f64().ok_or_else(eof)?;
        let loudness_std = r.f64().ok_or_else(eof)?;
        let f0_scale = r.f64().ok_or_else(eof)?;
        let n = r.u32().ok_or_else(eof)? as usize;
        if n.saturating_mul(16) > r.remaining() {
            return Err(eof());
        }
        let stats: Vec<f64> = (0..2 * n).map(|_| r.f64().ok_or_else(eof)).collect::<Result<_, _>>()?;
        let norm = Normalization {
            loudness_mean,
            loudness_std,
            f0_scale,
            mfcc_mean: stats[..n].to_vec(),
            mfcc_std: stats[n..].to_vec(),
        };

        let count = r.u32().ok_or_else(eof)? as usize;
        let mut stored = HashMap::new();
        for _ in 0..count {
            let name = r.name().ok_or_else(eof)?;
            let (shape, values) = r.f32_array().ok_or_else(eof)?;
            stored.insert(name, Tensor::new(shape, values)?);
        }
        if r.remaining() != 0 {
            return Err(NnError::Corrupt(format!("{} trailing bytes", r.remaining())));
        }

        // The architecture determines the expected tensor set and shapes.
        let template = ModelParams::init(&arch, 0)?;
        if stored.len() != template.names().len() {
            return Err(NnError::Shape(format!(
                "expected {} tensors, found {}",
                template.names().len(),
                stored.len()
            )));
        }
        let mut problems = Vec::new();
        let params = template.visit(&mut |name, t| match stored.remove(name) {
            Some(v) if v.shape() == t.shape() => v,
            Some(v) => {
                problems.push(format!("{name}: expected {:?}, found {:?}", t.shape(), v.shape()));
                t.clone()
            }
            None => {
                problems.push(format!("{name}: missing"));
                t.clone()
            }
        });
        if !problems.is_empty() {
            return Err(NnError::Shape(problems.join("; ")));
        }
        Ok(Self {
            arch,
            params,
            norm,
            seed,
            step,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|source| NnError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| NnError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ckpt() -> ModelCheckpoint {
        let arch = Architecture::latent(4, 5, 6, 2, 3, 7);
        let norm = Normalization {
            loudness_mean: -30.5,
            loudness_std: 12.25,
            f0_scale: 127.0,
            mfcc_mean: vec![0.1; 7],
            mfcc_std: vec![2.0; 7],
        };
        ModelCheckpoint::init(arch, norm, 42).unwrap().snapshot(5000)
    }

    #[test]
    fn round_trip_is_exact() {
        let c = ckpt();
        let bytes = c.to_bytes();
        let back = ModelCheckpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.step, 5000);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn truncation_is_corrupt() {
        let bytes = ckpt().to_bytes();
        for cut in [4, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(ModelCheckpoint::from_bytes(&bytes[..cut]), Err(NnError::Corrupt(_))), "cut {cut}");
        }
    }

    #[test]
    fn unknown_version_rejected() {
        let mut bytes = ckpt().to_bytes();
        bytes[8] = 9;
        assert!(matches!(ModelCheckpoint::from_bytes(&bytes), Err(NnError::Version(9))));
        bytes[0] = b'X';
        assert!(matches!(ModelCheckpoint::from_bytes(&bytes), Err(NnError::BadMagic)));
    }

    #[test]
    fn architecture_tensor_mismatch() {
        let c = ckpt();
        let mut bytes = c.to_bytes();
        // Bump the harmonic count in the descriptor so stored heads no longer fit.
        bytes[16] = 5;
        assert!(matches!(ModelCheckpoint::from_bytes(&bytes), Err(NnError::Shape(_))));
    }
}
