use std::fs;
use std::io::Write;
use std::path::Path;

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::Malformed("fmt chunk shorter than 16 bytes".into()));
    }
    let mut format = u16_at(body, 0);
    let bits = u16_at(body, 14);
    if format == FORMAT_EXTENSIBLE {
        if body.len() < 26 {
            return Err(AudioError::Malformed("truncated WAVE_FORMAT_EXTENSIBLE header".into()));
        }
        // First two bytes of the sub-format GUID carry the real format tag.
        format = u16_at(body, 24);
    }
    Ok(FmtChunk {
        format,
        channels: u16_at(body, 2),
        sample_rate: u32_at(body, 4),
        block_align: u16_at(body, 12),
        bits,
    })
}

/// Reads a 16-bit PCM or 32-bit float WAV file, averaging channels to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => AudioError::NotFound(path.to_path_buf()),
        _ => AudioError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    decode_wav(&bytes)
}

pub(crate) fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::Malformed("missing RIFF/WAVE signature".into()));
    }
    let mut fmt = None;
    let mut data = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| AudioError::Malformed(format!("chunk {:?} overruns file", String::from_utf8_lossy(id))))?;
        match id {
            b"fmt " => fmt = Some(parse_fmt(&bytes[body_start..body_end])?),
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_end + (size & 1);
    }
    let fmt = fmt.ok_or_else(|| AudioError::Malformed("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::Malformed("no data chunk".into()))?;
    if fmt.channels == 0 || fmt.sample_rate == 0 {
        return Err(AudioError::Malformed("zero channels or sample rate".into()));
    }
    let bytes_per_sample = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_FLOAT, 32) => 4,
        (format, bits) => return Err(AudioError::UnsupportedEncoding { format, bits }),
    };
    let channels = fmt.channels as usize;
    if fmt.block_align as usize != channels * bytes_per_sample {
        return Err(AudioError::Malformed(format!("block align {} inconsistent", fmt.block_align)));
    }
    let frame_bytes = channels * bytes_per_sample;
    let samples = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(bytes_per_sample)
                .map(|s| match bytes_per_sample {
                    2 => i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0,
                    _ => f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64,
                })
                .sum();
            sum / channels as f64
        })
        .collect();
    AudioClip::new(samples, fmt.sample_rate)
}

pub(crate) fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in clip.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

/// Writes a 16-bit PCM mono WAV file. Out-of-range samples are clamped.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let path = path.as_ref();
    let io_err = |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(&encode_wav(clip)).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_file(channels: u16, rate: u32, samples: &[i16]) -> Vec<u8> {
        let data_len = samples.len() * 2;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data_len as u32).to_le_bytes());
        for s in samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    #[test]
    fn pcm16_scaling() {
        let clip = decode_wav(&pcm16_file(1, 16000, &[0, 16384, -16384])).unwrap();
        assert_eq!(clip.samples(), &[0.0, 0.5, -0.5]);
    }

    #[test]
    fn stereo_is_averaged() {
        let clip = decode_wav(&pcm16_file(2, 16000, &[32767, 0])).unwrap();
        assert_eq!(clip.len(), 1);
        assert!((clip.samples()[0] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn float32_is_read() {
        let mut bytes = pcm16_file(1, 8000, &[]);
        // Patch to 32-bit float mono with two samples.
        bytes[20..22].copy_from_slice(&3u16.to_le_bytes());
        bytes[28..32].copy_from_slice(&(8000u32 * 4).to_le_bytes());
        bytes[32..34].copy_from_slice(&4u16.to_le_bytes());
        bytes[34..36].copy_from_slice(&32u16.to_le_bytes());
        bytes[40..44].copy_from_slice(&8u32.to_le_bytes());
        bytes.extend_from_slice(&0.25f32.to_le_bytes());
        bytes.extend_from_slice(&(-1.0f32).to_le_bytes());
        let clip = decode_wav(&bytes).unwrap();
        assert_eq!(clip.samples(), &[0.25, -1.0]);
        assert_eq!(clip.sample_rate(), 8000);
    }

    #[test]
    fn malformed_and_unsupported_are_distinct() {
        assert!(matches!(decode_wav(b"RIFX....WAVE"), Err(AudioError::Malformed(_))));
        let mut bytes = pcm16_file(1, 16000, &[1, 2]);
        bytes[34..36].copy_from_slice(&24u16.to_le_bytes());
        assert!(matches!(
            decode_wav(&bytes),
            Err(AudioError::UnsupportedEncoding { format: 1, bits: 24 })
        ));
        let bytes = pcm16_file(1, 16000, &[1, 2, 3]);
        assert!(matches!(decode_wav(&bytes[..bytes.len() - 3]), Err(AudioError::Malformed(_))));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(read_wav("/nonexistent/x.wav"), Err(AudioError::NotFound(_))));
    }

    #[test]
    fn writer_clamps() {
        let clip = AudioClip::new(vec![2.0, -2.0, 1.0], 16000).unwrap();
        let back = decode_wav(&encode_wav(&clip)).unwrap();
        assert_eq!(back.samples()[0], 32767.0 / 32768.0);
        assert_eq!(back.samples()[1], -1.0);
        assert_eq!(back.samples()[2], 32767.0 / 32768.0);
    }

    #[test]
    fn empty_clip_round_trips() {
        let clip = AudioClip::new(Vec::new(), 16000).unwrap();
        let bytes = encode_wav(&clip);
        assert_eq!(bytes.len(), 44);
        let back = decode_wav(&bytes).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.sample_rate(), 16000);
    }
}
