//! Minimal RIFF/WAVE reader and writer: 16-bit PCM and 32-bit float,
//! mono or stereo (stereo is averaged down to mono on read).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::AudioClip;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: malformed RIFF header: {detail}")]
    MalformedHeader { path: String, detail: String },
    #[error("{path}: unsupported codec (format tag {format}, {bits} bits)")]
    UnsupportedCodec {
        path: String,
        format: u16,
        bits: u16,
    },
    #[error("{path}: unsupported channel count {channels}")]
    UnsupportedChannels { path: String, channels: u16 },
    #[error("cannot write empty clip to {path}")]
    EmptyClip { path: String },
}

/// Sample encoding for [`write`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    /// 16-bit signed PCM; round trip is exact to within one LSB (2^-15).
    Pcm16,
    /// 32-bit IEEE float; round trip is exact for values representable in f32.
    Float32,
}

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

/// Read a WAV file into a mono [`AudioClip`]. Stereo input is downmixed as
/// the mean of the two channels.
pub fn read(path: &Path) -> Result<AudioClip, WavError> {
    let p = path.display().to_string();
    let io_err = |source| WavError::Io {
        path: p.clone(),
        source,
    };
    let mut reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|source| WavError::Io {
            path: p.clone(),
            source,
        })?;
    parse(&bytes, &p)
}

fn parse(bytes: &[u8], p: &str) -> Result<AudioClip, WavError> {
    let bad = |detail: &str| WavError::MalformedHeader {
        path: p.to_string(),
        detail: detail.to_string(),
    };
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE magic"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut off = 12;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = u32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap()) as usize;
        let body_start = off + 8;
        let body_end = body_start.checked_add(size).ok_or_else(|| bad("chunk size overflow"))?;
        if body_end > bytes.len() {
            return Err(bad("chunk extends past end of file"));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        off = body_end + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| bad("missing fmt chunk"))?;
    let data = data.ok_or_else(|| bad("missing data chunk"))?;
    if rate == 0 {
        return Err(bad("zero sample rate"));
    }
    if channels == 0 || channels > 2 {
        return Err(WavError::UnsupportedChannels {
            path: p.to_string(),
            channels,
        });
    }

    let interleaved: Vec<f64> = match (format, bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        _ => {
            return Err(WavError::UnsupportedCodec {
                path: p.to_string(),
                format,
                bits,
            })
        }
    };

    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(2)
            .map(|lr| (lr[0] + lr[1]) / 2.0)
            .collect()
    };
    let samples = samples
        .into_iter()
        .map(|s| if s.is_finite() { s } else { 0.0 })
        .collect();
    Ok(AudioClip::from_parts(samples, rate))
}

/// Write a mono clip. PCM16 clamps to [-1, 1) and quantizes; Float32
/// stores `f32` values verbatim.
pub fn write(path: &Path, clip: &AudioClip, format: SampleFormat) -> Result<(), WavError> {
    let p = path.display().to_string();
    if clip.is_empty() {
        return Err(WavError::EmptyClip { path: p });
    }
    let io_err = |source| WavError::Io {
        path: p.clone(),
        source,
    };

    let (format_tag, bits): (u16, u16) = match format {
        SampleFormat::Pcm16 => (FORMAT_PCM, 16),
        SampleFormat::Float32 => (FORMAT_IEEE_FLOAT, 32),
    };
    let bytes_per_sample = bits as u32 / 8;
    let data_len = clip.len() as u32 * bytes_per_sample;

    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut emit = |buf: &[u8]| w.write_all(buf).map_err(|source| WavError::Io {
        path: p.clone(),
        source,
    });

    emit(b"RIFF")?;
    emit(&(36 + data_len).to_le_bytes())?;
    emit(b"WAVE")?;
    emit(b"fmt ")?;
    emit(&16u32.to_le_bytes())?;
    emit(&format_tag.to_le_bytes())?;
    emit(&1u16.to_le_bytes())?; // mono
    emit(&clip.sample_rate().to_le_bytes())?;
    emit(&(clip.sample_rate() * bytes_per_sample).to_le_bytes())?;
    emit(&(bytes_per_sample as u16).to_le_bytes())?;
    emit(&bits.to_le_bytes())?;
    emit(b"data")?;
    emit(&data_len.to_le_bytes())?;
    match format {
        SampleFormat::Pcm16 => {
            for &s in clip.samples() {
                let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                emit(&q.to_le_bytes())?;
            }
        }
        SampleFormat::Float32 => {
            for &s in clip.samples() {
                emit(&(s as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::derived_rng;
    use rand::Rng;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("roomsec_wav_tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn float_round_trip_is_exact() {
        let clip = AudioClip::new(vec![0.1f32 as f64, -0.2f32 as f64], 16_000).unwrap();
        let path = tmp("float_rt.wav");
        write(&path, &clip, SampleFormat::Float32).unwrap();
        let back = read(&path).unwrap();
        assert_eq!(back.sample_rate(), 16_000);
        assert_eq!(back.samples(), clip.samples());
    }

    #[test]
    fn pcm16_round_trip_within_quantization() {
        let mut rng = derived_rng(11, &[]);
        let clip = AudioClip::new(
            (0..4_000).map(|_| rng.random_range(-0.999..0.999)).collect(),
            16_000,
        )
        .unwrap();
        let path = tmp("pcm_rt.wav");
        write(&path, &clip, SampleFormat::Pcm16).unwrap();
        let back = read(&path).unwrap();
        let bound = 1.0 / 32768.0;
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= bound, "{a} vs {b}");
        }
    }

    #[test]
    fn stereo_downmix_is_channel_mean() {
        // Hand-build a 2-channel PCM16 file: L = [8192, 8192], R = [-4096, 8192].
        let path = tmp("stereo.wav");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36u32 + 8).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&16_000u32.to_le_bytes());
        bytes.extend_from_slice(&(16_000u32 * 4).to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&8u32.to_le_bytes());
        for v in [8192i16, -4096, 8192, 8192] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();

        let clip = read(&path).unwrap();
        assert_eq!(clip.len(), 2);
        let want0 = (8192.0 - 4096.0) / 2.0 / 32768.0;
        let want1 = 8192.0 / 32768.0;
        assert!((clip.samples()[0] - want0).abs() < 1e-12);
        assert!((clip.samples()[1] - want1).abs() < 1e-12);
    }

    #[test]
    fn malformed_and_unsupported_are_rejected() {
        let path = tmp("bad.wav");
        std::fs::write(&path, b"RIFX nonsense").unwrap();
        assert!(matches!(read(&path), Err(WavError::MalformedHeader { .. })));

        // 8-bit PCM is not supported.
        let path2 = tmp("codec.wav");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36u32 + 2).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&16_000u32.to_le_bytes());
        bytes.extend_from_slice(&16_000u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8, 0]);
        std::fs::write(&path2, bytes).unwrap();
        assert!(matches!(
            read(&path2),
            Err(WavError::UnsupportedCodec { .. })
        ));
    }
}
