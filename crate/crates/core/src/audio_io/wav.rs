//! Minimal RIFF/WAVE reader and writer.
//!
//! Accepts PCM 16-bit integer (format tag 1) and IEEE float 32-bit (format
//! tag 3) data, mono or stereo. `WAVE_FORMAT_EXTENSIBLE` headers are accepted
//! when their sub-format resolves to one of those two codecs. Stereo input is
//! mixed down to mono by averaging the two channels.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::AudioSegment;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a RIFF/WAVE file (bad {0} tag)")]
    NotWave(&'static str),
    #[error("truncated file: expected more data at byte offset {offset}")]
    Truncated { offset: usize },
    #[error("unsupported {field}: {value}")]
    Unsupported { field: &'static str, value: u32 },
    #[error("missing `{0}` chunk")]
    MissingChunk(&'static str),
    #[error("non-finite float sample at frame {0}")]
    NonFinite(usize),
}

/// Sample encoding used when writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WavError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(WavError::Truncated {
                offset: self.bytes.len(),
            }),
        }
    }

    fn u16(&mut self) -> Result<u16, WavError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, WavError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

#[derive(Debug, Clone, Copy)]
struct FmtChunk {
    codec: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, WavError> {
    let mut r = Reader { bytes: body, pos: 0 };
    let mut codec = r.u16()?;
    let channels = r.u16()?;
    let sample_rate = r.u32()?;
    let _byte_rate = r.u32()?;
    let _block_align = r.u16()?;
    let bits_per_sample = r.u16()?;
    if codec == FORMAT_EXTENSIBLE {
        let cb_size = r.u16()?;
        if cb_size < 22 {
            return Err(WavError::Unsupported {
                field: "extensible cbSize",
                value: cb_size as u32,
            });
        }
        let _valid_bits = r.u16()?;
        let _channel_mask = r.u32()?;
        // First two bytes of the sub-format GUID carry the codec tag.
        codec = r.u16()?;
    }
    Ok(FmtChunk {
        codec,
        channels,
        sample_rate,
        bits_per_sample,
    })
}

/// Decodes an in-memory WAV image.
pub fn decode_wav(bytes: &[u8], id: impl Into<String>) -> Result<AudioSegment, WavError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != b"RIFF" {
        return Err(WavError::NotWave("RIFF"));
    }
    let _riff_size = r.u32()?;
    if r.take(4)? != b"WAVE" {
        return Err(WavError::NotWave("WAVE"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    while r.remaining() >= 8 {
        let tag = r.take(4)?;
        let size = r.u32()? as usize;
        let body = r.take(size)?;
        match tag {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word aligned.
        if size % 2 == 1 && r.remaining() > 0 {
            r.pos += 1;
        }
        if fmt.is_some() && data.is_some() {
            break;
        }
    }

    let fmt = fmt.ok_or(WavError::MissingChunk("fmt "))?;
    let data = data.ok_or(WavError::MissingChunk("data"))?;

    if fmt.channels == 0 || fmt.channels > 2 {
        return Err(WavError::Unsupported {
            field: "channel count",
            value: fmt.channels as u32,
        });
    }
    if fmt.sample_rate == 0 {
        return Err(WavError::Unsupported {
            field: "sample rate",
            value: 0,
        });
    }
    let bytes_per_sample = match (fmt.codec, fmt.bits_per_sample) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_IEEE_FLOAT, 32) => 4,
        (FORMAT_PCM, bits) | (FORMAT_IEEE_FLOAT, bits) => {
            return Err(WavError::Unsupported {
                field: "bits per sample",
                value: bits as u32,
            })
        }
        (codec, _) => {
            return Err(WavError::Unsupported {
                field: "format tag",
                value: codec as u32,
            })
        }
    };

    let channels = fmt.channels as usize;
    let frame_bytes = bytes_per_sample * channels;
    let n_frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(n_frames);
    for (i, frame) in data.chunks_exact(frame_bytes).enumerate() {
        let mut acc = 0.0f64;
        for ch in frame.chunks_exact(bytes_per_sample) {
            let v = if bytes_per_sample == 2 {
                i16::from_le_bytes([ch[0], ch[1]]) as f64 / 32768.0
            } else {
                let v = f32::from_le_bytes([ch[0], ch[1], ch[2], ch[3]]);
                if !v.is_finite() {
                    return Err(WavError::NonFinite(i));
                }
                (v as f64).clamp(-1.0, 1.0)
            };
            acc += v;
        }
        samples.push(acc / channels as f64);
    }

    Ok(AudioSegment::new(samples, fmt.sample_rate, id))
}

/// Reads a WAV file; the segment id defaults to the file stem.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioSegment, WavError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| WavError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_wav(&bytes, id)
}

/// Encodes mono samples as a WAV image.
pub fn encode_wav(samples: &[f64], sample_rate: u32, format: SampleFormat) -> Vec<u8> {
    let (codec, bits) = match format {
        SampleFormat::Pcm16 => (FORMAT_PCM, 16u16),
        SampleFormat::Float32 => (FORMAT_IEEE_FLOAT, 32u16),
    };
    let block_align = bits / 8;
    let data_len = samples.len() * block_align as usize;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&codec.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        match format {
            SampleFormat::Pcm16 => {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            SampleFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, seg: &AudioSegment, format: SampleFormat) -> std::io::Result<()> {
    fs::write(path, encode_wav(&seg.samples, seg.sample_rate, format))
}
