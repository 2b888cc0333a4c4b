//! Minimal RIFF/WAVE reader and writer.
//!
//! Reads PCM16, PCM24 and IEEE float32 (plain or `WAVE_FORMAT_EXTENSIBLE`),
//! averaging channels down to mono. Writes the canonical 44-byte header.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitDepth {
    Pcm16,
    Pcm24,
    Float32,
}

impl BitDepth {
    pub fn bytes_per_sample(self) -> usize {
        match self {
            BitDepth::Pcm16 => 2,
            BitDepth::Pcm24 => 3,
            BitDepth::Float32 => 4,
        }
    }

    fn format_tag(self) -> u16 {
        match self {
            BitDepth::Float32 => FORMAT_IEEE_FLOAT,
            _ => FORMAT_PCM,
        }
    }
}

/// Outcome of a write: how many samples were outside `[-1, 1]` and saturated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WavWriteReport {
    pub saturated: usize,
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_wav(BufReader::new(file))
}

pub fn save_wav(
    buffer: &AudioBuffer,
    path: impl AsRef<Path>,
    depth: BitDepth,
) -> Result<WavWriteReport> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let report = write_wav(buffer, &mut writer, depth).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(report)
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

pub fn read_wav<R: Read>(mut reader: R) -> Result<AudioBuffer> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<reader>", e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedWav("missing RIFF/WAVE signature".into()));
    }

    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_le(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        // Tolerate a truncated final data chunk (streaming writers leave size 0 or too large).
        let body_end = (body_start + size).min(bytes.len());
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => format = Some(parse_format(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_start + size + (size & 1);
    }

    let format = format.ok_or_else(|| Error::MalformedWav("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::MalformedWav("no data chunk".into()))?;
    if format.channels == 0 {
        return Err(Error::MalformedWav("zero channels".into()));
    }
    if format.sample_rate == 0 {
        return Err(Error::MalformedWav("zero sample rate".into()));
    }

    let width = match (format.tag, format.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_PCM, 24) => 3,
        (FORMAT_IEEE_FLOAT, 32) => 4,
        (tag, bits) => {
            return Err(Error::UnsupportedWav(format!(
                "format tag {tag:#06x} with {bits} bits per sample"
            )))
        }
    };
    let channels = format.channels as usize;
    let frame_bytes = width * channels;
    let frames = data.len() / frame_bytes;
    if frames == 0 {
        return Err(Error::EmptyWav);
    }

    let decode = |b: &[u8]| -> f64 {
        match width {
            2 => i16::from_le_bytes([b[0], b[1]]) as f64 / 32_768.0,
            3 => {
                let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            _ => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        }
    };

    let mut samples = Vec::with_capacity(frames);
    for frame in data.chunks_exact(frame_bytes) {
        let sum: f64 = frame.chunks_exact(width).map(decode).sum();
        samples.push(if channels == 1 {
            sum
        } else {
            sum / channels as f64
        });
    }
    AudioBuffer::new(samples, format.sample_rate)
        .map_err(|_| Error::MalformedWav("non-finite sample values".into()))
}

fn parse_format(body: &[u8]) -> Result<Format> {
    if body.len() < 16 {
        return Err(Error::MalformedWav("fmt chunk shorter than 16 bytes".into()));
    }
    let mut tag = u16_le(&body[0..2]);
    let channels = u16_le(&body[2..4]);
    let sample_rate = u32_le(&body[4..8]);
    let bits = u16_le(&body[14..16]);
    if tag == FORMAT_EXTENSIBLE {
        if body.len() < 40 {
            return Err(Error::MalformedWav("truncated extensible fmt chunk".into()));
        }
        // The sub-format GUID starts with the plain format tag.
        tag = u16_le(&body[24..26]);
    }
    Ok(Format {
        tag,
        channels,
        sample_rate,
        bits,
    })
}

pub fn write_wav<W: Write>(
    buffer: &AudioBuffer,
    writer: &mut W,
    depth: BitDepth,
) -> Result<WavWriteReport> {
    let width = depth.bytes_per_sample();
    let data_len = buffer.len() * width;
    let rate = buffer.sample_rate();

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&depth.format_tag().to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * width as u32).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&((width * 8) as u16).to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    let mut report = WavWriteReport::default();
    for &s in buffer.samples() {
        if s.abs() > 1.0 {
            report.saturated += 1;
        }
        let s = s.clamp(-1.0, 1.0);
        match depth {
            BitDepth::Pcm16 => {
                let v = (s * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            BitDepth::Pcm24 => {
                let v = (s * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                out.extend_from_slice(&v.to_le_bytes()[0..3]);
            }
            BitDepth::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    writer
        .write_all(&out)
        .map_err(|e| Error::io("<writer>", e))?;
    Ok(report)
}

fn u16_le(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn u32_le(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(buffer: &AudioBuffer, depth: BitDepth) -> (Vec<u8>, WavWriteReport) {
        let mut bytes = Vec::new();
        let report = write_wav(buffer, &mut bytes, depth).unwrap();
        (bytes, report)
    }

    #[test]
    fn zeros_at_48k_round_trip_to_zeros() {
        let buffer = AudioBuffer::zeros(48_000, 48_000).unwrap();
        let (bytes, _) = encode(&buffer, BitDepth::Pcm16);
        let back = read_wav(&bytes[..]).unwrap();
        assert_eq!(back.len(), 48_000);
        assert_eq!(back.sample_rate(), 48_000);
        assert!(back.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn canonical_header_length() {
        let buffer = AudioBuffer::zeros(1000, 16_000).unwrap();
        for depth in [BitDepth::Pcm16, BitDepth::Pcm24, BitDepth::Float32] {
            let (bytes, _) = encode(&buffer, depth);
            assert_eq!(bytes.len(), 44 + 1000 * depth.bytes_per_sample());
        }
    }

    #[test]
    fn most_negative_pcm16_reads_as_minus_one() {
        let buffer = AudioBuffer::new(vec![-1.0], 16_000).unwrap();
        let (bytes, _) = encode(&buffer, BitDepth::Pcm16);
        assert_eq!(&bytes[44..46], &(-32_768i16).to_le_bytes());
        assert_eq!(read_wav(&bytes[..]).unwrap().samples()[0], -1.0);
    }

    #[test]
    fn out_of_range_saturates_and_is_counted() {
        let buffer = AudioBuffer::new(vec![2.0, 0.0, -3.0, 1.0], 16_000).unwrap();
        let (bytes, report) = encode(&buffer, BitDepth::Pcm16);
        assert_eq!(report.saturated, 2);
        assert_eq!(&bytes[44..46], &32_767i16.to_le_bytes());
        assert_eq!(&bytes[48..50], &(-32_768i16).to_le_bytes());
    }

    #[test]
    fn pcm24_sign_extension() {
        let buffer = AudioBuffer::new(vec![-0.5, 0.25], 16_000).unwrap();
        let (bytes, _) = encode(&buffer, BitDepth::Pcm24);
        let back = read_wav(&bytes[..]).unwrap();
        assert_eq!(back.samples(), &[-0.5, 0.25]);
    }

    #[test]
    fn stereo_is_averaged() {
        // Hand-built stereo PCM16 file: L = 16384, R = -16384 then L = R = 8192.
        let mut bytes = Vec::new();
        let frames: [[i16; 2]; 2] = [[16_384, -16_384], [8_192, 8_192]];
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36u32 + 8).to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&8_000u32.to_le_bytes());
        bytes.extend_from_slice(&32_000u32.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&8u32.to_le_bytes());
        for f in frames {
            for s in f {
                bytes.extend_from_slice(&s.to_le_bytes());
            }
        }
        let b = read_wav(&bytes[..]).unwrap();
        assert_eq!(b.samples(), &[0.0, 0.25]);
        assert_eq!(b.sample_rate(), 8_000);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(matches!(
            read_wav(&b"RIFX0000WAVE"[..]),
            Err(Error::MalformedWav(_))
        ));
        let buffer = AudioBuffer::new(vec![0.1], 16_000).unwrap();
        let (mut bytes, _) = encode(&buffer, BitDepth::Pcm16);
        // 8-bit PCM is not supported.
        bytes[34] = 8;
        assert!(matches!(read_wav(&bytes[..]), Err(Error::UnsupportedWav(_))));

        let empty = AudioBuffer::new(vec![], 16_000).unwrap();
        let (bytes, _) = encode(&empty, BitDepth::Float32);
        assert!(matches!(read_wav(&bytes[..]), Err(Error::EmptyWav)));
    }

    proptest! {
        #[test]
        fn float32_round_trip_is_bit_exact(raw in proptest::collection::vec(-1.0f32..=1.0, 1..512)) {
            let buffer = AudioBuffer::new(raw.iter().map(|&v| v as f64).collect(), 44_100).unwrap();
            let (bytes, report) = encode(&buffer, BitDepth::Float32);
            prop_assert_eq!(report.saturated, 0);
            let back = read_wav(&bytes[..]).unwrap();
            prop_assert_eq!(back.samples(), buffer.samples());
        }
    }
}
