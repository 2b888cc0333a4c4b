use serde::{Deserialize, Serialize};

use super::filter::lowpass;
use crate::audio::{load_wav, resample, save_wav, AudioBuffer, BitDepth};
use crate::error::{Error, Result};
use crate::external::run_template;

pub const MU: f64 = 255.0;
/// Quantizer half-range: codes span -127..=127.
const MU_STEPS: f64 = 127.0;
/// Proxy cutoffs are kept this far below Nyquist.
const MAX_CUTOFF_FRACTION: f64 = 0.45;

/// Lossy-codec stage of the degradation chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Codec {
    #[default]
    None,
    /// Band limit followed by 8-bit mu-law companding.
    Proxy { cutoff_hz: f64 },
    External(ExternalCodec),
}

/// A pair of shell command templates. `{input}` and `{output}` are replaced
/// with temporary file paths: encode maps WAV to bitstream, decode the reverse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCodec {
    pub encode: String,
    pub decode: String,
}

impl ExternalCodec {
    pub fn new(encode: impl Into<String>, decode: impl Into<String>) -> Self {
        Self { encode: encode.into(), decode: decode.into() }
    }

    /// Round trip through the configured commands. The result is resampled to
    /// the input rate and cut or zero-padded to the input length.
    pub fn round_trip(&self, buffer: &AudioBuffer) -> Result<AudioBuffer> {
        let dir = tempfile::tempdir().map_err(|e| Error::io("temporary directory", e))?;
        let input = dir.path().join("input.wav");
        let coded = dir.path().join("coded.bin");
        let output = dir.path().join("output.wav");
        save_wav(buffer, &input, BitDepth::Float32)?;
        run_template(&self.encode, &input, &coded)?;
        run_template(&self.decode, &coded, &output)?;
        let decoded = load_wav(&output)?;
        let decoded = resample(&decoded, buffer.sample_rate())?;
        Ok(decoded.with_len(buffer.len()))
    }
}

/// Mu-law compands, quantizes to 255 symmetric levels, and expands back.
/// Input is saturated to [-1, 1] first.
pub fn mu_law_quantize(buffer: &AudioBuffer) -> AudioBuffer {
    let ln1mu = MU.ln_1p();
    let samples = buffer
        .samples()
        .iter()
        .map(|&x| {
            let x = x.clamp(-1.0, 1.0);
            let y = x.signum() * (MU * x.abs()).ln_1p() / ln1mu;
            let q = (y * MU_STEPS).round() / MU_STEPS;
            q.signum() * ((1.0 + MU).powf(q.abs()) - 1.0) / MU
        })
        .collect();
    AudioBuffer::from_parts_unchecked(samples, buffer.sample_rate())
}

pub fn codec_artifact(buffer: &AudioBuffer, codec: &Codec) -> Result<AudioBuffer> {
    match codec {
        Codec::None => Ok(buffer.clone()),
        Codec::Proxy { cutoff_hz } => {
            let limit = MAX_CUTOFF_FRACTION * buffer.sample_rate() as f64;
            let band_limited = lowpass(buffer, cutoff_hz.min(limit))?;
            Ok(mu_law_quantize(&band_limited))
        }
        Codec::External(ext) => ext.round_trip(buffer),
    }
}
