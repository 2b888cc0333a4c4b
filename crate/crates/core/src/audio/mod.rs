//! Sample-domain containers and spectral transforms.

mod mel;
mod resample;
mod segment;
mod stft;
mod wav;

pub use mel::{
    invert_mel, invert_mel_with, mel_filterbank, mel_spectrogram, GriffinLimConfig, MelConfig,
    MelFilterbank, MelInversion, MelScale, MelSpectrogram,
};
pub use resample::{resample, Resampler};
pub use segment::{chunk, chunk_default, trim_silence, Trimmed, DEFAULT_CHUNK_SECONDS};
pub use stft::{istft, stft, stft_with, Spectrogram, StftConfig, Window};
pub use wav::{load_wav, read_wav, save_wav, write_wav, BitDepth, WavWriteReport};

use crate::error::{Error, Result};

/// Sample rates the pipeline stages operate at.
pub const PIPELINE_RATES: [u32; 5] = [10_000, 16_000, 24_000, 44_100, 48_000];

/// A mono buffer of samples with its sample rate.
///
/// Samples are nominally in `[-1, 1]` but the float domain is not clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    /// Builds a buffer from a closure of time in seconds.
    pub fn from_fn(len: usize, sample_rate: u32, f: impl Fn(f64) -> f64) -> Result<Self> {
        let rate = sample_rate as f64;
        Self::new((0..len).map(|i| f(i as f64 / rate)).collect(), sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.energy() / self.samples.len() as f64).sqrt()
        }
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Returns a copy scaled by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Returns a copy truncated or zero-padded to `len` samples.
    pub fn with_len(&self, len: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    pub(crate) fn from_parts_unchecked(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Self {
            samples,
            sample_rate,
        }
    }

    pub(crate) fn require_rate(&self, rate: u32) -> Result<()> {
        if self.sample_rate == rate {
            Ok(())
        } else {
            Err(Error::RateMismatch(self.sample_rate, rate))
        }
    }
}
