//! Recovery stage: bring any input to 16 kHz at a fixed loudness and remove
//! additive degradation in the STFT domain.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::{istft, load_wav, resample, save_wav, stft, stft_with, AudioBuffer, BitDepth, Spectrogram};
use crate::error::{Error, Result};
use crate::external::run_template;
use crate::loudness::{normalize_loudness, NormalizeOutcome, DEFAULT_TARGET_LUFS};

pub const RECOVERY_RATE: u32 = 16_000;
pub const WINDOW_MS: f64 = 32.0;
pub const HOP_MS: f64 = 8.0;

/// A spectrogram-to-spectrogram enhancement model.
pub trait Enhancer: Send + Sync {
    /// Must return a spectrogram with the input's geometry.
    fn enhance(&self, spec: &Spectrogram) -> Result<Spectrogram>;
    fn descriptor(&self) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityEnhancer;

impl Enhancer for IdentityEnhancer {
    fn enhance(&self, spec: &Spectrogram) -> Result<Spectrogram> {
        Ok(spec.clone())
    }

    fn descriptor(&self) -> String {
        "identity".into()
    }
}

/// Stationary-noise gate with phase passthrough.
///
/// The per-bin noise level is the `floor_percentile` of the magnitude over
/// frames, corrected for the Rayleigh bias of a low percentile and then
/// median-filtered across neighbouring bins so a sustained narrowband tone
/// is not mistaken for noise. The gain compares that level with the
/// locally smoothed power:
/// `G = sqrt(max(0, 1 - beta * N^2 / P))`, clamped to `[floor, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralGate {
    pub oversubtraction: f64,
    pub floor_percentile: f64,
    pub gain_floor_db: f64,
    pub time_radius: usize,
    pub freq_radius: usize,
    pub noise_median_radius: usize,
}

impl Default for SpectralGate {
    fn default() -> Self {
        Self {
            oversubtraction: 1.5,
            floor_percentile: 10.0,
            gain_floor_db: -25.0,
            time_radius: 4,
            freq_radius: 3,
            noise_median_radius: 8,
        }
    }
}

/// Linear-interpolated percentile of unsorted data (`p` in 0..=100).
fn percentile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
}

/// Mean over a clipped rectangular neighbourhood, row-major `rows x cols`.
fn box_mean(x: &[f64], rows: usize, cols: usize, r_row: usize, r_col: usize) -> Vec<f64> {
    let pass = |src: &[f64], along_rows: bool, r: usize| {
        let (outer, inner) = if along_rows { (cols, rows) } else { (rows, cols) };
        let idx = |o: usize, i: usize| if along_rows { i * cols + o } else { o * cols + i };
        let mut out = vec![0.0; src.len()];
        let mut prefix = vec![0.0; inner + 1];
        for o in 0..outer {
            for i in 0..inner {
                prefix[i + 1] = prefix[i] + src[idx(o, i)];
            }
            for i in 0..inner {
                let lo = i.saturating_sub(r);
                let hi = (i + r + 1).min(inner);
                out[idx(o, i)] = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
            }
        }
        out
    };
    pass(&pass(x, true, r_row), false, r_col)
}

impl SpectralGate {
    pub fn validate(&self) -> Result<()> {
        if !(self.oversubtraction >= 0.0 && self.oversubtraction.is_finite()) {
            return Err(Error::InvalidArgument(format!("oversubtraction {}", self.oversubtraction)));
        }
        if !(self.floor_percentile > 0.0 && self.floor_percentile < 100.0) {
            return Err(Error::InvalidArgument(format!("percentile {}", self.floor_percentile)));
        }
        if !(self.gain_floor_db <= 0.0) {
            return Err(Error::InvalidArgument(format!("gain floor {} dB", self.gain_floor_db)));
        }
        Ok(())
    }

    /// Per-bin noise power estimate.
    pub fn noise_power(&self, spec: &Spectrogram) -> Vec<f64> {
        let (frames, bins) = (spec.frames(), spec.n_bins());
        // For Rayleigh magnitudes the p-th percentile of |X|^2 sits at
        // -ln(1 - p) times the mean power.
        let bias = -(1.0 - self.floor_percentile / 100.0).ln();
        let mut column = vec![0.0; frames];
        let per_bin: Vec<f64> = (0..bins)
            .map(|k| {
                for (f, c) in column.iter_mut().enumerate() {
                    *c = spec.get(f, k).norm();
                }
                percentile(&mut column, self.floor_percentile).powi(2) / bias
            })
            .collect();
        let r = self.noise_median_radius;
        let mut window = Vec::with_capacity(2 * r + 1);
        (0..bins)
            .map(|k| {
                window.clear();
                window.extend_from_slice(&per_bin[k.saturating_sub(r)..(k + r + 1).min(bins)]);
                percentile(&mut window, 50.0)
            })
            .collect()
    }

    /// Real gain per time-frequency cell, row-major by frame.
    pub fn gains(&self, spec: &Spectrogram) -> Vec<f64> {
        let (frames, bins) = (spec.frames(), spec.n_bins());
        let noise = self.noise_power(spec);
        let power: Vec<f64> = spec.bins().iter().map(|c| c.norm_sqr()).collect();
        let smooth = box_mean(&power, frames, bins, self.time_radius, self.freq_radius);
        let floor = 10f64.powf(self.gain_floor_db / 20.0);
        smooth
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let n = noise[i % bins];
                let g = if p > 0.0 {
                    (1.0 - self.oversubtraction * n / p).max(0.0).sqrt()
                } else if n > 0.0 {
                    0.0
                } else {
                    1.0
                };
                g.clamp(floor, 1.0)
            })
            .collect()
    }
}

impl Enhancer for SpectralGate {
    fn enhance(&self, spec: &Spectrogram) -> Result<Spectrogram> {
        self.validate()?;
        let gains = self.gains(spec);
        let bins: Vec<Complex64> = spec.bins().iter().zip(&gains).map(|(c, g)| c * g).collect();
        spec.with_bins(bins)
    }

    fn descriptor(&self) -> String {
        format!(
            "spectral_gate(beta={}, p={}, floor={} dB)",
            self.oversubtraction, self.floor_percentile, self.gain_floor_db
        )
    }
}

pub fn spectral_gate_enhance(
    spec: &Spectrogram,
    oversubtraction: f64,
    floor_percentile: f64,
) -> Result<Spectrogram> {
    SpectralGate { oversubtraction, floor_percentile, ..SpectralGate::default() }.enhance(spec)
}

/// Runs a `{input}`/`{output}` WAV-to-WAV shell command on the resynthesized
/// signal and analyses its output with the same STFT geometry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalEnhancer {
    pub command: String,
}

impl Enhancer for ExternalEnhancer {
    fn enhance(&self, spec: &Spectrogram) -> Result<Spectrogram> {
        let audio = istft(spec)?;
        let dir = tempfile::tempdir().map_err(|e| Error::io("temporary directory", e))?;
        let input = dir.path().join("input.wav");
        let output = dir.path().join("output.wav");
        save_wav(&audio, &input, BitDepth::Float32)?;
        run_template(&self.command, &input, &output)
            .map_err(|e| Error::Enhancer(e.to_string()))?;
        let out = resample(&load_wav(&output)?, spec.sample_rate())?.with_len(spec.signal_len());
        let result = stft_with(&out, spec.config())?;
        if result.frames() != spec.frames() {
            return Err(Error::Enhancer("external enhancer changed geometry".into()));
        }
        Ok(result)
    }

    fn descriptor(&self) -> String {
        format!("external({})", self.command)
    }
}

/// Enhancer selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EnhancerConfig {
    Identity,
    SpectralGate(SpectralGate),
    External { command: String },
}

impl Default for EnhancerConfig {
    fn default() -> Self {
        Self::SpectralGate(SpectralGate::default())
    }
}

impl EnhancerConfig {
    pub fn build(&self) -> Result<Box<dyn Enhancer>> {
        Ok(match self {
            Self::Identity => Box::new(IdentityEnhancer),
            Self::SpectralGate(g) => {
                g.validate()?;
                Box::new(*g)
            }
            Self::External { command } => {
                if command.trim().is_empty() {
                    return Err(Error::Config("external enhancer needs a command".into()));
                }
                Box::new(ExternalEnhancer { command: command.clone() })
            }
        })
    }
}

impl fmt::Display for EnhancerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::SpectralGate(_) => "spectral_gate",
            Self::External { .. } => "external",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Recovered {
    /// Enhanced signal at 16 kHz.
    pub audio: AudioBuffer,
    pub loudness: NormalizeOutcome,
}

/// Resample to 16 kHz, normalize loudness, enhance, resynthesize.
///
/// Unmeasurable (silent) input skips normalization and is flagged in
/// [`Recovered::loudness`].
pub fn recover(x: &AudioBuffer, enhancer: &dyn Enhancer, target_lufs: f64) -> Result<Recovered> {
    let at_16k = resample(x, RECOVERY_RATE)?;
    let (normalized, loudness) = normalize_loudness(&at_16k, target_lufs)?;
    if loudness.unmeasurable {
        log::warn!("input loudness is unmeasurable; normalization skipped");
    }
    let spec = stft(&normalized, WINDOW_MS, HOP_MS)?;
    let enhanced = enhancer.enhance(&spec)?;
    if enhanced.frames() != spec.frames() || enhanced.n_bins() != spec.n_bins() {
        return Err(Error::Enhancer(format!(
            "{} changed spectrogram geometry",
            enhancer.descriptor()
        )));
    }
    if enhanced.bins().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Enhancer(format!("{} produced non-finite bins", enhancer.descriptor())));
    }
    let audio = istft(&enhanced)?;
    Ok(Recovered { audio, loudness })
}

pub fn recover_default(x: &AudioBuffer, enhancer: &dyn Enhancer) -> Result<Recovered> {
    recover(x, enhancer, DEFAULT_TARGET_LUFS)
}
