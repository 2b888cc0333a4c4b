//! Mel-spectrogram analysis and Griffin-Lim inversion.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stft::{Spectrogram, StftConfig, StftEngine, Window};
use super::AudioBuffer;
use crate::error::{Error, Result};

/// dB floor applied to power mel values.
pub const DB_FLOOR: f64 = -100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for MelConfig {
    /// Full-band analysis: 2048-point FFT, hop 512, 128 bands over 0-24 kHz.
    fn default() -> Self {
        Self {
            sample_rate: 48_000,
            fft_size: 2_048,
            hop: 512,
            n_mels: 128,
            f_min: 0.0,
            f_max: 24_000.0,
        }
    }
}

impl MelConfig {
    /// The 64-band image used for spectrogram SSIM at `rate`.
    pub fn ssim_image(rate: u32) -> Self {
        Self {
            sample_rate: rate,
            fft_size: 1_024,
            hop: 256,
            n_mels: 64,
            f_min: 0.0,
            f_max: rate as f64 / 2.0,
        }
    }

    pub fn stft_config(&self) -> Result<StftConfig> {
        StftConfig::new(self.fft_size, self.hop, Window::Hann)
    }

    fn validate(&self) -> Result<()> {
        if self.n_mels == 0 {
            return Err(Error::InvalidArgument("n_mels must be positive".into()));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max)
            || self.f_max > self.sample_rate as f64 / 2.0 + 1e-9
        {
            return Err(Error::InvalidArgument(format!(
                "mel range [{}, {}] invalid at {} Hz",
                self.f_min, self.f_max, self.sample_rate
            )));
        }
        self.stft_config().map(|_| ())
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-scale filterbank stored as sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    n_bins: usize,
    /// `(first bin, weights)` per mel band.
    rows: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.rows.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> (usize, &[f64]) {
        let (start, w) = &self.rows[m];
        (*start, w)
    }

    /// Dense `n_mels x n_bins` weights.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|(start, w)| {
                let mut row = vec![0.0; self.n_bins];
                row[*start..*start + w.len()].copy_from_slice(w);
                row
            })
            .collect()
    }

    /// `out[m] = sum_k W[m][k] * power[k]`.
    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for ((start, w), o) in self.rows.iter().zip(out.iter_mut()) {
            *o = w.iter().zip(&power[*start..]).map(|(a, b)| a * b).sum();
        }
    }

    /// `out[k] = sum_m W[m][k] * mel[m]`.
    pub fn apply_transpose(&self, mel: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for ((start, w), &v) in self.rows.iter().zip(mel) {
            for (o, a) in out[*start..].iter_mut().zip(w) {
                *o += a * v;
            }
        }
    }
}

pub fn mel_filterbank(config: &MelConfig) -> Result<MelFilterbank> {
    config.validate()?;
    let n_bins = config.fft_size / 2 + 1;
    let lo = hz_to_mel(config.f_min);
    let hi = hz_to_mel(config.f_max);
    let edges: Vec<f64> = (0..config.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (config.n_mels + 1) as f64))
        .collect();
    let bin_hz = config.sample_rate as f64 / config.fft_size as f64;

    let mut rows = Vec::with_capacity(config.n_mels);
    for m in 0..config.n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let weights: Vec<(usize, f64)> = (0..n_bins)
            .filter_map(|k| {
                let f = k as f64 * bin_hz;
                let up = (f - left) / (center - left);
                let down = (right - f) / (right - center);
                let w = up.min(down);
                (w > 0.0).then_some((k, w))
            })
            .collect();
        let row = match (weights.first(), weights.last()) {
            (Some(&(first, _)), Some(&(last, _))) => {
                let mut w = vec![0.0; last - first + 1];
                for (k, v) in weights {
                    w[k - first] = v;
                }
                (first, w)
            }
            _ => {
                // Band narrower than one bin: give it the nearest bin so that
                // no row is empty.
                let k = ((center / bin_hz).round() as usize).min(n_bins - 1);
                (k, vec![1.0])
            }
        };
        rows.push(row);
    }
    Ok(MelFilterbank { n_bins, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MelScale {
    Power,
    Db,
}

/// `frames x n_mels` mel energies, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    values: Vec<f64>,
    frames: usize,
    config: MelConfig,
    scale: MelScale,
}

impl MelSpectrogram {
    pub fn new(values: Vec<f64>, frames: usize, config: MelConfig, scale: MelScale) -> Result<Self> {
        if values.len() != frames * config.n_mels {
            return Err(Error::Geometry(format!(
                "{} values for {frames} x {} mel matrix",
                values.len(),
                config.n_mels
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite mel value".into()));
        }
        Ok(Self {
            values,
            frames,
            config,
            scale,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn n_mels(&self) -> usize {
        self.config.n_mels
    }

    pub fn config(&self) -> &MelConfig {
        &self.config
    }

    pub fn scale(&self) -> MelScale {
        self.scale
    }

    pub fn get(&self, frame: usize, mel: usize) -> f64 {
        self.values[frame * self.config.n_mels + mel]
    }

    pub fn frame(&self, f: usize) -> &[f64] {
        let n = self.config.n_mels;
        &self.values[f * n..(f + 1) * n]
    }

    /// `10 log10(max(p, 1e-10))`, so the floor is exactly -100 dB.
    pub fn to_db(&self) -> Self {
        match self.scale {
            MelScale::Db => self.clone(),
            MelScale::Power => Self {
                values: self
                    .values
                    .iter()
                    .map(|&p| 10.0 * p.max(10f64.powf(DB_FLOOR / 10.0)).log10())
                    .collect(),
                scale: MelScale::Db,
                ..self.clone()
            },
        }
    }

    pub fn to_power(&self) -> Self {
        match self.scale {
            MelScale::Power => self.clone(),
            MelScale::Db => Self {
                values: self.values.iter().map(|&d| 10f64.powf(d / 10.0)).collect(),
                scale: MelScale::Power,
                ..self.clone()
            },
        }
    }

    /// First `frames` frames.
    pub fn truncated(&self, frames: usize) -> Self {
        let frames = frames.min(self.frames);
        Self {
            values: self.values[..frames * self.config.n_mels].to_vec(),
            frames,
            ..self.clone()
        }
    }
}

/// Power mel-spectrogram of `buffer` (Hann-windowed, centred frames).
pub fn mel_spectrogram(buffer: &AudioBuffer, config: &MelConfig) -> Result<MelSpectrogram> {
    buffer.require_rate(config.sample_rate)?;
    if buffer.is_empty() {
        return Err(Error::TooShort("empty buffer".into()));
    }
    let bank = mel_filterbank(config)?;
    let engine = StftEngine::new(config.stft_config()?);
    let spec = engine.analyze(buffer.samples(), buffer.sample_rate());
    Ok(mel_from_spectrogram(&spec, &bank, config))
}

fn mel_from_spectrogram(spec: &Spectrogram, bank: &MelFilterbank, config: &MelConfig) -> MelSpectrogram {
    let mut values = vec![0.0; spec.frames() * config.n_mels];
    let mut power = vec![0.0; spec.n_bins()];
    for f in 0..spec.frames() {
        for (p, c) in power.iter_mut().zip(spec.frame(f)) {
            *p = c.norm_sqr();
        }
        bank.apply(&power, &mut values[f * config.n_mels..(f + 1) * config.n_mels]);
    }
    MelSpectrogram {
        values,
        frames: spec.frames(),
        config: *config,
        scale: MelScale::Power,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GriffinLimConfig {
    pub iterations: usize,
    pub momentum: f64,
    /// Multiplicative-update iterations for the non-negative mel inversion.
    pub nnls_iterations: usize,
    /// Seed of the random initial phase.
    pub seed: u64,
}

impl Default for GriffinLimConfig {
    fn default() -> Self {
        Self {
            iterations: 60,
            momentum: 0.99,
            nnls_iterations: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MelInversion {
    pub audio: AudioBuffer,
    /// Linear magnitude estimate recovered from the mel values, per frame.
    pub magnitude: Vec<f64>,
    /// Spectral convergence `|| |S_i| - S || / ||S||` after each iteration.
    pub convergence: Vec<f64>,
}

/// Mel-to-waveform with default Griffin-Lim settings and `iterations` rounds.
pub fn invert_mel(mel: &MelSpectrogram, iterations: usize) -> Result<AudioBuffer> {
    let config = GriffinLimConfig {
        iterations,
        ..GriffinLimConfig::default()
    };
    Ok(invert_mel_with(mel, &config)?.audio)
}

/// Non-negative least-squares magnitude recovery followed by fast
/// Griffin-Lim phase reconstruction.
pub fn invert_mel_with(mel: &MelSpectrogram, gl: &GriffinLimConfig) -> Result<MelInversion> {
    if mel.scale != MelScale::Power {
        return Err(Error::InvalidArgument("mel inversion needs power-scale values".into()));
    }
    if let Some(v) = mel.values.iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidArgument(format!("negative mel value {v}")));
    }
    if !(0.0..1.0).contains(&gl.momentum) {
        return Err(Error::InvalidArgument(format!(
            "momentum must be in [0, 1), got {}",
            gl.momentum
        )));
    }
    let config = mel.config;
    let bank = mel_filterbank(&config)?;
    let stft_config = config.stft_config()?;
    let nb = stft_config.n_bins();
    let frames = mel.frames;
    let signal_len = (frames.max(1) - 1) * config.hop;

    let magnitude = nnls_magnitude(mel, &bank, gl.nnls_iterations);

    let engine = StftEngine::new(stft_config);
    let mut rng = ChaCha8Rng::seed_from_u64(gl.seed);
    let mut angles: Vec<Complex64> = (0..frames * nb)
        .map(|_| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * rng.random::<f64>()))
        .collect();
    let target_norm = magnitude.iter().map(|m| m * m).sum::<f64>().sqrt();
    let to_spec = |angles: &[Complex64]| {
        let bins = magnitude.iter().zip(angles).map(|(m, a)| a * *m).collect();
        Spectrogram::from_bins(bins, stft_config, config.sample_rate, signal_len)
    };

    let blend = gl.momentum / (1.0 + gl.momentum);
    let mut previous = vec![Complex64::new(0.0, 0.0); frames * nb];
    let mut convergence = Vec::with_capacity(gl.iterations);
    for _ in 0..gl.iterations {
        let inverse = engine.synthesize(&to_spec(&angles)?);
        let rebuilt = engine.analyze(&inverse, config.sample_rate);
        let mut err = 0.0;
        for (((a, r), p), m) in angles
            .iter_mut()
            .zip(rebuilt.bins())
            .zip(previous.iter())
            .zip(&magnitude)
        {
            err += (r.norm() - m).powi(2);
            let v = r - p * blend;
            let n = v.norm();
            *a = if n > 1e-16 { v / n } else { Complex64::new(1.0, 0.0) };
        }
        convergence.push(if target_norm > 0.0 { err.sqrt() / target_norm } else { 0.0 });
        previous.copy_from_slice(rebuilt.bins());
    }
    let samples = engine.synthesize(&to_spec(&angles)?);
    Ok(MelInversion {
        audio: AudioBuffer::new(samples, config.sample_rate)
            .map_err(|_| Error::Geometry("non-finite inversion".into()))?,
        magnitude,
        convergence,
    })
}

/// Per-frame `min ||W s - m||^2, s >= 0` by multiplicative updates, returning `sqrt(s)`.
fn nnls_magnitude(mel: &MelSpectrogram, bank: &MelFilterbank, iterations: usize) -> Vec<f64> {
    let nb = bank.n_bins();
    let nm = bank.n_mels();
    let mut column_mass = vec![0.0; nb];
    bank.apply_transpose(&vec![1.0; nm], &mut column_mass);

    let mut out = Vec::with_capacity(mel.frames * nb);
    let mut wt_m = vec![0.0; nb];
    let mut ws = vec![0.0; nm];
    let mut wtws = vec![0.0; nb];
    for f in 0..mel.frames {
        let m = mel.frame(f);
        bank.apply_transpose(m, &mut wt_m);
        // Start from the mel energy spread back over each band's bins.
        let mut s: Vec<f64> = wt_m
            .iter()
            .zip(&column_mass)
            .map(|(a, c)| if *c > 0.0 { a / (c * c) } else { 0.0 })
            .collect();
        for _ in 0..iterations {
            bank.apply(&s, &mut ws);
            bank.apply_transpose(&ws, &mut wtws);
            for ((sk, num), den) in s.iter_mut().zip(&wt_m).zip(&wtws) {
                if *den > 0.0 {
                    *sk *= num / den;
                }
            }
        }
        out.extend(s.iter().map(|p| p.max(0.0).sqrt()));
    }
    out
}
