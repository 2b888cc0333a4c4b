//! Short-time Fourier analysis with exact overlap-add resynthesis.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Square-root periodic Hann; analysis and synthesis windows multiply to Hann.
    SqrtHann,
    /// Periodic Hann, used for power-spectrogram analysis.
    Hann,
}

impl Window {
    pub fn coefficients(self, size: usize) -> Vec<f64> {
        let n = size as f64;
        (0..size)
            .map(|i| {
                let hann = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n).cos();
                match self {
                    Window::SqrtHann => hann.sqrt(),
                    Window::Hann => hann,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: Window,
}

impl StftConfig {
    pub fn new(fft_size: usize, hop: usize, window: Window) -> Result<Self> {
        if fft_size < 2 || !fft_size.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "FFT size must be a power of two, got {fft_size}"
            )));
        }
        if hop == 0 || hop > fft_size {
            return Err(Error::InvalidArgument(format!(
                "hop must be in 1..={fft_size}, got {hop}"
            )));
        }
        Ok(Self {
            fft_size,
            hop,
            window,
        })
    }

    /// Square-root Hann analysis from durations in milliseconds.
    ///
    /// The window must land on a power of two and the hop on a quarter of it
    /// (32 ms / 8 ms at 16 kHz gives 512 / 128).
    pub fn from_ms(window_ms: f64, hop_ms: f64, sample_rate: u32) -> Result<Self> {
        let fft_size = (window_ms * sample_rate as f64 / 1000.0).round() as usize;
        let hop = (hop_ms * sample_rate as f64 / 1000.0).round() as usize;
        if fft_size < 4 || !fft_size.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "{window_ms} ms at {sample_rate} Hz is {fft_size} samples, not a power of two"
            )));
        }
        if hop * 4 != fft_size {
            return Err(Error::InvalidArgument(format!(
                "hop of {hop} samples is not a quarter of the {fft_size}-sample window"
            )));
        }
        Self::new(fft_size, hop, Window::SqrtHann)
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames produced for a centred analysis of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        len.div_ceil(self.hop) + 1
    }
}

/// Complex STFT, `frames x (fft_size / 2 + 1)`, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    bins: Vec<Complex64>,
    frames: usize,
    config: StftConfig,
    sample_rate: u32,
    signal_len: usize,
}

impl Spectrogram {
    /// Assembles a spectrogram from raw bins. Geometry is checked.
    pub fn from_bins(
        bins: Vec<Complex64>,
        config: StftConfig,
        sample_rate: u32,
        signal_len: usize,
    ) -> Result<Self> {
        let frames = config.frame_count(signal_len);
        if bins.len() != frames * config.n_bins() {
            return Err(Error::Geometry(format!(
                "{} bins for {frames} frames of {} bins",
                bins.len(),
                config.n_bins()
            )));
        }
        Ok(Self {
            bins,
            frames,
            config,
            sample_rate,
            signal_len,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn n_bins(&self) -> usize {
        self.config.n_bins()
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn fft_size(&self) -> usize {
        self.config.fft_size
    }

    pub fn hop(&self) -> usize {
        self.config.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    pub fn frame(&self, f: usize) -> &[Complex64] {
        let n = self.n_bins();
        &self.bins[f * n..(f + 1) * n]
    }

    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.bins[frame * self.n_bins() + bin]
    }

    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.config.fft_size as f64
    }

    /// Same geometry, new bins.
    pub fn with_bins(&self, bins: Vec<Complex64>) -> Result<Self> {
        Self::from_bins(bins, self.config, self.sample_rate, self.signal_len)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            bins: vec![Complex64::new(0.0, 0.0); self.bins.len()],
            ..self.clone()
        }
    }

    /// Time-domain energy implied by the bins through Parseval, for signals
    /// that vanish within half a window of either edge.
    pub fn parseval_energy(&self) -> f64 {
        let n = self.config.fft_size;
        let nb = self.n_bins();
        let w = self.config.window.coefficients(n);
        let overlap = w.iter().map(|v| v * v).sum::<f64>() / self.config.hop as f64;
        let mut total = 0.0;
        for f in 0..self.frames {
            let row = self.frame(f);
            for (k, c) in row.iter().enumerate() {
                let weight = if k == 0 || k == nb - 1 { 1.0 } else { 2.0 };
                total += weight * c.norm_sqr();
            }
        }
        total / (n as f64 * overlap)
    }
}

/// Planned forward/inverse transforms for one configuration.
pub(crate) struct StftEngine {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl StftEngine {
    pub(crate) fn new(config: StftConfig) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        Self {
            config,
            window: config.window.coefficients(config.fft_size),
            forward: planner.plan_fft_forward(config.fft_size),
            inverse: planner.plan_fft_inverse(config.fft_size),
        }
    }

    pub(crate) fn analyze(&self, x: &[f64], sample_rate: u32) -> Spectrogram {
        let n = self.config.fft_size;
        let hop = self.config.hop;
        let pad = n / 2;
        let frames = self.config.frame_count(x.len());
        let nb = self.config.n_bins();
        let mut bins = Vec::with_capacity(frames * nb);
        let mut input = self.forward.make_input_vec();
        let mut output = self.forward.make_output_vec();
        let mut scratch = self.forward.make_scratch_vec();
        for f in 0..frames {
            let start = (f * hop) as isize - pad as isize;
            for (i, slot) in input.iter_mut().enumerate() {
                let idx = start + i as isize;
                *slot = if idx >= 0 && (idx as usize) < x.len() {
                    x[idx as usize] * self.window[i]
                } else {
                    0.0
                };
            }
            self.forward
                .process_with_scratch(&mut input, &mut output, &mut scratch)
                .expect("buffer sizes come from the planner");
            bins.extend_from_slice(&output);
        }
        Spectrogram {
            bins,
            frames,
            config: self.config,
            sample_rate,
            signal_len: x.len(),
        }
    }

    pub(crate) fn synthesize(&self, spec: &Spectrogram) -> Vec<f64> {
        let n = self.config.fft_size;
        let hop = self.config.hop;
        let pad = n / 2;
        let nb = self.config.n_bins();
        let len = spec.signal_len;
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut freq = self.inverse.make_input_vec();
        let mut time = self.inverse.make_output_vec();
        let mut scratch = self.inverse.make_scratch_vec();
        let scale = 1.0 / n as f64;
        for f in 0..spec.frames {
            freq.copy_from_slice(spec.frame(f));
            // A real signal has purely real DC and Nyquist bins.
            freq[0].im = 0.0;
            freq[nb - 1].im = 0.0;
            self.inverse
                .process_with_scratch(&mut freq, &mut time, &mut scratch)
                .expect("buffer sizes come from the planner");
            let start = (f * hop) as isize - pad as isize;
            for i in 0..n {
                let idx = start + i as isize;
                if idx < 0 || idx as usize >= len {
                    continue;
                }
                let w = self.window[i];
                out[idx as usize] += time[i] * scale * w;
                norm[idx as usize] += w * w;
            }
        }
        for (o, w) in out.iter_mut().zip(&norm) {
            if *w > 1e-10 {
                *o /= w;
            } else {
                *o = 0.0;
            }
        }
        out
    }
}

/// Square-root-Hann STFT with window and hop in milliseconds.
pub fn stft(buffer: &AudioBuffer, window_ms: f64, hop_ms: f64) -> Result<Spectrogram> {
    let config = StftConfig::from_ms(window_ms, hop_ms, buffer.sample_rate())?;
    if buffer.len() < config.fft_size {
        return Err(Error::TooShort(format!(
            "{} samples is shorter than one {}-sample window",
            buffer.len(),
            config.fft_size
        )));
    }
    Ok(StftEngine::new(config).analyze(buffer.samples(), buffer.sample_rate()))
}

/// Centred STFT with an explicit configuration.
pub fn stft_with(buffer: &AudioBuffer, config: StftConfig) -> Result<Spectrogram> {
    if buffer.is_empty() {
        return Err(Error::TooShort("empty buffer".into()));
    }
    Ok(StftEngine::new(config).analyze(buffer.samples(), buffer.sample_rate()))
}

/// Weighted overlap-add inverse of [`stft`] / [`stft_with`].
pub fn istft(spec: &Spectrogram) -> Result<AudioBuffer> {
    let cfg = spec.config;
    if spec.bins.len() != spec.frames * cfg.n_bins() || spec.frames != cfg.frame_count(spec.signal_len)
    {
        return Err(Error::Geometry(format!(
            "{} frames of {} bins do not describe {} samples at hop {}",
            spec.frames,
            cfg.n_bins(),
            spec.signal_len,
            cfg.hop
        )));
    }
    let samples = StftEngine::new(cfg).synthesize(spec);
    AudioBuffer::new(samples, spec.sample_rate)
        .map_err(|_| Error::Geometry("non-finite spectrogram bins".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::white_noise;
    use proptest::prelude::*;

    fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn geometry_32ms_8ms_at_16k() {
        let b = white_noise(0.1, 1.0, 16_000, 0);
        let s = stft(&b, 32.0, 8.0).unwrap();
        assert_eq!(s.fft_size(), 512);
        assert_eq!(s.hop(), 128);
        assert_eq!(s.n_bins(), 257);
        assert_eq!(s.frames(), 16_000usize.div_ceil(128) + 1);
    }

    #[test]
    fn rejects_non_power_of_two_and_short_input() {
        let b = white_noise(0.1, 1.0, 16_000, 0);
        assert!(stft(&b, 30.0, 7.5).is_err());
        assert!(stft(&b, 32.0, 16.0).is_err());
        let short = AudioBuffer::zeros(100, 16_000).unwrap();
        assert!(matches!(stft(&short, 32.0, 8.0), Err(Error::TooShort(_))));
    }

    #[test]
    fn dc_energy_lands_in_bin_zero() {
        let b = AudioBuffer::new(vec![1.0; 4_000], 16_000).unwrap();
        let s = stft(&b, 32.0, 8.0).unwrap();
        // Interior frames see a full window of ones.
        for f in 4..s.frames() - 4 {
            let row = s.frame(f);
            let dc = row[0].norm_sqr();
            let rest: f64 = row[1..].iter().map(|c| c.norm_sqr()).sum();
            // The sqrt-Hann window itself leaks into a few low bins; the
            // energy is still overwhelmingly at DC.
            assert!(dc > 0.0);
            assert_eq!(row.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max), dc);
            assert!(rest < 0.25 * dc, "frame {f}: rest {rest} dc {dc}");
        }
    }

    #[test]
    fn parseval_with_quiet_edges() {
        let mut x = white_noise(0.2, 1.0, 16_000, 5).into_samples();
        let n = 512;
        let len = x.len();
        x[..n].iter_mut().for_each(|v| *v = 0.0);
        x[len - n..].iter_mut().for_each(|v| *v = 0.0);
        let b = AudioBuffer::new(x, 16_000).unwrap();
        let s = stft(&b, 32.0, 8.0).unwrap();
        let direct = b.energy();
        assert!((s.parseval_energy() - direct).abs() / direct < 1e-6);
    }

    #[test]
    fn zero_spectrogram_gives_silence() {
        let b = white_noise(0.2, 0.5, 16_000, 6);
        let s = stft(&b, 32.0, 8.0).unwrap().zeros_like();
        assert!(istft(&s).unwrap().samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn istft_is_linear() {
        let a = stft(&white_noise(0.2, 0.5, 16_000, 7), 32.0, 8.0).unwrap();
        let b = stft(&white_noise(0.3, 0.5, 16_000, 8), 32.0, 8.0).unwrap();
        let sum = a
            .with_bins(a.bins().iter().zip(b.bins()).map(|(x, y)| x + y).collect())
            .unwrap();
        let lhs = istft(&sum).unwrap();
        let ra = istft(&a).unwrap();
        let rb = istft(&b).unwrap();
        for ((l, x), y) in lhs.samples().iter().zip(ra.samples()).zip(rb.samples()) {
            assert!((l - (x + y)).abs() < 1e-9);
        }
    }

    #[test]
    fn inconsistent_geometry_is_rejected() {
        let s = stft(&white_noise(0.2, 0.5, 16_000, 9), 32.0, 8.0).unwrap();
        assert!(s.with_bins(vec![Complex64::new(0.0, 0.0); 10]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_is_exact(len in 512usize..6_000, seed in 0u64..1_000) {
            let b = white_noise(0.3, len as f64 / 16_000.0, 16_000, seed);
            let s = stft(&b, 32.0, 8.0).unwrap();
            let back = istft(&s).unwrap();
            prop_assert_eq!(back.len(), b.len());
            prop_assert!(rel_l2(back.samples(), b.samples()) < 1e-6);
        }

        #[test]
        fn hann_round_trip_is_exact(len in 2_048usize..10_000, seed in 0u64..1_000) {
            let b = white_noise(0.3, len as f64 / 48_000.0, 48_000, seed);
            let cfg = StftConfig::new(2_048, 512, Window::Hann).unwrap();
            let back = istft(&stft_with(&b, cfg).unwrap()).unwrap();
            prop_assert!(rel_l2(back.samples(), b.samples()) < 1e-6);
        }
    }
}
