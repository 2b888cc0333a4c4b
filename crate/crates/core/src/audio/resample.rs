//! Rational-ratio windowed-sinc resampling.

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Kaiser window shape parameter.
const KAISER_BETA: f64 = 12.0;
/// Zero crossings of the sinc kernel on each side, measured at the lower
/// of the two Nyquist frequencies. 64 gives 128+ taps per phase.
const ZERO_CROSSINGS: usize = 64;
/// Cutoff relative to the lower Nyquist frequency.
const ROLLOFF: f64 = 0.95;

/// Polyphase resampler for a fixed `source -> target` ratio.
///
/// The ratio is reduced to `up / down`; output sample `m` sits at source
/// position `m * down / up`, evaluated with a Kaiser-windowed sinc whose
/// cutoff is `ROLLOFF` times the lower of the two Nyquist frequencies.
#[derive(Debug, Clone)]
pub struct Resampler {
    source_rate: u32,
    target_rate: u32,
    up: usize,
    down: usize,
    half_taps: usize,
    /// `up` rows of `2 * half_taps` taps.
    table: Vec<f64>,
}

impl Resampler {
    pub fn new(source_rate: u32, target_rate: u32) -> Result<Self> {
        if source_rate == 0 || target_rate == 0 {
            return Err(Error::InvalidArgument(format!(
                "sample rates must be positive, got {source_rate} -> {target_rate}"
            )));
        }
        let g = gcd(source_rate as u64, target_rate as u64);
        let up = (target_rate as u64 / g) as usize;
        let down = (source_rate as u64 / g) as usize;

        // Cutoff in cycles per source sample.
        let cutoff = 0.5 * ROLLOFF * (up as f64 / down as f64).min(1.0);
        let half_width = ZERO_CROSSINGS as f64 / (2.0 * cutoff);
        let half_taps = half_width.ceil() as usize;
        let taps = 2 * half_taps;
        let i0_beta = bessel_i0(KAISER_BETA);

        let mut table = vec![0.0; up * taps];
        for phase in 0..up {
            let frac = phase as f64 / up as f64;
            let row = &mut table[phase * taps..(phase + 1) * taps];
            for (k, tap) in row.iter_mut().enumerate() {
                // Source offset j in [-half_taps + 1, half_taps].
                let j = k as f64 - (half_taps as f64 - 1.0);
                let u = j - frac;
                let x = u / half_width;
                if x.abs() >= 1.0 {
                    continue;
                }
                let window = bessel_i0(KAISER_BETA * (1.0 - x * x).sqrt()) / i0_beta;
                *tap = 2.0 * cutoff * sinc(2.0 * cutoff * u) * window;
            }
            // Unit DC gain per phase.
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|t| *t /= sum);
        }

        Ok(Self {
            source_rate,
            target_rate,
            up,
            down,
            half_taps,
            table,
        })
    }

    pub fn source_rate(&self) -> u32 {
        self.source_rate
    }

    pub fn target_rate(&self) -> u32 {
        self.target_rate
    }

    /// Taps used for each output phase.
    pub fn taps_per_phase(&self) -> usize {
        2 * self.half_taps
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        ((input_len * self.up + self.down / 2) / self.down).max(usize::from(input_len > 0))
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        if self.up == self.down {
            return input.to_vec();
        }
        let n_out = self.output_len(input.len());
        let taps = self.taps_per_phase();
        let n = input.len() as isize;
        let mut out = Vec::with_capacity(n_out);
        for m in 0..n_out {
            let pos = m * self.down;
            let base = (pos / self.up) as isize;
            let phase = pos % self.up;
            let row = &self.table[phase * taps..(phase + 1) * taps];
            let first = base - (self.half_taps as isize - 1);
            let lo = (-first).max(0) as usize;
            let hi = ((n - first).max(0) as usize).min(taps);
            let mut acc = 0.0;
            for k in lo..hi {
                acc += row[k] * input[(first + k as isize) as usize];
            }
            out.push(acc);
        }
        out
    }
}

/// Resamples `buffer` to `target_rate` with band-limited interpolation.
pub fn resample(buffer: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::InvalidArgument("target rate must be positive".into()));
    }
    if buffer.sample_rate() == target_rate {
        return Ok(buffer.clone());
    }
    let resampler = Resampler::new(buffer.sample_rate(), target_rate)?;
    Ok(AudioBuffer::from_parts_unchecked(
        resampler.process(buffer.samples()),
        target_rate,
    ))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Zeroth-order modified Bessel function of the first kind.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= (half / k) * (half / k);
        sum += term;
        k += 1.0;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::sine;

    /// Amplitude of the component at `freq` by direct correlation over the
    /// middle of the signal (edges excluded to skip filter transients).
    fn tone_amplitude(x: &[f64], rate: u32, freq: f64) -> f64 {
        let skip = x.len() / 5;
        let body = &x[skip..x.len() - skip];
        let w = 2.0 * std::f64::consts::PI * freq / rate as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for (i, v) in body.iter().enumerate() {
            let t = (i + skip) as f64;
            c += v * (w * t).cos();
            s += v * (w * t).sin();
        }
        2.0 * (c * c + s * s).sqrt() / body.len() as f64
    }

    fn rms_middle(x: &[f64]) -> f64 {
        let skip = x.len() / 5;
        let body = &x[skip..x.len() - skip];
        (body.iter().map(|v| v * v).sum::<f64>() / body.len() as f64).sqrt()
    }

    #[test]
    fn identity_rate_is_unchanged() {
        let b = sine(440.0, 0.3, 0.1, 16_000);
        assert_eq!(resample(&b, 16_000).unwrap(), b);
    }

    #[test]
    fn at_least_64_taps_per_phase() {
        for (s, t) in [(16_000, 48_000), (48_000, 10_000), (44_100, 48_000), (48_000, 16_000)] {
            assert!(Resampler::new(s, t).unwrap().taps_per_phase() >= 64);
        }
    }

    #[test]
    fn sine_16k_to_48k_keeps_frequency_and_amplitude() {
        let b = sine(1_000.0, 0.5, 1.0, 16_000);
        let up = resample(&b, 48_000).unwrap();
        assert_eq!(up.len(), 48_000);
        let amp = tone_amplitude(up.samples(), 48_000, 1_000.0);
        assert!((amp - 0.5).abs() / 0.5 < 0.005, "amplitude {amp}");
        // FFT-peak oracle: the strongest DFT bin sits at 1 kHz.
        let peak = crate::corpus::dft_peak_hz(up.samples(), 48_000);
        assert!((peak - 1_000.0).abs() <= 1.0, "peak at {peak}");
    }

    #[test]
    fn stopband_6k_to_10k_is_removed() {
        let b = sine(6_000.0, 0.5, 1.0, 48_000);
        let down = resample(&b, 10_000).unwrap();
        let ratio = rms_middle(down.samples()) / rms_middle(b.samples());
        assert!(ratio < 0.01, "stopband leakage ratio {ratio}");
    }

    #[test]
    fn passband_energy_within_tenth_db() {
        for (src, dst, f) in [
            (48_000, 16_000, 3_000.0),
            (16_000, 48_000, 5_000.0),
            (44_100, 48_000, 12_000.0),
            (48_000, 10_000, 4_000.0),
        ] {
            let b = sine(f, 0.5, 1.0, src);
            let r = resample(&b, dst).unwrap();
            let db = 20.0 * (rms_middle(r.samples()) / rms_middle(b.samples())).log10();
            assert!(db.abs() < 0.1, "{src}->{dst} at {f} Hz: {db} dB");
        }
    }

    #[test]
    fn output_length_rounds_ratio() {
        let r = Resampler::new(44_100, 16_000).unwrap();
        for n in [1usize, 100, 44_100, 12_345] {
            let expected = (n as f64 * 16_000.0 / 44_100.0).round() as isize;
            assert!((r.output_len(n) as isize - expected).abs() <= 1);
        }
    }

    #[test]
    fn zero_target_rate_is_an_error() {
        let b = sine(440.0, 0.3, 0.1, 16_000);
        assert!(resample(&b, 0).is_err());
    }

    #[test]
    fn linear_in_amplitude() {
        let b = crate::corpus::white_noise(0.05, 0.3, 16_000, 3);
        let a = 2.0;
        let lhs = resample(&b.scaled(a), 24_000).unwrap();
        let rhs = resample(&b, 24_000).unwrap().scaled(a);
        assert_eq!(lhs.samples(), rhs.samples());

        let a = 0.3;
        let lhs = resample(&b.scaled(a), 24_000).unwrap();
        let rhs = resample(&b, 24_000).unwrap().scaled(a);
        for (x, y) in lhs.samples().iter().zip(rhs.samples()) {
            assert!((x - y).abs() <= 1e-15);
        }
    }
}
