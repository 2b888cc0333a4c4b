//! Synthetic signals for tests, examples and smoke runs.
//!
//! The "speech" here is a harmonic stack with a gliding pitch, a few fixed
//! formant resonances and a syllabic on/off envelope. It is not speech, but
//! it has the properties the metrics care about: harmonic structure,
//! temporal modulation and silent gaps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::audio::AudioBuffer;

pub fn sine(freq: f64, amplitude: f64, duration_s: f64, rate: u32) -> AudioBuffer {
    let len = (duration_s * rate as f64).round() as usize;
    AudioBuffer::from_fn(len, rate, |t| {
        amplitude * (2.0 * std::f64::consts::PI * freq * t).sin()
    })
    .expect("finite sine")
}

/// Gaussian white noise with the given RMS.
pub fn white_noise(rms: f64, duration_s: f64, rate: u32, seed: u64) -> AudioBuffer {
    let len = (duration_s * rate as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..len)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            rms * v
        })
        .collect();
    AudioBuffer::new(samples, rate).expect("finite noise")
}

/// Parameters of the synthetic harmonic "speech" generator.
#[derive(Debug, Clone)]
pub struct HarmonicSpeech {
    pub f0: f64,
    pub glide: f64,
    pub syllable_rate: f64,
    pub duty: f64,
    pub peak: f64,
    pub seed: u64,
}

impl Default for HarmonicSpeech {
    fn default() -> Self {
        Self {
            f0: 140.0,
            glide: 0.15,
            syllable_rate: 3.5,
            duty: 0.7,
            peak: 0.5,
            seed: 0,
        }
    }
}

impl HarmonicSpeech {
    pub fn with_seed(seed: u64) -> Self {
        // Spread pitch and rhythm across items.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = |rng: &mut ChaCha8Rng| -> f64 { rand::Rng::random::<f64>(rng) };
        Self {
            f0: 100.0 + 120.0 * u(&mut rng),
            glide: 0.05 + 0.2 * u(&mut rng),
            syllable_rate: 2.5 + 2.0 * u(&mut rng),
            duty: 0.6 + 0.2 * u(&mut rng),
            peak: 0.5,
            seed,
        }
    }

    pub fn render(&self, duration_s: f64, rate: u32) -> AudioBuffer {
        let len = (duration_s * rate as f64).round() as usize;
        let nyquist = rate as f64 / 2.0;
        let formants = [(500.0, 120.0), (1_500.0, 200.0), (2_600.0, 300.0)];
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut phase = 0.0;
        let mut samples = Vec::with_capacity(len);
        for i in 0..len {
            let t = i as f64 / rate as f64;
            let f0 = self.f0 * (1.0 + self.glide * (two_pi * 0.7 * t).sin());
            phase += two_pi * f0 / rate as f64;

            let syllable = (t * self.syllable_rate).fract();
            let envelope = if syllable < self.duty {
                (std::f64::consts::PI * syllable / self.duty).sin().powi(2)
            } else {
                0.0
            };

            let mut v = 0.0;
            let mut k = 1.0;
            while k * f0 < nyquist.min(7_000.0) {
                let f = k * f0;
                let resonance: f64 = formants
                    .iter()
                    .map(|(fc, bw)| 1.0 / (1.0 + ((f - fc) / bw).powi(2)))
                    .sum();
                v += (0.2 + resonance) / k.sqrt() * (k * phase).sin();
                k += 1.0;
            }
            samples.push(envelope * v);
        }
        let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let gain = if peak > 0.0 { self.peak / peak } else { 0.0 };
        AudioBuffer::new(samples.into_iter().map(|s| s * gain).collect(), rate)
            .expect("finite speech")
    }
}

#[cfg(test)]
pub(crate) use testutil::*;


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speech_has_gaps_and_peak() {
        let s = HarmonicSpeech::default().render(2.0, 16_000);
        assert!((s.peak() - 0.5).abs() < 1e-12);
        let zeros = s.samples().iter().filter(|v| **v == 0.0).count();
        assert!(zeros as f64 > 0.2 * s.len() as f64);
    }

    #[test]
    fn noise_rms_close_to_request() {
        let n = white_noise(0.1, 2.0, 16_000, 1);
        assert!((n.rms() - 0.1).abs() < 0.002);
    }
}
