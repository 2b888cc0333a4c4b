//! Synthetic degradation: additive noise, reverberation, clipping, band
//! limiting and lossy coding, applied as `d((y + n) * h)`.

mod codec;
mod filter;
mod rir;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

pub use codec::{codec_artifact, mu_law_quantize, Codec, ExternalCodec, MU};
pub use filter::lowpass;
pub use rir::{apply_reverb, synth_rir, RirSpec, DECAY_60DB, MAX_T60_S};

// Independent random streams derived from one spec seed.
const STREAM_NOISE_CROP: u64 = 1;
const STREAM_RIR: u64 = 2;

/// Which distortion distribution to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Train,
    #[default]
    Eval,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "eval" => Ok(Self::Eval),
            other => Err(Error::InvalidArgument(format!("unknown profile `{other}`"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Eval => "eval",
        })
    }
}

/// One concrete draw of distortion parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    /// `f64::INFINITY` disables additive noise.
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    pub t60_s: f64,
    pub apply_reverb: bool,
    pub clip_threshold: Option<f64>,
    pub lowpass_hz: Option<f64>,
    pub codec: Codec,
    pub seed: u64,
}

// JSON has no infinity; a null SNR means "no noise".
mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl DegradationSpec {
    /// Every stage disabled: `degrade` returns the clean input.
    pub fn identity(seed: u64) -> Self {
        Self {
            snr_db: f64::INFINITY,
            t60_s: 0.3,
            apply_reverb: false,
            clip_threshold: None,
            lowpass_hz: None,
            codec: Codec::None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("snr {} dB", self.snr_db)));
        }
        if !(self.t60_s > 0.0 && self.t60_s <= MAX_T60_S) {
            return Err(Error::InvalidArgument(format!("t60 {} s", self.t60_s)));
        }
        if let Some(c) = self.clip_threshold {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::InvalidArgument(format!("clip threshold {c}")));
            }
        }
        if let Some(f) = self.lowpass_hz {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidArgument(format!("lowpass {f} Hz")));
            }
        }
        Ok(())
    }
}

/// Draws a degradation. All variates are drawn unconditionally so that the
/// stream position never depends on earlier outcomes.
pub fn sample_degradation(profile: Profile, seed: u64) -> DegradationSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snr_u: f64 = rng.random();
    let t60_u: f64 = rng.random();
    let reverb_u: f64 = rng.random();
    let clip_gate: f64 = rng.random();
    let clip_u: f64 = rng.random();
    let lp_gate: f64 = rng.random();
    let lp_u: f64 = rng.random();
    let codec_gate: f64 = rng.random();
    let codec_u: f64 = rng.random();
    let lerp = |u: f64, lo: f64, hi: f64| lo + u * (hi - lo);
    let codec = (codec_gate < 0.5).then(|| Codec::Proxy {
        cutoff_hz: lerp(codec_u, 4_000.0, 12_000.0),
    });
    let codec = codec.unwrap_or_default();
    match profile {
        Profile::Eval => DegradationSpec {
            snr_db: lerp(snr_u, -5.0, 10.0),
            t60_s: lerp(t60_u, 0.1, 0.5),
            apply_reverb: true,
            clip_threshold: None,
            lowpass_hz: None,
            codec,
            seed,
        },
        Profile::Train => DegradationSpec {
            snr_db: lerp(snr_u, -5.0, 20.0),
            t60_s: lerp(t60_u, 0.05, 1.0),
            apply_reverb: reverb_u < 0.5,
            clip_threshold: (clip_gate < 0.2).then(|| lerp(clip_u, 0.25, 0.9)),
            lowpass_hz: (lp_gate < 0.3).then(|| lerp(lp_u, 2_000.0, 8_000.0)),
            codec,
            seed,
        },
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Gain applied to the noise so the mixture has the requested SNR.
pub fn snr_gain(speech_rms: f64, noise_rms: f64, snr_db: f64) -> f64 {
    speech_rms / noise_rms * 10f64.powf(-snr_db / 20.0)
}

/// A `len`-sample excerpt of `noise`: a random crop when it is long enough,
/// otherwise a loop starting at a random offset.
pub fn noise_excerpt(noise: &AudioBuffer, len: usize, seed: u64) -> Result<AudioBuffer> {
    if noise.is_empty() {
        return Err(Error::InvalidArgument("empty noise".into()));
    }
    let mut rng = stream_rng(seed, STREAM_NOISE_CROP);
    let n = noise.samples();
    let samples = if n.len() >= len {
        let offset = rng.random_range(0..=n.len() - len);
        n[offset..offset + len].to_vec()
    } else {
        let offset = rng.random_range(0..n.len());
        (0..len).map(|i| n[(offset + i) % n.len()]).collect()
    };
    Ok(AudioBuffer::from_parts_unchecked(samples, noise.sample_rate()))
}

/// `speech + g * noise` with `g` chosen for the target SNR.
pub fn mix_at_snr(
    speech: &AudioBuffer,
    noise: &AudioBuffer,
    snr_db: f64,
    seed: u64,
) -> Result<AudioBuffer> {
    if speech.sample_rate() != noise.sample_rate() {
        return Err(Error::RateMismatch(speech.sample_rate(), noise.sample_rate()));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(format!("snr {snr_db} dB")));
    }
    if speech.rms() == 0.0 {
        return Err(Error::ZeroEnergy("speech"));
    }
    if snr_db == f64::INFINITY {
        return Ok(speech.clone());
    }
    let excerpt = noise_excerpt(noise, speech.len(), seed)?;
    if excerpt.rms() == 0.0 {
        return Err(Error::ZeroEnergy("noise"));
    }
    let g = snr_gain(speech.rms(), excerpt.rms(), snr_db);
    let mixed = speech
        .samples()
        .iter()
        .zip(excerpt.samples())
        .map(|(s, n)| s + g * n)
        .collect();
    AudioBuffer::new(mixed, speech.sample_rate())
}

/// Hard clipping to `[-threshold, threshold]`.
pub fn clip(buffer: &AudioBuffer, threshold: f64) -> Result<AudioBuffer> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("clip threshold {threshold}")));
    }
    let samples = buffer.samples().iter().map(|v| v.clamp(-threshold, threshold)).collect();
    Ok(AudioBuffer::from_parts_unchecked(samples, buffer.sample_rate()))
}

/// Degraded signal together with the clean reference it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradedPair {
    pub degraded: AudioBuffer,
    pub clean: AudioBuffer,
}

/// Applies mixing, reverb, clipping, lowpass and codec in that order.
///
/// When reverb is enabled and no `rir` is given, one is synthesized from
/// `spec.t60_s`. `noise` may be omitted only when `spec.snr_db` is infinite.
pub fn degrade(
    clean: &AudioBuffer,
    noise: Option<&AudioBuffer>,
    rir: Option<&AudioBuffer>,
    spec: &DegradationSpec,
) -> Result<DegradedPair> {
    spec.validate()?;
    let mut x = match noise {
        _ if spec.snr_db == f64::INFINITY => clean.clone(),
        Some(n) => mix_at_snr(clean, n, spec.snr_db, spec.seed)?,
        None => {
            return Err(Error::InvalidArgument(format!(
                "snr {} dB requested without a noise signal",
                spec.snr_db
            )))
        }
    };
    if spec.apply_reverb {
        x = match rir {
            Some(h) => apply_reverb(&x, h)?,
            None => {
                let seed = stream_rng(spec.seed, STREAM_RIR).next_u64();
                let h = synth_rir(spec.t60_s, spec.t60_s, clean.sample_rate(), seed)?;
                apply_reverb(&x, &h)?
            }
        };
    }
    if let Some(t) = spec.clip_threshold {
        x = clip(&x, t)?;
    }
    if let Some(f) = spec.lowpass_hz {
        let nyquist = clean.sample_rate() as f64 / 2.0;
        if f < nyquist {
            x = lowpass(&x, f)?;
        }
    }
    x = codec_artifact(&x, &spec.codec)?;
    Ok(DegradedPair { degraded: x, clean: clean.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{sine, testutil::magnitude_spectrum, white_noise, HarmonicSpeech};

    fn speech() -> AudioBuffer {
        HarmonicSpeech::with_seed(5).render(1.0, 16_000)
    }

    #[test]
    fn snr_gain_formula() {
        assert_eq!(snr_gain(0.3, 0.3, 0.0), 1.0);
        assert!((snr_gain(0.2, 0.1, 20.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn remeasured_snr_matches_target() {
        let s = speech();
        let n = white_noise(0.1, 3.0, 16_000, 1);
        for snr in [-5.0, 0.0, 2.5, 10.0] {
            let m = mix_at_snr(&s, &n, snr, 11).unwrap();
            let added: Vec<f64> = m.samples().iter().zip(s.samples()).map(|(a, b)| a - b).collect();
            let pn: f64 = added.iter().map(|v| v * v).sum();
            let measured = 10.0 * (s.energy() / pn).log10();
            assert!((measured - snr).abs() < 0.01, "{snr}: {measured}");
        }
    }

    #[test]
    fn short_noise_is_looped() {
        let s = speech();
        let n = white_noise(0.1, 0.3, 16_000, 1);
        let m = mix_at_snr(&s, &n, 0.0, 3).unwrap();
        assert_eq!(m.len(), s.len());
    }

    #[test]
    fn zero_energy_inputs_are_rejected() {
        let z = AudioBuffer::zeros(16_000, 16_000).unwrap();
        let n = white_noise(0.1, 1.0, 16_000, 1);
        assert!(matches!(mix_at_snr(&z, &n, 0.0, 0), Err(Error::ZeroEnergy(_))));
        assert!(matches!(mix_at_snr(&speech(), &z, 0.0, 0), Err(Error::ZeroEnergy(_))));
    }

    #[test]
    fn clip_behaviour() {
        let s = sine(1_000.0, 0.8, 0.5, 16_000);
        assert_eq!(clip(&s, 1.0).unwrap(), s);
        let z = AudioBuffer::zeros(100, 16_000).unwrap();
        assert_eq!(clip(&z, 0.5).unwrap(), z);

        let s = sine(500.0, 1.0, 1.0, 16_000);
        let c = clip(&s, 0.5).unwrap();
        assert!((c.peak() - 0.5).abs() < 1e-15);
        let mag = magnitude_spectrum(c.samples());
        // 1 s at 16 kHz: bin index equals frequency in Hz.
        let rel = 20.0 * (mag[1_500] / mag[500]).log10();
        assert!(rel > -20.0, "third harmonic {rel} dB");
        assert!(clip(&s, 0.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_in_range() {
        assert_eq!(sample_degradation(Profile::Eval, 4), sample_degradation(Profile::Eval, 4));
        let mut snr_sum = 0.0;
        let mut codec = 0usize;
        let n = 10_000;
        for seed in 0..n {
            let d = sample_degradation(Profile::Eval, seed as u64);
            assert!((0.1..=0.5).contains(&d.t60_s));
            assert!((-5.0..=10.0).contains(&d.snr_db));
            d.validate().unwrap();
            snr_sum += d.snr_db;
            if let Codec::Proxy { cutoff_hz } = d.codec {
                assert!((4_000.0..=12_000.0).contains(&cutoff_hz));
                codec += 1;
            }
        }
        let mean = snr_sum / n as f64;
        let rate = codec as f64 / n as f64;
        assert!((mean - 2.5).abs() < 0.2, "{mean}");
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
    }

    #[test]
    fn train_profile_ranges() {
        let (mut clip_n, mut lp_n) = (0, 0);
        for seed in 0..5_000u64 {
            let d = sample_degradation(Profile::Train, seed);
            d.validate().unwrap();
            assert!((0.05..=1.0).contains(&d.t60_s));
            assert!((-5.0..=20.0).contains(&d.snr_db));
            if let Some(c) = d.clip_threshold {
                assert!((0.25..=0.9).contains(&c));
                clip_n += 1;
            }
            if let Some(f) = d.lowpass_hz {
                assert!((2_000.0..=8_000.0).contains(&f));
                lp_n += 1;
            }
        }
        assert!((clip_n as f64 / 5_000.0 - 0.2).abs() < 0.03);
        assert!((lp_n as f64 / 5_000.0 - 0.3).abs() < 0.03);
    }

    #[test]
    fn identity_spec_returns_clean() {
        let s = speech();
        let pair = degrade(&s, None, None, &DegradationSpec::identity(0)).unwrap();
        assert_eq!(pair.degraded, s);
        assert_eq!(pair.clean, s);
    }

    #[test]
    fn unit_impulse_reverb_gives_clean_plus_scaled_noise() {
        let s = speech();
        let n = white_noise(0.1, 2.0, 16_000, 1);
        let spec = DegradationSpec { snr_db: 5.0, apply_reverb: true, ..DegradationSpec::identity(8) };
        let delta = AudioBuffer::new(vec![1.0], 16_000).unwrap();
        let pair = degrade(&s, Some(&n), Some(&delta), &spec).unwrap();
        let mixed = mix_at_snr(&s, &n, 5.0, 8).unwrap();
        for (a, b) in pair.degraded.samples().iter().zip(mixed.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reverb_distributes_over_the_mixture() {
        let y = speech();
        let n = white_noise(0.01, 1.0, 16_000, 2);
        let h = synth_rir(0.2, 0.2, 16_000, 3).unwrap();
        let sum = AudioBuffer::new(
            y.samples().iter().zip(n.samples()).map(|(a, b)| a + b).collect(),
            16_000,
        )
        .unwrap();
        let lhs = apply_reverb(&sum, &h).unwrap();
        let yh = apply_reverb(&y, &h).unwrap();
        let nh = apply_reverb(&n, &h).unwrap();
        let err: f64 = lhs
            .samples()
            .iter()
            .zip(yh.samples().iter().zip(nh.samples()))
            .map(|(l, (a, b))| (l - a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn full_chain_is_deterministic() {
        let s = speech();
        let n = white_noise(0.1, 2.0, 16_000, 1);
        let spec = DegradationSpec {
            snr_db: 3.0,
            t60_s: 0.4,
            apply_reverb: true,
            clip_threshold: Some(0.5),
            lowpass_hz: Some(4_000.0),
            codec: Codec::Proxy { cutoff_hz: 6_000.0 },
            seed: 21,
        };
        let a = degrade(&s, Some(&n), None, &spec).unwrap();
        let b = degrade(&s, Some(&n), None, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.degraded.len(), s.len());
        assert!(a.degraded.peak() <= 1.0);
        let other = DegradationSpec { seed: 22, ..spec };
        assert_ne!(degrade(&s, Some(&n), None, &other).unwrap().degraded, a.degraded);
    }

    #[test]
    fn noise_required_for_finite_snr() {
        let spec = DegradationSpec { snr_db: 0.0, ..DegradationSpec::identity(0) };
        assert!(degrade(&speech(), None, None, &spec).is_err());
    }

    #[test]
    fn spec_serde_round_trip() {
        for spec in [DegradationSpec::identity(3), sample_degradation(Profile::Train, 17)] {
            let j = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<DegradationSpec>(&j).unwrap(), spec);
        }
    }
}
