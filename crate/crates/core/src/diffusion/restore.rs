use serde::{Deserialize, Serialize};

use super::denoiser::Denoiser;
use super::sampler::ddpm_sample;
use super::schedule::NoiseSchedule;
use crate::audio::{invert_mel_with, mel_spectrogram, resample, AudioBuffer, GriffinLimConfig, MelConfig, MelSpectrogram};
use crate::error::{Error, Result};
use crate::latent::{decode, encode, CodecConfig, Latent};
use crate::metrics::{evaluate_pair, MetricRow};

pub const RESTORE_INPUT_RATE: u32 = 16_000;
pub const RESTORE_OUTPUT_RATE: u32 = 48_000;
/// Offset separating the phase-retrieval seed from the sampler seed.
const GL_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RestoreConfig {
    pub mel: MelConfig,
    pub codec: CodecConfig,
    pub sampling_steps: usize,
    pub griffin_lim: GriffinLimConfig,
}

impl Default for RestoreConfig {
    fn default() -> Self {
        Self {
            mel: MelConfig::default(),
            codec: CodecConfig::default(),
            sampling_steps: 50,
            griffin_lim: GriffinLimConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Restored {
    /// Full-band output at 48 kHz.
    pub audio: AudioBuffer,
    /// dB mel of the upsampled input.
    pub input_mel: MelSpectrogram,
    /// Conditioning latent `z_0`.
    pub conditioning: Latent,
    /// Sampled latent and its decoded dB mel.
    pub latent: Latent,
    pub restored_mel: MelSpectrogram,
}

/// Upsamples to 48 kHz, encodes the mel-spectrogram, samples a latent
/// conditioned on it, decodes and inverts back to a waveform.
pub fn restore(
    x_prime: &AudioBuffer,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    config: &RestoreConfig,
    seed: u64,
) -> Result<Restored> {
    if x_prime.sample_rate() != RESTORE_INPUT_RATE {
        return Err(Error::RateMismatch(RESTORE_INPUT_RATE, x_prime.sample_rate()));
    }
    if config.mel.sample_rate != RESTORE_OUTPUT_RATE {
        return Err(Error::Config(format!(
            "restoration mel analysis must run at {RESTORE_OUTPUT_RATE} Hz, not {}",
            config.mel.sample_rate
        )));
    }
    let upsampled = resample(x_prime, RESTORE_OUTPUT_RATE)?;
    let input_mel = mel_spectrogram(&upsampled, &config.mel)?.to_db();
    let conditioning = encode(&input_mel, &config.codec)?;
    let z = ddpm_sample(denoiser, conditioning.coeffs(), schedule, config.sampling_steps, seed)?;
    let latent = conditioning.with_coeffs(z)?;
    let restored_mel = decode(&latent)?;
    let gl = GriffinLimConfig { seed: seed.wrapping_add(GL_SEED_OFFSET), ..config.griffin_lim };
    let inverted = invert_mel_with(&restored_mel.to_power(), &gl)?;
    let audio = inverted.audio.with_len(upsampled.len());
    Ok(Restored { audio, input_mel, conditioning, latent, restored_mel })
}

/// One refinement pass: maps the previous output to the next one.
pub type RefineStage<'a> = &'a (dyn Fn(&AudioBuffer, usize) -> Result<AudioBuffer> + Sync);

#[derive(Debug, Clone)]
pub struct RefineStep {
    pub audio: AudioBuffer,
    pub row: MetricRow,
}

/// Feeds each output back through `stages` (applied in order) `iterations`
/// times. Row `k` (1-based) compares iteration `k`'s output with the
/// original input.
pub fn iterative_refine(
    input: &AudioBuffer,
    stages: &[RefineStage<'_>],
    iterations: usize,
    item_id: &str,
) -> Result<Vec<RefineStep>> {
    if iterations < 1 {
        return Err(Error::InvalidArgument("at least one refinement iteration".into()));
    }
    let mut current = input.clone();
    let mut out = Vec::with_capacity(iterations);
    for k in 1..=iterations {
        for stage in stages {
            current = stage(&current, k)?;
        }
        let row = evaluate_pair(input, &current, item_id, k)?;
        out.push(RefineStep { audio: current.clone(), row });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::HarmonicSpeech;
    use crate::diffusion::{gaussian_mmse_denoiser, ConditioningDenoiser};

    fn quick() -> RestoreConfig {
        RestoreConfig {
            sampling_steps: 10,
            griffin_lim: GriffinLimConfig { iterations: 8, ..GriffinLimConfig::default() },
            ..RestoreConfig::default()
        }
    }

    #[test]
    fn output_is_48k_and_same_duration() {
        let x = HarmonicSpeech::default().render(1.0, 16_000);
        let s = NoiseSchedule::default();
        let r = restore(&x, &ConditioningDenoiser, &s, &quick(), 0).unwrap();
        assert_eq!(r.audio.sample_rate(), 48_000);
        assert_eq!(r.audio.len(), 3 * x.len());
        assert!(restore(&resample(&x, 48_000).unwrap(), &ConditioningDenoiser, &s, &quick(), 0).is_err());
    }

    #[test]
    fn conditioning_denoiser_reproduces_projected_mel() {
        let x = HarmonicSpeech::default().render(1.0, 16_000);
        let s = NoiseSchedule::default();
        let r = restore(&x, &ConditioningDenoiser, &s, &quick(), 3).unwrap();
        let projected = decode(&encode(&r.input_mel, &quick().codec).unwrap()).unwrap();
        for (a, b) in projected.values().iter().zip(r.restored_mel.values()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn seeded_end_to_end() {
        let x = HarmonicSpeech::default().render(0.6, 16_000);
        let s = NoiseSchedule::default();
        let d = gaussian_mmse_denoiser(0.0, 0.5).unwrap();
        let a = restore(&x, &d, &s, &quick(), 11).unwrap().audio;
        assert_eq!(a, restore(&x, &d, &s, &quick(), 11).unwrap().audio);
        assert_ne!(a, restore(&x, &d, &s, &quick(), 12).unwrap().audio);
    }

    #[test]
    fn identity_refinement_rows_are_identical() {
        let x = HarmonicSpeech::default().render(1.0, 16_000);
        let id = |a: &AudioBuffer, _: usize| Ok(a.clone());
        let steps = iterative_refine(&x, &[&id], 5, "x").unwrap();
        assert_eq!(steps.len(), 5);
        for (k, s) in steps.iter().enumerate() {
            assert_eq!(s.row.iteration, k + 1);
            let mut a = s.row.clone();
            a.iteration = 0;
            let mut b = steps[0].row.clone();
            b.iteration = 0;
            assert_eq!(a, b);
        }
        assert!(iterative_refine(&x, &[&id], 0, "x").is_err());
    }

    #[test]
    fn single_iteration_equals_single_restore() {
        let x = HarmonicSpeech::default().render(0.6, 16_000);
        let s = NoiseSchedule::default();
        let cfg = quick();
        let stage = |a: &AudioBuffer, _: usize| -> Result<AudioBuffer> {
            let a16 = resample(a, 16_000)?;
            Ok(restore(&a16, &ConditioningDenoiser, &s, &cfg, 1)?.audio)
        };
        let steps = iterative_refine(&x, &[&stage], 1, "x").unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].audio, restore(&x, &ConditioningDenoiser, &s, &cfg, 1).unwrap().audio);
    }
}
