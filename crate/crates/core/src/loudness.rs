//! Integrated loudness per ITU-R BS.1770-4 and gain normalization.
//!
//! Measurement always happens at 48 kHz so the published K-weighting
//! coefficients apply unchanged; other rates are resampled first.

use serde::{Deserialize, Serialize};

use crate::audio::{resample, AudioBuffer};
use crate::error::{Error, Result};

/// Loudness target of the recovery stage.
pub const DEFAULT_TARGET_LUFS: f64 = -20.0;
/// The common streaming target, exposed as an alternative.
pub const STREAMING_TARGET_LUFS: f64 = -14.0;

const MEASURE_RATE: u32 = 48_000;
const BLOCK_SAMPLES: usize = 19_200; // 400 ms
const STEP_SAMPLES: usize = 4_800; // 75 % overlap
const ABSOLUTE_GATE_LUFS: f64 = -70.0;
const RELATIVE_GATE_LU: f64 = -10.0;

/// Second-order section, direct form I. `a0` is 1.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn run(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2
                    - self.a[0] * y1
                    - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

// K-weighting at 48 kHz, BS.1770-4 tables 1 and 2.
const PRE_FILTER: Biquad = Biquad {
    b: [1.535_124_859_586_97, -2.691_696_189_406_38, 1.198_392_810_852_85],
    a: [-1.690_659_293_182_41, 0.732_480_774_215_85],
};
const RLB_FILTER: Biquad = Biquad {
    b: [1.0, -2.0, 1.0],
    a: [-1.990_047_454_833_98, 0.990_072_250_366_21],
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoudnessResult {
    /// Gated integrated loudness; `f64::NEG_INFINITY` when every block is gated out.
    pub integrated_lufs: f64,
    pub gated_block_count: usize,
}

impl LoudnessResult {
    pub fn is_measurable(&self) -> bool {
        self.integrated_lufs.is_finite()
    }
}

fn power_to_lufs(power: f64) -> f64 {
    -0.691 + 10.0 * power.log10()
}

/// Gated integrated loudness of a mono buffer.
pub fn measure_lufs(buffer: &AudioBuffer) -> Result<LoudnessResult> {
    let min_len = (0.4 * buffer.sample_rate() as f64).ceil() as usize;
    if buffer.len() < min_len {
        return Err(Error::TooShort(format!(
            "{:.3} s is shorter than one 400 ms gating block",
            buffer.duration_s()
        )));
    }
    let at_48k = resample(buffer, MEASURE_RATE)?;
    let weighted = RLB_FILTER.run(&PRE_FILTER.run(at_48k.samples()));

    // Block powers via a prefix sum of squares.
    let mut prefix = Vec::with_capacity(weighted.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in &weighted {
        acc += v * v;
        prefix.push(acc);
    }
    let blocks: Vec<f64> = if weighted.len() < BLOCK_SAMPLES {
        // Resampling can shave a sample off a buffer that is exactly 400 ms long.
        vec![acc / weighted.len().max(1) as f64]
    } else {
        (0..=(weighted.len() - BLOCK_SAMPLES) / STEP_SAMPLES)
            .map(|j| {
                let s = j * STEP_SAMPLES;
                (prefix[s + BLOCK_SAMPLES] - prefix[s]) / BLOCK_SAMPLES as f64
            })
            .collect()
    };

    let above_absolute: Vec<f64> = blocks
        .iter()
        .copied()
        .filter(|&p| p > 0.0 && power_to_lufs(p) > ABSOLUTE_GATE_LUFS)
        .collect();
    if above_absolute.is_empty() {
        return Ok(LoudnessResult {
            integrated_lufs: f64::NEG_INFINITY,
            gated_block_count: 0,
        });
    }
    let mean_abs = above_absolute.iter().sum::<f64>() / above_absolute.len() as f64;
    let relative_gate = power_to_lufs(mean_abs) + RELATIVE_GATE_LU;
    let gated: Vec<f64> = above_absolute
        .into_iter()
        .filter(|&p| power_to_lufs(p) > relative_gate)
        .collect();
    let mean = gated.iter().sum::<f64>() / gated.len() as f64;
    Ok(LoudnessResult {
        integrated_lufs: power_to_lufs(mean),
        gated_block_count: gated.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizeOutcome {
    pub measured: LoudnessResult,
    /// Linear gain applied (1 when the input was unmeasurable).
    pub gain: f64,
    /// Input could not be measured and was returned unchanged.
    pub unmeasurable: bool,
    /// Samples whose magnitude exceeds 1 after the gain.
    pub over_full_scale: usize,
}

/// Applies the single gain that moves the integrated loudness to `target_lufs`.
pub fn normalize_loudness(
    buffer: &AudioBuffer,
    target_lufs: f64,
) -> Result<(AudioBuffer, NormalizeOutcome)> {
    if !target_lufs.is_finite() {
        return Err(Error::InvalidArgument(format!("target {target_lufs} LUFS")));
    }
    let measured = measure_lufs(buffer)?;
    if !measured.is_measurable() {
        return Ok((
            buffer.clone(),
            NormalizeOutcome {
                measured,
                gain: 1.0,
                unmeasurable: true,
                over_full_scale: 0,
            },
        ));
    }
    let gain = 10f64.powf((target_lufs - measured.integrated_lufs) / 20.0);
    let out = buffer.scaled(gain);
    let over_full_scale = out.samples().iter().filter(|s| s.abs() > 1.0).count();
    Ok((
        out,
        NormalizeOutcome {
            measured,
            gain,
            unmeasurable: false,
            over_full_scale,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{sine, white_noise, HarmonicSpeech};

    /// Independent BS.1770 implementation (coefficients derived from the
    /// analog prototypes, f32 arithmetic) used as the reference meter.
    fn reference_lufs(buffer: &AudioBuffer) -> f64 {
        assert_eq!(buffer.sample_rate(), 48_000);
        let mut meter = bs1770::ChannelLoudnessMeter::new(48_000);
        meter.push(buffer.samples().iter().map(|&s| s as f32));
        let power = bs1770::gated_mean(meter.as_100ms_windows());
        power.loudness_lkfs() as f64
    }

    #[test]
    fn silence_is_unmeasurable() {
        let r = measure_lufs(&AudioBuffer::zeros(48_000, 48_000).unwrap()).unwrap();
        assert_eq!(r.integrated_lufs, f64::NEG_INFINITY);
        assert_eq!(r.gated_block_count, 0);
    }

    #[test]
    fn full_scale_997hz_sine() {
        let b = sine(997.0, 1.0, 5.0, 48_000);
        let ours = measure_lufs(&b).unwrap().integrated_lufs;
        let reference = reference_lufs(&b);
        assert!((ours - (-3.01)).abs() < 0.1, "measured {ours}");
        assert!((ours - reference).abs() < 0.05, "ours {ours} reference {reference}");
    }

    #[test]
    fn agrees_with_reference_meter_on_speech_and_noise() {
        let speech = HarmonicSpeech::with_seed(3).render(4.0, 48_000);
        let noise = white_noise(0.05, 4.0, 48_000, 2);
        for b in [speech, noise] {
            let ours = measure_lufs(&b).unwrap().integrated_lufs;
            let reference = reference_lufs(&b);
            assert!((ours - reference).abs() < 0.05, "ours {ours} reference {reference}");
        }
    }

    #[test]
    fn halving_lowers_by_6_02_db() {
        let b = HarmonicSpeech::with_seed(1).render(3.0, 16_000);
        let full = measure_lufs(&b).unwrap().integrated_lufs;
        let half = measure_lufs(&b.scaled(0.5)).unwrap().integrated_lufs;
        assert!((full - half - 6.0206).abs() < 0.05);
    }

    #[test]
    fn too_short_is_an_error() {
        let b = sine(997.0, 1.0, 0.3, 48_000);
        assert!(matches!(measure_lufs(&b), Err(Error::TooShort(_))));
    }

    #[test]
    fn gain_formula_and_idempotence() {
        let b = HarmonicSpeech::with_seed(2).render(3.0, 48_000);
        let at_minus_10 = normalize_loudness(&b, -10.0).unwrap().0;
        let (_, outcome) = normalize_loudness(&at_minus_10, -20.0).unwrap();
        assert!((outcome.gain - 10f64.powf(-0.5)).abs() < 1e-3, "{}", outcome.gain);

        let (at_target, _) = normalize_loudness(&b, -20.0).unwrap();
        let (_, again) = normalize_loudness(&at_target, -20.0).unwrap();
        assert!((0.999..=1.001).contains(&again.gain));
    }

    #[test]
    fn silence_passes_through_flagged() {
        let b = AudioBuffer::zeros(48_000, 48_000).unwrap();
        let (out, outcome) = normalize_loudness(&b, -20.0).unwrap();
        assert!(outcome.unmeasurable);
        assert_eq!(out, b);
    }

    #[test]
    fn over_full_scale_is_reported_not_clipped() {
        let b = sine(997.0, 0.9, 2.0, 48_000);
        let (out, outcome) = normalize_loudness(&b, 0.0).unwrap();
        assert!(outcome.over_full_scale > 0);
        assert!(out.peak() > 1.0);
    }
}
