use realfft::RealFftPlanner;

use crate::audio::{resample, AudioBuffer};
use crate::error::{Error, Result};

pub const ESTOI_RATE: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = 128;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
/// Frames per intelligibility segment (384 ms).
pub const SEGMENT_FRAMES: usize = 30;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Symmetric Hann of length `FRAME` (a length `FRAME + 2` window without its zero ends).
fn frame_window() -> Vec<f64> {
    let n = FRAME + 2;
    (1..=FRAME)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

fn frame_starts(len: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(FRAME)).step_by(HOP)
}

/// Drops frames more than 40 dB below the loudest clean frame and
/// overlap-adds the survivors back together.
fn remove_silent_frames(x: &[f64], y: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let starts: Vec<usize> = frame_starts(x.len()).collect();
    let energy: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = x[s..s + FRAME].iter().zip(w).map(|(v, w)| (v * w).powi(2)).sum();
            20.0 * (e.sqrt() + EPS).log10()
        })
        .collect();
    let max = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energy)
        .filter(|(_, &e)| e - max > -DYN_RANGE_DB)
        .map(|(&s, _)| s)
        .collect();
    let out_len = if kept.is_empty() { 0 } else { (kept.len() - 1) * HOP + FRAME };
    let ola = |sig: &[f64]| {
        let mut out = vec![0.0; out_len];
        for (j, &s) in kept.iter().enumerate() {
            for i in 0..FRAME {
                out[j * HOP + i] += sig[s + i] * w[i];
            }
        }
        out
    };
    (ola(x), ola(y))
}

/// One-third octave band matrix as `(first_bin, end_bin)` ranges.
fn third_octave_bands() -> Vec<(usize, usize)> {
    let bins = NFFT / 2 + 1;
    let freqs: Vec<f64> = (0..bins).map(|k| k as f64 * ESTOI_RATE as f64 / NFFT as f64).collect();
    let nearest = |target: f64| {
        (0..bins)
            .min_by(|&a, &b| (freqs[a] - target).abs().total_cmp(&(freqs[b] - target).abs()))
            .expect("non-empty")
    };
    (0..BANDS)
        .map(|k| {
            let lo = MIN_FREQ * 2f64.powf((2.0 * k as f64 - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k as f64 + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

/// Band envelopes, `frames x BANDS`.
fn band_envelopes(x: &[f64], w: &[f64], bands: &[(usize, usize)]) -> Vec<[f64; BANDS]> {
    let fft = RealFftPlanner::<f64>::new().plan_fft_forward(NFFT);
    let mut input = fft.make_input_vec();
    let mut spec = fft.make_output_vec();
    frame_starts(x.len())
        .map(|s| {
            input.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..FRAME {
                input[i] = x[s + i] * w[i];
            }
            fft.process(&mut input, &mut spec).expect("fft length");
            let mut env = [0.0; BANDS];
            for (e, &(lo, hi)) in env.iter_mut().zip(bands) {
                *e = spec[lo..hi].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            }
            env
        })
        .collect()
}

/// Normalizes each band row over time, then each frame column over bands,
/// to zero mean and unit norm. `seg` is `SEGMENT_FRAMES x BANDS`.
fn row_col_normalize(seg: &mut [[f64; BANDS]]) {
    let n = seg.len() as f64;
    for b in 0..BANDS {
        let mean = seg.iter().map(|f| f[b]).sum::<f64>() / n;
        let norm = seg.iter().map(|f| (f[b] - mean).powi(2)).sum::<f64>().sqrt();
        let inv = if norm > EPS { 1.0 / norm } else { 0.0 };
        seg.iter_mut().for_each(|f| f[b] = (f[b] - mean) * inv);
    }
    for f in seg.iter_mut() {
        let mean = f.iter().sum::<f64>() / BANDS as f64;
        let norm = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
        let inv = if norm > EPS { 1.0 / norm } else { 0.0 };
        f.iter_mut().for_each(|v| *v = (*v - mean) * inv);
    }
}

/// Extended short-time objective intelligibility of `processed` against
/// `clean`. Both are resampled to 10 kHz and truncated to the shorter.
pub fn estoi(clean: &AudioBuffer, processed: &AudioBuffer) -> Result<f64> {
    let x = resample(clean, ESTOI_RATE)?;
    let y = resample(processed, ESTOI_RATE)?;
    let n = x.len().min(y.len());
    let w = frame_window();
    let (x, y) = remove_silent_frames(&x.samples()[..n], &y.samples()[..n], &w);
    let bands = third_octave_bands();
    let xe = band_envelopes(&x, &w, &bands);
    let ye = band_envelopes(&y, &w, &bands);
    if xe.len() < SEGMENT_FRAMES {
        return Err(Error::TooShort(format!(
            "{} non-silent frames, one segment needs {SEGMENT_FRAMES}",
            xe.len()
        )));
    }
    let segments = xe.len() - SEGMENT_FRAMES + 1;
    let mut total = 0.0;
    for m in 0..segments {
        let mut xs = xe[m..m + SEGMENT_FRAMES].to_vec();
        let mut ys = ye[m..m + SEGMENT_FRAMES].to_vec();
        row_col_normalize(&mut xs);
        row_col_normalize(&mut ys);
        let dot: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>())
            .sum();
        total += dot / SEGMENT_FRAMES as f64;
    }
    Ok(total / segments as f64)
}
