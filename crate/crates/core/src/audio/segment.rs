//! Chunking and energy-based silence trimming.

use super::AudioBuffer;
use crate::error::{Error, Result};

pub const DEFAULT_CHUNK_SECONDS: f64 = 5.12;
/// A trailing remainder shorter than this is dropped.
const MIN_TAIL_SECONDS: f64 = 1.0;

const INTERIOR_GAP_MAX_S: f64 = 0.5;
const INTERIOR_GAP_KEEP_S: f64 = 0.2;

/// Splits into consecutive non-overlapping chunks of `chunk_seconds`.
///
/// The trailing remainder is kept when it lasts at least one second.
pub fn chunk(buffer: &AudioBuffer, chunk_seconds: f64) -> Result<Vec<AudioBuffer>> {
    if !(chunk_seconds > 0.0) || !chunk_seconds.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "chunk length must be positive, got {chunk_seconds}"
        )));
    }
    let rate = buffer.sample_rate();
    let size = ((chunk_seconds * rate as f64).round() as usize).max(1);
    let min_tail = (MIN_TAIL_SECONDS * rate as f64).round() as usize;
    Ok(buffer
        .samples()
        .chunks(size)
        .filter(|c| c.len() == size || c.len() >= min_tail)
        .map(|c| AudioBuffer::from_parts_unchecked(c.to_vec(), rate))
        .collect())
}

pub fn chunk_default(buffer: &AudioBuffer) -> Vec<AudioBuffer> {
    chunk(buffer, DEFAULT_CHUNK_SECONDS).expect("default chunk length is valid")
}

/// Result of [`trim_silence`]. `all_silent` is set when no frame passed the
/// threshold; the buffer is then empty.
#[derive(Debug, Clone)]
pub struct Trimmed {
    pub buffer: AudioBuffer,
    pub all_silent: bool,
}

/// Removes leading and trailing silence and shortens long interior pauses.
///
/// Frames of `frame_ms` (hop of half a frame) whose energy is more than
/// `threshold_db` below the loudest frame are silent. Interior silent runs
/// longer than 0.5 s are collapsed to 0.2 s, keeping 0.1 s at each edge.
pub fn trim_silence(buffer: &AudioBuffer, threshold_db: f64, frame_ms: f64) -> Result<Trimmed> {
    if !(threshold_db < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be negative dB, got {threshold_db}"
        )));
    }
    if !(frame_ms > 0.0) {
        return Err(Error::InvalidArgument("frame length must be positive".into()));
    }
    let rate = buffer.sample_rate() as f64;
    let x = buffer.samples();
    let frame = ((frame_ms * rate / 1000.0).round() as usize).max(2);
    let hop = frame / 2;

    let silent = || Trimmed {
        buffer: AudioBuffer::from_parts_unchecked(Vec::new(), buffer.sample_rate()),
        all_silent: true,
    };
    if x.is_empty() {
        return Ok(silent());
    }

    let starts: Vec<usize> = if x.len() <= frame {
        vec![0]
    } else {
        (0..=(x.len() - frame) / hop).map(|i| i * hop).collect()
    };
    let energies: Vec<f64> = starts
        .iter()
        .map(|&s| x[s..(s + frame).min(x.len())].iter().map(|v| v * v).sum())
        .collect();
    let peak = energies.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(silent());
    }
    let threshold = peak * 10f64.powf(threshold_db / 10.0);

    let mut active = vec![false; x.len()];
    for (&s, &e) in starts.iter().zip(&energies) {
        if e >= threshold {
            let end = (s + frame).min(x.len());
            active[s..end].iter_mut().for_each(|a| *a = true);
        }
    }
    let first = active.iter().position(|&a| a).unwrap_or(0);
    let last = active.iter().rposition(|&a| a).unwrap_or(0);

    let max_gap = (INTERIOR_GAP_MAX_S * rate).round() as usize;
    let keep_edge = ((INTERIOR_GAP_KEEP_S * rate).round() as usize) / 2;
    let mut out = Vec::with_capacity(last + 1 - first);
    let mut i = first;
    while i <= last {
        if active[i] {
            out.push(x[i]);
            i += 1;
            continue;
        }
        let run_end = (i..=last).find(|&j| active[j]).unwrap_or(last + 1);
        let run = &x[i..run_end];
        if run.len() > max_gap {
            out.extend_from_slice(&run[..keep_edge]);
            out.extend_from_slice(&run[run.len() - keep_edge..]);
        } else {
            out.extend_from_slice(run);
        }
        i = run_end;
    }
    Ok(Trimmed {
        buffer: AudioBuffer::from_parts_unchecked(out, buffer.sample_rate()),
        all_silent: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{sine, white_noise};
    use proptest::prelude::*;

    #[test]
    fn exact_chunk_length() {
        let b = AudioBuffer::zeros(245_760, 48_000).unwrap();
        let c = chunk(&b, 5.12).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 245_760);
    }

    #[test]
    fn short_tail_dropped_long_tail_kept() {
        let b = AudioBuffer::zeros(11 * 48_000, 48_000).unwrap();
        let c = chunk_default(&b);
        assert_eq!(c.len(), 2);

        let b = AudioBuffer::zeros(6 * 48_000 + 24_000, 48_000).unwrap();
        let c = chunk_default(&b);
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].len(), 6 * 48_000 + 24_000 - 245_760);
        assert!((c[1].duration_s() - 1.38).abs() < 1e-9);
    }

    #[test]
    fn chunk_rejects_non_positive() {
        let b = AudioBuffer::zeros(10, 16_000).unwrap();
        assert!(chunk(&b, 0.0).is_err());
        assert!(chunk(&b, -1.0).is_err());
    }

    #[test]
    fn pure_tone_is_untouched() {
        let b = sine(440.0, 0.5, 1.0, 16_000);
        let t = trim_silence(&b, -40.0, 20.0).unwrap();
        assert!(!t.all_silent);
        assert_eq!(t.buffer, b);
    }

    #[test]
    fn surrounding_silence_is_removed() {
        let rate = 16_000;
        let tone = sine(440.0, 0.5, 1.0, rate);
        let mut x = vec![0.0; rate as usize];
        x.extend_from_slice(tone.samples());
        x.extend(std::iter::repeat(0.0).take(rate as usize));
        let b = AudioBuffer::new(x, rate).unwrap();
        let t = trim_silence(&b, -40.0, 20.0).unwrap();
        let frame = 0.02;
        assert!((t.buffer.duration_s() - 1.0).abs() <= frame + 1e-9, "{}", t.buffer.duration_s());
    }

    #[test]
    fn long_interior_pause_is_collapsed() {
        let rate = 16_000;
        let tone = sine(440.0, 0.5, 0.5, rate);
        let mut x = tone.samples().to_vec();
        x.extend(std::iter::repeat(0.0).take(rate as usize * 2));
        x.extend_from_slice(tone.samples());
        let b = AudioBuffer::new(x, rate).unwrap();
        let t = trim_silence(&b, -40.0, 20.0).unwrap();
        // 0.5 + 0.2 + 0.5 s, give or take the frame straddling each edge.
        assert!((t.buffer.duration_s() - 1.2).abs() <= 0.02 + 1e-9, "{}", t.buffer.duration_s());
    }

    #[test]
    fn all_zero_is_flagged() {
        let b = AudioBuffer::zeros(16_000, 16_000).unwrap();
        let t = trim_silence(&b, -40.0, 20.0).unwrap();
        assert!(t.all_silent);
        assert!(t.buffer.is_empty());
    }

    #[test]
    fn noise_floor_below_threshold_is_trimmed() {
        let rate = 16_000;
        let quiet = white_noise(1e-4, 0.5, rate, 4);
        let tone = sine(300.0, 0.5, 1.0, rate);
        let mut x = quiet.samples().to_vec();
        x.extend_from_slice(tone.samples());
        let b = AudioBuffer::new(x, rate).unwrap();
        let t = trim_silence(&b, -40.0, 20.0).unwrap();
        assert!((t.buffer.duration_s() - 1.0).abs() <= 0.02 + 1e-9);
    }

    proptest! {
        #[test]
        fn chunks_concatenate_to_original(len in 1usize..40_000, secs in 0.1f64..2.0) {
            let rate = 8_000;
            let x: Vec<f64> = (0..len).map(|i| (i as f64 * 0.01).sin()).collect();
            let b = AudioBuffer::new(x.clone(), rate).unwrap();
            let chunks = chunk(&b, secs).unwrap();
            let size = (secs * rate as f64).round() as usize;
            let joined: Vec<f64> = chunks.iter().flat_map(|c| c.samples().to_vec()).collect();
            let rem = len % size;
            if rem == 0 || rem >= rate as usize {
                prop_assert_eq!(joined, x);
            } else {
                prop_assert_eq!(&joined[..], &x[..len - rem]);
            }
        }
    }
}
