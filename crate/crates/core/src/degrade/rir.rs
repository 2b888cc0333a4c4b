use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// ln(10^3): amplitude decays by 60 dB over one T60.
pub const DECAY_60DB: f64 = 6.907_755_278_982_137;
pub const MAX_T60_S: f64 = 1.0;

/// Exponentially decaying noise impulse response with a unit direct path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RirSpec {
    pub t60_s: f64,
    pub duration_s: f64,
    /// Direct-to-reverberant energy ratio.
    pub drr_db: f64,
}

impl RirSpec {
    pub fn new(t60_s: f64, duration_s: f64) -> Self {
        Self { t60_s, duration_s, drr_db: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t60_s > 0.0 && self.t60_s <= MAX_T60_S) {
            return Err(Error::InvalidArgument(format!(
                "t60 {} s outside (0, {MAX_T60_S}]",
                self.t60_s
            )));
        }
        if !(self.duration_s >= self.t60_s) || !self.duration_s.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "rir duration {} s shorter than t60 {} s",
                self.duration_s, self.t60_s
            )));
        }
        if !self.drr_db.is_finite() {
            return Err(Error::InvalidArgument("drr must be finite".into()));
        }
        Ok(())
    }

    pub fn render(&self, rate: u32, seed: u64) -> Result<AudioBuffer> {
        self.validate()?;
        let len = ((self.duration_s * rate as f64).round() as usize).max(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = vec![0.0; len];
        h[0] = 1.0;
        let k = DECAY_60DB / (self.t60_s * rate as f64);
        for (n, v) in h.iter_mut().enumerate().skip(1) {
            let w: f64 = StandardNormal.sample(&mut rng);
            *v = w * (-k * n as f64).exp();
        }
        let tail: f64 = h[1..].iter().map(|v| v * v).sum();
        let want = 10f64.powf(-self.drr_db / 10.0);
        let g = (want / tail).sqrt();
        h[1..].iter_mut().for_each(|v| *v *= g);
        AudioBuffer::new(h, rate)
    }
}

pub fn synth_rir(t60_s: f64, duration_s: f64, rate: u32, seed: u64) -> Result<AudioBuffer> {
    RirSpec::new(t60_s, duration_s).render(rate, seed)
}

/// Convolves `speech` with `rir`, keeping the first `speech.len()` samples.
pub fn apply_reverb(speech: &AudioBuffer, rir: &AudioBuffer) -> Result<AudioBuffer> {
    if speech.sample_rate() != rir.sample_rate() {
        return Err(Error::RateMismatch(speech.sample_rate(), rir.sample_rate()));
    }
    if rir.is_empty() {
        return Err(Error::InvalidArgument("empty impulse response".into()));
    }
    let out = fft_convolve(speech.samples(), rir.samples(), speech.len());
    AudioBuffer::new(out, speech.sample_rate())
}

/// Overlap-add FFT convolution of `x` with `h`, truncated to `out_len`.
fn fft_convolve(x: &[f64], h: &[f64], out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    if x.is_empty() || h.is_empty() || out_len == 0 {
        return out;
    }
    let h = &h[..h.len().min(out_len)];
    let fft_size = (2 * h.len()).next_power_of_two().max(64);
    let block = fft_size - h.len() + 1;

    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(fft_size);
    let inv = planner.plan_fft_inverse(fft_size);
    let mut time = fwd.make_input_vec();
    time[..h.len()].copy_from_slice(h);
    let mut h_spec = fwd.make_output_vec();
    fwd.process(&mut time, &mut h_spec).expect("fft length");

    let mut spec = fwd.make_output_vec();
    let scale = 1.0 / fft_size as f64;
    let x = &x[..x.len().min(out_len)];
    for start in (0..x.len()).step_by(block) {
        let seg = &x[start..(start + block).min(x.len())];
        time.iter_mut().for_each(|v| *v = 0.0);
        time[..seg.len()].copy_from_slice(seg);
        fwd.process(&mut time, &mut spec).expect("fft length");
        spec.iter_mut().zip(&h_spec).for_each(|(a, b)| *a *= b);
        // The DC and Nyquist bins of a real signal's product stay real.
        spec[0].im = 0.0;
        let last = spec.len() - 1;
        spec[last].im = 0.0;
        inv.process(&mut spec, &mut time).expect("fft length");
        let valid = (seg.len() + h.len() - 1).min(out_len - start);
        for (o, t) in out[start..start + valid].iter_mut().zip(&time) {
            *o += t * scale;
        }
    }
    out
}
