use std::f64::consts::PI;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

const ORDER: usize = 8;

/// Lowpass biquad in transposed direct form II, normalized so a0 = 1.
#[derive(Debug, Clone, Copy)]
struct Section {
    b: [f64; 3],
    a: [f64; 2],
}

impl Section {
    fn lowpass(cutoff_hz: f64, q: f64, rate: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - cos) / a0;
        Self {
            b: [b1 / 2.0, b1, b1 / 2.0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    /// Filters in place starting from the steady state for a constant input `x[0]`.
    fn run(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        // Unity DC gain: a constant input u settles at output u.
        let mut z2 = (self.b[2] - self.a[1]) * first;
        let mut z1 = (self.b[1] - self.a[0]) * first + z2;
        for v in x.iter_mut() {
            let xn = *v;
            let y = self.b[0] * xn + z1;
            z1 = self.b[1] * xn - self.a[0] * y + z2;
            z2 = self.b[2] * xn - self.a[1] * y;
            *v = y;
        }
    }
}

fn butterworth(cutoff_hz: f64, rate: f64) -> Vec<Section> {
    (0..ORDER / 2)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2 * ORDER) as f64;
            Section::lowpass(cutoff_hz, 1.0 / (2.0 * theta.cos()), rate)
        })
        .collect()
}

/// Zero-phase 8th-order Butterworth lowpass (forward and backward passes).
pub fn lowpass(buffer: &AudioBuffer, cutoff_hz: f64) -> Result<AudioBuffer> {
    let rate = buffer.sample_rate() as f64;
    if !(cutoff_hz > 0.0 && cutoff_hz < rate / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff_hz} Hz outside (0, {}) Hz",
            rate / 2.0
        )));
    }
    let x = buffer.samples();
    if x.len() < 2 {
        return Ok(buffer.clone());
    }
    let sections = butterworth(cutoff_hz, rate);

    // Odd extension at both ends suppresses edge transients.
    let pad = (3 * (2 * sections.len() + 1)).min(x.len() - 1);
    let (x0, xn) = (x[0], x[x.len() - 1]);
    let mut ext = Vec::with_capacity(x.len() + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x0 - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * xn - x[x.len() - 1 - i]));

    for s in &sections {
        s.run(&mut ext);
    }
    ext.reverse();
    for s in &sections {
        s.run(&mut ext);
    }
    ext.reverse();
    AudioBuffer::new(ext[pad..pad + x.len()].to_vec(), buffer.sample_rate())
}
