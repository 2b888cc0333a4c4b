use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

const FIT_START_DB: f64 = -5.0;
const FIT_END_DB: f64 = -25.0;
// Fewer samples than this inside the fit range cannot support a slope.
const MIN_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T60Estimate {
    pub seconds: f64,
    /// The decay is faster than the sampling grid can resolve; `seconds`
    /// is then only an upper bound.
    pub below_resolution: bool,
}

/// Schroeder backward integration: decay curve in dB relative to total energy.
pub fn energy_decay_curve_db(rir: &[f64]) -> Vec<f64> {
    let mut edc = vec![0.0; rir.len()];
    let mut acc = 0.0;
    for (i, &h) in rir.iter().enumerate().rev() {
        acc += h * h;
        edc[i] = acc;
    }
    let total = acc;
    edc.iter()
        .map(|&e| if e > 0.0 { 10.0 * (e / total).log10() } else { f64::NEG_INFINITY })
        .collect()
}

/// Reverberation time from a linear fit to the decay curve between -5 and -25 dB.
pub fn schroeder_t60(rir: &AudioBuffer) -> Result<T60Estimate> {
    if rir.energy() == 0.0 {
        return Err(Error::ZeroEnergy("impulse response"));
    }
    let rate = rir.sample_rate() as f64;
    let edc = energy_decay_curve_db(rir.samples());
    let Some(end) = edc.iter().position(|&d| d <= FIT_END_DB) else {
        return Err(Error::InvalidArgument(format!(
            "energy never decays by {} dB",
            -FIT_END_DB
        )));
    };
    let start = edc.iter().position(|&d| d <= FIT_START_DB).unwrap_or(end);
    let points: Vec<(f64, f64)> = (start..end)
        .filter(|&i| edc[i].is_finite())
        .map(|i| (i as f64 / rate, edc[i]))
        .collect();
    if points.len() < MIN_FIT_POINTS {
        return Ok(T60Estimate {
            seconds: (end as f64 / rate) * 60.0 / -FIT_END_DB,
            below_resolution: true,
        });
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let md = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - md)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::InvalidArgument("decay curve does not fall".into()));
    }
    Ok(T60Estimate {
        seconds: -60.0 / slope,
        below_resolution: false,
    })
}
