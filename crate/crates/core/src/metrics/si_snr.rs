use crate::audio::{resample, AudioBuffer};
use crate::error::{Error, Result};

/// Reported SI-SNR values are clamped to this magnitude.
pub const SI_SNR_CAP_DB: f64 = 60.0;

/// Scale-invariant SNR of `estimate` against `reference`, in dB.
///
/// The estimate is resampled to the reference rate when they differ, both
/// are truncated to the shorter length and made zero-mean.
pub fn si_snr(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    let estimate = resample(estimate, reference.sample_rate())?;
    si_snr_samples(reference.samples(), estimate.samples())
}

pub fn si_snr_samples(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    let n = reference.len().min(estimate.len());
    if n == 0 {
        return Err(Error::InvalidArgument("empty signal".into()));
    }
    let centred = |x: &[f64]| {
        let m = x[..n].iter().sum::<f64>() / n as f64;
        x[..n].iter().map(|v| v - m).collect::<Vec<_>>()
    };
    let r = centred(reference);
    let e = centred(estimate);
    let rr: f64 = r.iter().map(|v| v * v).sum();
    if rr == 0.0 {
        return Err(Error::ZeroEnergy("reference"));
    }
    let alpha = e.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / rr;
    let (mut target, mut residual) = (0.0, 0.0);
    for (ev, rv) in e.iter().zip(&r) {
        let t = alpha * rv;
        target += t * t;
        residual += (ev - t) * (ev - t);
    }
    let db = if residual == 0.0 {
        SI_SNR_CAP_DB
    } else if target == 0.0 {
        -SI_SNR_CAP_DB
    } else {
        10.0 * (target / residual).log10()
    };
    Ok(db.clamp(-SI_SNR_CAP_DB, SI_SNR_CAP_DB))
}
