//! Restoration stage: 16 kHz input to 48 kHz output via latent sampling.

use speech_restore::corpus::HarmonicSpeech;
use speech_restore::diffusion::{restore, ConditioningDenoiser, NoiseSchedule, RestoreConfig};
use speech_restore::error::Result;
use speech_restore::metrics::spectrogram_ssim;

fn main() -> Result<()> {
    let reference = HarmonicSpeech::with_seed(2).render(2.0, 48_000);
    let narrow = speech_restore::audio::resample(&reference, 16_000)?;
    let out = restore(&narrow, &ConditioningDenoiser, &NoiseSchedule::default(), &RestoreConfig::default(), 0)?;
    println!(
        "{} samples at {} Hz -> {} samples at {} Hz, latent of {} coefficients",
        narrow.len(),
        narrow.sample_rate(),
        out.audio.len(),
        out.audio.sample_rate(),
        out.latent.len()
    );
    for rate in [16_000, 48_000] {
        println!("ssim vs full-band reference at {rate} Hz: {:.3}", spectrogram_ssim(&reference, &out.audio, rate)?);
    }
    Ok(())
}
