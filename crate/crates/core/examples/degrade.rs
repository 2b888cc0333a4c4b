//! Sampling a degradation and applying it to clean speech.

use speech_restore::corpus::{white_noise, HarmonicSpeech};
use speech_restore::degrade::{degrade, sample_degradation, Profile};
use speech_restore::error::Result;
use speech_restore::metrics::si_snr;

fn main() -> Result<()> {
    let clean = HarmonicSpeech::with_seed(1).render(3.0, 16_000);
    let noise = white_noise(0.1, 5.0, 16_000, 2);
    for profile in [Profile::Eval, Profile::Train] {
        for seed in 0..3 {
            let spec = sample_degradation(profile, seed);
            let pair = degrade(&clean, Some(&noise), None, &spec)?;
            println!(
                "{profile} seed {seed}: snr {:5.1} dB, t60 {:.2} s (reverb {}), clip {:?}, lowpass {:?}, codec {:?} -> si-snr {:5.1} dB",
                spec.snr_db,
                spec.t60_s,
                spec.apply_reverb,
                spec.clip_threshold.map(|c| (c * 100.0).round() / 100.0),
                spec.lowpass_hz.map(f64::round),
                spec.codec,
                si_snr(&pair.clean, &pair.degraded)?
            );
        }
    }
    Ok(())
}
