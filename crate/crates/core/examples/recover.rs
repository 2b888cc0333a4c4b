//! Recovery stage: resample to 16 kHz, normalize loudness, spectral gate.

use speech_restore::corpus::{white_noise, HarmonicSpeech};
use speech_restore::degrade::mix_at_snr;
use speech_restore::error::Result;
use speech_restore::metrics::{estoi, si_snr};
use speech_restore::recovery::{recover_default, IdentityEnhancer, SpectralGate};

fn main() -> Result<()> {
    let clean = HarmonicSpeech::with_seed(4).render(3.0, 48_000);
    let noise = white_noise(0.1, 4.0, 48_000, 5);
    for snr in [-5.0, 0.0, 10.0] {
        let noisy = mix_at_snr(&clean, &noise, snr, 0)?;
        let passthrough = recover_default(&noisy, &IdentityEnhancer)?;
        let gated = recover_default(&noisy, &SpectralGate::default())?;
        println!(
            "{snr:>5} dB: si-snr {:5.1} -> {:5.1} dB, estoi {:.3} -> {:.3} (output {} Hz)",
            si_snr(&clean, &passthrough.audio)?,
            si_snr(&clean, &gated.audio)?,
            estoi(&clean, &passthrough.audio)?,
            estoi(&clean, &gated.audio)?,
            gated.audio.sample_rate()
        );
    }
    Ok(())
}
