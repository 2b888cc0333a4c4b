//! Objective metrics over an SNR sweep.

use speech_restore::corpus::{white_noise, HarmonicSpeech};
use speech_restore::degrade::mix_at_snr;
use speech_restore::error::Result;
use speech_restore::metrics::evaluate_pair;

fn main() -> Result<()> {
    let clean = HarmonicSpeech::with_seed(8).render(3.0, 16_000);
    let noise = white_noise(0.1, 4.0, 16_000, 9);
    println!("{:>6} {:>6} {:>8} {:>8} {:>8}", "snr", "estoi", "ssim16k", "ssim48k", "si-snr");
    for snr in [-5.0, 0.0, 5.0, 10.0, 20.0] {
        let noisy = mix_at_snr(&clean, &noise, snr, 0)?;
        let row = evaluate_pair(&clean, &noisy, "sweep", 1)?;
        println!(
            "{snr:>6.1} {:>6.3} {:>8.3} {:>8.3} {:>8.2}",
            row.estoi.unwrap_or(f64::NAN),
            row.ssim_16k.unwrap_or(f64::NAN),
            row.ssim_48k.unwrap_or(f64::NAN),
            row.si_snr_db.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
