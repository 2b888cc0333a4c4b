//! Integrated loudness measurement and normalization.

use speech_restore::corpus::{sine, HarmonicSpeech};
use speech_restore::error::Result;
use speech_restore::loudness::{measure_lufs, normalize_loudness, DEFAULT_TARGET_LUFS};

fn main() -> Result<()> {
    let tone = sine(997.0, 1.0, 3.0, 48_000);
    println!("full-scale 997 Hz sine: {:.2} LUFS", measure_lufs(&tone)?.integrated_lufs);

    let speech = HarmonicSpeech::default().render(3.0, 16_000).scaled(0.2);
    let before = measure_lufs(&speech)?;
    let (normalized, outcome) = normalize_loudness(&speech, DEFAULT_TARGET_LUFS)?;
    println!(
        "speech: {:.2} LUFS, gain {:.2} dB, now {:.2} LUFS ({} gated blocks)",
        before.integrated_lufs,
        20.0 * outcome.gain.log10(),
        measure_lufs(&normalized)?.integrated_lufs,
        before.gated_block_count
    );
    Ok(())
}
