//! Synthetic room impulse responses and their measured reverberation time.

use speech_restore::degrade::{apply_reverb, synth_rir};
use speech_restore::corpus::HarmonicSpeech;
use speech_restore::error::Result;
use speech_restore::metrics::schroeder_t60;

fn main() -> Result<()> {
    for t60 in [0.1, 0.3, 0.5, 1.0] {
        let h = synth_rir(t60, 1.5 * t60, 48_000, 7)?;
        let est = schroeder_t60(&h)?;
        println!("requested {t60:.1} s, measured {:.3} s", est.seconds);
    }
    let speech = HarmonicSpeech::default().render(1.0, 48_000);
    let wet = apply_reverb(&speech, &synth_rir(0.4, 0.6, 48_000, 1)?)?;
    println!("reverberant speech keeps length {} == {}", wet.len(), speech.len());
    Ok(())
}
