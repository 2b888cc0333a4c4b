//! Patch codec between dB mel-spectrograms and latents.

use speech_restore::audio::{mel_spectrogram, MelConfig};
use speech_restore::corpus::HarmonicSpeech;
use speech_restore::error::Result;
use speech_restore::latent::{decode, encode, CodecConfig, Latent};

fn main() -> Result<()> {
    let x = HarmonicSpeech::default().render(2.0, 48_000);
    let mel = mel_spectrogram(&x, &MelConfig::default())?.to_db();
    for kept in [16, 64, 256] {
        let cfg = CodecConfig { kept, ..CodecConfig::default() };
        let z = encode(&mel, &cfg)?;
        let back = decode(&z)?;
        let rmse = (mel.values().iter().zip(back.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            / mel.values().len() as f64)
            .sqrt();
        println!("kept {kept:>3}/256: {} coefficients for {} mel values, rmse {rmse:.2} dB", z.len(), mel.values().len());
    }
    let dir = tempfile::tempdir().map_err(|e| speech_restore::error::Error::External(e.to_string()))?;
    let path = dir.path().join("x.latent");
    let z = encode(&mel, &CodecConfig::default())?;
    z.save(&path)?;
    let loaded = Latent::load(&path)?;
    println!("saved and reloaded {} coefficients, geometry equal: {}", loaded.len(), loaded.geometry() == z.geometry());
    Ok(())
}
