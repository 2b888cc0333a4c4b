//! Resampling, chunking, silence trimming, STFT and mel inversion.

use speech_restore::audio::{
    chunk_default, invert_mel_with, istft, mel_spectrogram, resample, stft, trim_silence, AudioBuffer,
    GriffinLimConfig, MelConfig,
};
use speech_restore::corpus::HarmonicSpeech;
use speech_restore::error::Result;

fn main() -> Result<()> {
    let speech = HarmonicSpeech::default().render(2.0, 16_000);
    let mut padded = vec![0.0; 16_000];
    padded.extend_from_slice(speech.samples());
    padded.extend(vec![0.0; 16_000]);
    let padded = AudioBuffer::new(padded, 16_000)?;

    let trimmed = trim_silence(&padded, -40.0, 20.0)?;
    println!("trim: {:.2} s -> {:.2} s", padded.duration_s(), trimmed.buffer.duration_s());

    let long = HarmonicSpeech::default().render(11.0, 48_000);
    let chunks = chunk_default(&long);
    println!("chunk: 11 s -> {} chunks of {:.2} s", chunks.len(), chunks[0].duration_s());

    let spec = stft(&speech, 32.0, 8.0)?;
    let back = istft(&spec)?;
    let err: f64 = speech.samples().iter().zip(back.samples()).map(|(a, b)| (a - b).powi(2)).sum();
    println!("stft: {} frames x {} bins, round-trip error {:.1e}", spec.frames(), spec.n_bins(), (err / speech.energy()).sqrt());

    let full_band = resample(&speech, 48_000)?;
    let mel = mel_spectrogram(&full_band, &MelConfig::default())?;
    let inv = invert_mel_with(&mel, &GriffinLimConfig::default())?;
    println!(
        "griffin-lim: spectral convergence {:.3} -> {:.3} over {} iterations",
        inv.convergence[0],
        inv.convergence.last().unwrap(),
        inv.convergence.len()
    );
    Ok(())
}
