//! Manifest ingestion, MOS filtering and asset splitting.

use std::fs;

use speech_restore::audio::{save_wav, BitDepth};
use speech_restore::corpus::{white_noise, HarmonicSpeech};
use speech_restore::error::{Error, Result};
use speech_restore::pipeline::{filter_by_mos, ingest_manifest, split_assets, Role, Split};

fn main() -> Result<()> {
    let dir = tempfile::tempdir().map_err(|e| Error::External(e.to_string()))?;
    let mut rows = vec!["path,external_mos,split,role".to_string()];
    for (i, mos) in [3.2, 3.9, 4.0, 4.6].iter().enumerate() {
        save_wav(&HarmonicSpeech::with_seed(i as u64).render(1.0, 16_000), dir.path().join(format!("s{i}.wav")), BitDepth::Pcm16)?;
        rows.push(format!("s{i}.wav,{mos},train,speech"));
    }
    for i in 0..10 {
        save_wav(&white_noise(0.1, 1.0, 16_000, i), dir.path().join(format!("n{i}.wav")), BitDepth::Pcm16)?;
        rows.push(format!("n{i}.wav,,train,noise"));
    }
    let path = dir.path().join("manifest.csv");
    fs::write(&path, rows.join("\n")).map_err(|e| Error::External(e.to_string()))?;

    let m = ingest_manifest(&path)?;
    let kept = filter_by_mos(&m, 4.0);
    println!("{} speech rows, {} with MOS >= 4", m.with_role(Role::Speech).count(), kept.with_role(Role::Speech).count());
    let split = split_assets(&kept, 0.8, 0)?;
    let train = split.with_role(Role::Noise).filter(|r| r.split == Split::Train).count();
    println!("noise: {train} train / {} eval", split.with_role(Role::Noise).count() - train);
    print!("{}", split.to_csv()?.lines().take(3).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
