//! Batch run over a toy corpus: degrade, recover, restore, evaluate.

use std::fs;

use speech_restore::audio::{save_wav, BitDepth};
use speech_restore::corpus::{white_noise, HarmonicSpeech};
use speech_restore::error::{Error, Result};
use speech_restore::pipeline::{ingest_manifest, run_pipeline, PipelineConfig};

fn main() -> Result<()> {
    let dir = tempfile::tempdir().map_err(|e| Error::External(e.to_string()))?;
    let mut rows = vec!["path,split,role".to_string()];
    for i in 0..3 {
        save_wav(&HarmonicSpeech::with_seed(i).render(2.0, 48_000), dir.path().join(format!("utt{i}.wav")), BitDepth::Pcm24)?;
        rows.push(format!("utt{i}.wav,eval,speech"));
    }
    save_wav(&white_noise(0.1, 5.0, 16_000, 9), dir.path().join("babble.wav"), BitDepth::Pcm16)?;
    rows.push("babble.wav,eval,noise".into());
    let manifest_path = dir.path().join("manifest.csv");
    fs::write(&manifest_path, rows.join("\n")).map_err(|e| Error::External(e.to_string()))?;

    let mut config = PipelineConfig::default();
    config.run.out = dir.path().join("runs");
    config.run.seed = 42;
    let outcome = run_pipeline(&config, &ingest_manifest(&manifest_path)?)?;
    println!("run {} in {}", outcome.report.run_id, outcome.run_dir.display());
    for item in &outcome.report.items {
        for row in &item.rows {
            println!("  {:<16} si-snr {:6.2} dB, estoi {:.3}", row.item_id, row.si_snr_db.unwrap_or(f64::NAN), row.estoi.unwrap_or(f64::NAN));
        }
    }
    let t = outcome.report.stage_totals;
    println!("stage seconds: degrade {:.2}, recover {:.2}, restore {:.2}, evaluate {:.2}", t.degrade_s, t.recover_s, t.restore_s, t.evaluate_s);
    let again = run_pipeline(&config, &ingest_manifest(&manifest_path)?)?;
    println!("rerun reused {} of {} items", again.report.reused, again.report.items.len());
    Ok(())
}
