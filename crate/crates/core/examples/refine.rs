//! Iterative refinement with per-iteration metrics and a trend report.

use speech_restore::audio::AudioBuffer;
use speech_restore::corpus::HarmonicSpeech;
use speech_restore::diffusion::{iterative_refine, restore, ConditioningDenoiser, NoiseSchedule, RestoreConfig};
use speech_restore::error::{Error, Result};
use speech_restore::metrics::refinement_report;
use speech_restore::recovery::{recover_default, SpectralGate};

fn main() -> Result<()> {
    let x = HarmonicSpeech::with_seed(3).render(1.5, 16_000);
    let schedule = NoiseSchedule::default();
    let cfg = RestoreConfig::default();
    let gate = SpectralGate::default();
    let recover_stage = |a: &AudioBuffer, _: usize| Ok(recover_default(a, &gate)?.audio);
    let restore_stage = |a: &AudioBuffer, k: usize| Ok(restore(a, &ConditioningDenoiser, &schedule, &cfg, k as u64)?.audio);
    let steps = iterative_refine(&x, &[&recover_stage, &restore_stage], 5, "item")?;
    for s in &steps {
        println!("iteration {}: si-snr {:.2} dB, ssim@48k {:.3}", s.row.iteration, s.row.si_snr_db.unwrap(), s.row.ssim_48k.unwrap());
    }
    let dir = tempfile::tempdir().map_err(|e| Error::External(e.to_string()))?;
    let rows: Vec<_> = steps.into_iter().map(|s| s.row).collect();
    let files = refinement_report(&rows, dir.path(), true)?;
    println!("wrote {} and {}", files.metrics_csv.display(), files.trend_json.display());
    Ok(())
}
