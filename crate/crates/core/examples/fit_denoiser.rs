//! Fitting a bucketed linear denoiser and saving it as a sidecar.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use speech_restore::diffusion::{fit_linear_denoiser, training_loss, LinearDenoiser, NoiseSchedule, TrainingPair, ZeroDenoiser};
use speech_restore::error::Result;

fn main() -> Result<()> {
    let s = NoiseSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut n = || -> f64 { StandardNormal.sample(&mut rng) };
    // The conditioning is the target plus noise of standard deviation 0.5.
    let pairs: Vec<TrainingPair> = (0..20_000)
        .map(|_| {
            let y: Vec<f64> = (0..4).map(|_| n()).collect();
            let c = y.iter().map(|v| v + 0.5 * n()).collect();
            TrainingPair { z_y: y, z_0: c }
        })
        .collect();
    let d = fit_linear_denoiser(&pairs, &s, 1e-4, 8, 1)?;
    for b in &d.buckets {
        println!("steps {:>4}..{:<4} a {:+.3} b {:+.3} c {:+.3}", b.first_step, b.last_step, b.a, b.b, b.c);
    }
    let held = &pairs[..500];
    let etas: Vec<Vec<f64>> = held.iter().map(|p| p.z_y.iter().map(|_| n()).collect()).collect();
    for t in [10, 500, 1000] {
        println!(
            "loss at t={t}: fitted {:.3}, zero {:.3}",
            training_loss(&d, held, t, &etas, &s)?,
            training_loss(&ZeroDenoiser, held, t, &etas, &s)?
        );
    }
    let dir = tempfile::tempdir().map_err(|e| speech_restore::error::Error::External(e.to_string()))?;
    let path = dir.path().join("denoiser.json");
    d.save(&s, &path)?;
    let (back, _) = LinearDenoiser::load(&path)?;
    println!("sidecar round trip equal: {}", back == d);
    Ok(())
}
