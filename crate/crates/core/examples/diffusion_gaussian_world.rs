//! Forward process and DDPM sampling against an analytic Gaussian prior.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use speech_restore::diffusion::{ddpm_sample, forward_diffuse, gaussian_mmse_denoiser, NoiseSchedule};
use speech_restore::error::Result;

fn stats(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64)
}

fn main() -> Result<()> {
    let s = NoiseSchedule::default();
    println!("alpha_bar: t=1 {:.5}, t=500 {:.5}, t=1000 {:.2e}", s.alpha_bar(1), s.alpha_bar(500), s.alpha_bar(1000));

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut normals = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let z = normals(50_000);
    for t in [1, 500, 1000] {
        let (_, var) = stats(&forward_diffuse(&z, t, &normals(50_000), &s)?);
        println!("var(z_t) at t={t}: {var:.4}");
    }

    let d = gaussian_mmse_denoiser(3.0, 0.5)?;
    let cond = vec![0.0; 10_000];
    for steps in [1000, 50, 10] {
        let (m, v) = stats(&ddpm_sample(&d, &cond, &s, steps, 1)?);
        println!("{steps:>4} sampling steps: mean {m:.3}, variance {v:.3} (target 3, 0.25)");
    }
    Ok(())
}
