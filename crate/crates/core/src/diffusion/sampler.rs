use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::denoiser::Denoiser;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};

/// Descending, evenly spaced steps from `T` down to 1. A single step is `[T]`.
pub fn sampling_steps(total: usize, count: usize) -> Result<Vec<usize>> {
    if count < 1 || count > total {
        return Err(Error::InvalidArgument(format!("{count} sampling steps for a {total}-step schedule")));
    }
    if count == 1 {
        return Ok(vec![total]);
    }
    let mut steps: Vec<usize> = (0..count)
        .map(|i| 1 + ((total - 1) as f64 * i as f64 / (count - 1) as f64).round() as usize)
        .collect();
    steps.dedup();
    steps.reverse();
    Ok(steps)
}

/// Ancestral sampling conditioned on `cond`, starting from `N(0, I)`.
///
/// Between consecutive schedule steps the stored `alpha`, `beta` are used;
/// across strides the equivalent `alpha_bar` ratio. No noise is added on the
/// final step, so the result is the last clean-latent estimate.
pub fn ddpm_sample(
    denoiser: &dyn Denoiser,
    cond: &[f64],
    schedule: &NoiseSchedule,
    step_count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let steps = sampling_steps(schedule.steps(), step_count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<f64> = (0..cond.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    for (i, &t) in steps.iter().enumerate() {
        let prev = steps.get(i + 1).copied().unwrap_or(0);
        let z_hat = denoiser.predict(&z, cond, t, schedule);
        if z_hat.len() != z.len() {
            return Err(Error::DimensionMismatch { expected: z.len(), actual: z_hat.len() });
        }
        if prev == 0 {
            // alpha_bar(0) = 1: the posterior mean is the estimate itself.
            z = z_hat;
            break;
        }
        let ab_t = schedule.alpha_bar(t);
        let ab_prev = schedule.alpha_bar(prev);
        let (alpha, beta) = if prev + 1 == t {
            (schedule.alpha(t), schedule.beta(t))
        } else {
            let alpha = ab_t / ab_prev;
            (alpha, 1.0 - alpha)
        };
        let c_hat = ab_prev.sqrt() * beta / (1.0 - ab_t);
        let c_z = alpha.sqrt() * (1.0 - ab_prev) / (1.0 - ab_t);
        let sigma = (beta * (1.0 - ab_prev) / (1.0 - ab_t)).sqrt();
        for (zi, hi) in z.iter_mut().zip(&z_hat) {
            let n: f64 = StandardNormal.sample(&mut rng);
            *zi = c_hat * hi + c_z * *zi + sigma * n;
        }
    }
    Ok(z)
}
