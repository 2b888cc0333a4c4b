use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::PipelineConfig;
use super::manifest::{Manifest, Role, Split};
use super::run::{item_ids, item_seed};
use crate::audio::{load_wav, mel_spectrogram, resample, AudioBuffer};
use crate::corpus::white_noise;
use crate::degrade::{degrade, sample_degradation, Profile};
use crate::diffusion::{fit_linear_denoiser, LinearDenoiser, NoiseSchedule, TrainingPair, RESTORE_OUTPUT_RATE};
use crate::error::{Error, Result};
use crate::latent::{encode, CodecConfig};
use crate::recovery::recover;

/// Aligned latent patches of a clean signal and of its recovered version
/// after upsampling. One pair per codec patch.
pub fn latent_patch_pairs(clean: &AudioBuffer, recovered: &AudioBuffer, codec: &CodecConfig) -> Result<Vec<TrainingPair>> {
    let cfg = PipelineConfig::default().restore_config().mel;
    let target = resample(clean, RESTORE_OUTPUT_RATE)?;
    let cond = resample(recovered, RESTORE_OUTPUT_RATE)?.with_len(target.len());
    let z_y = encode(&mel_spectrogram(&target, &cfg)?.to_db(), codec)?;
    let z_0 = encode(&mel_spectrogram(&cond, &cfg)?.to_db(), codec)?;
    if z_y.len() != z_0.len() {
        return Err(Error::DimensionMismatch { expected: z_y.len(), actual: z_0.len() });
    }
    Ok(z_y
        .coeffs()
        .chunks(codec.kept)
        .zip(z_0.coeffs().chunks(codec.kept))
        .map(|(y, c)| TrainingPair { z_y: y.to_vec(), z_0: c.to_vec() })
        .collect())
}

/// Builds training pairs from the training-split speech of `manifest`:
/// each file is degraded `config.fit.draws` times under the training
/// profile and passed through recovery.
pub fn training_pairs(config: &PipelineConfig, manifest: &Manifest) -> Result<Vec<TrainingPair>> {
    let mut speech: Vec<_> = manifest.with_role(Role::Speech).filter(|r| r.split == Split::Train).collect();
    if speech.is_empty() {
        speech = manifest.with_role(Role::Speech).collect();
    }
    let noise = manifest.assets(Role::Noise, Split::Train);
    let rirs = manifest.assets(Role::Rir, Split::Train);
    let enhancer = config.enhancer().build()?;
    let codec = config.restore_config().codec;
    let ids = item_ids(speech.iter().copied());
    let jobs: Vec<(usize, usize)> = (0..speech.len()).flat_map(|i| (0..config.fit.draws).map(move |d| (i, d))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.run.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let chunks: Vec<Result<Vec<TrainingPair>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, d)| {
                let seed = item_seed(config.run.seed, &format!("{}/fit{d}", ids[i]));
                let clean = load_wav(&speech[i].path)?;
                let rate = clean.sample_rate();
                let spec = sample_degradation(Profile::Train, seed);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let pick = |n: usize, u: f64| ((u * n as f64) as usize).min(n.saturating_sub(1));
                let (u_noise, u_rir): (f64, f64) = (rng.random(), rng.random());
                let noise = match noise.len() {
                    0 => white_noise(0.1, clean.duration_s(), rate, rng.random()),
                    n => resample(&load_wav(&noise[pick(n, u_noise)].path)?, rate)?,
                };
                let rir = match rirs.len() {
                    0 => None,
                    n => Some(resample(&load_wav(&rirs[pick(n, u_rir)].path)?, rate)?),
                };
                let pair = degrade(&clean, Some(&noise), rir.as_ref(), &spec)?;
                let recovered = recover(&pair.degraded, enhancer.as_ref(), config.recovery.target_lufs)?.audio;
                latent_patch_pairs(&clean, &recovered, &codec)
            })
            .collect()
    });
    let mut pairs = Vec::new();
    for c in chunks {
        pairs.extend(c?);
    }
    Ok(pairs)
}

/// Fits a bucketed linear denoiser on pairs built from `manifest`.
pub fn fit_from_manifest(config: &PipelineConfig, manifest: &Manifest) -> Result<(LinearDenoiser, NoiseSchedule, usize)> {
    let schedule = config.schedule()?;
    let pairs = training_pairs(config, manifest)?;
    log::info!("fitting on {} latent patch pairs", pairs.len());
    let d = fit_linear_denoiser(&pairs, &schedule, config.fit.ridge_lambda, config.fit.buckets, config.run.seed)?;
    Ok((d, schedule, pairs.len()))
}
