//! Latent DDPM: schedule, forward process, x0-predicting denoisers,
//! ancestral sampling, the restoration stage and iterative refinement.

mod denoiser;
mod restore;
mod sampler;
mod schedule;

pub use denoiser::{
    bucket_ranges, fit_linear_denoiser, gaussian_mmse_denoiser, training_loss, Bucket,
    ConditioningDenoiser, Denoiser, GaussianMmse, LinearDenoiser, TrainingPair, ZeroDenoiser,
    DEFAULT_BUCKETS, MIN_FIT_PAIRS,
};
pub use sampler::{ddpm_sample, sampling_steps};
pub use schedule::{forward_diffuse, make_schedule, NoiseSchedule, ScheduleParams};
pub use restore::{
    iterative_refine, restore, RefineStage, RefineStep, RestoreConfig, Restored, RESTORE_INPUT_RATE,
    RESTORE_OUTPUT_RATE,
};
