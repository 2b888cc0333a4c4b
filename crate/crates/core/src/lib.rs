//! Two-stage speech restoration toolkit.
//!
//! The crate is organised the way the processing chain runs:
//!
//! * [`audio`]: sample containers, WAV I/O, resampling, chunking, STFT and
//!   mel analysis with Griffin-Lim inversion.
//! * [`loudness`]: BS.1770 integrated loudness and normalization.
//! * [`degrade`]: synthetic degradations `x = d((y + n) * h)`.
//! * [`recovery`]: the 16 kHz recovery stage (loudness normalization then
//!   spectral enhancement).
//! * [`latent`]: an orthonormal patch codec that maps dB mel-spectrograms
//!   to compact latents and back.
//! * [`diffusion`]: DDPM schedule, x0-prediction objective, denoisers,
//!   ancestral sampling, the 48 kHz restoration stage and iterative
//!   refinement.
//! * [`metrics`]: eSTOI, spectrogram SSIM, SI-SNR, Schroeder T60 and
//!   refinement reports.
//! * [`pipeline`]: manifests, configuration and seeded batch orchestration.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod audio;
pub mod corpus;
pub mod degrade;
pub mod diffusion;
pub mod error;
mod external;
pub mod latent;
pub mod loudness;
pub mod metrics;
pub mod pipeline;
pub mod recovery;

pub use audio::AudioBuffer;
pub use error::{Error, Result};
