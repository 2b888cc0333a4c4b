//! Manifest handling, configuration and the batch driver.

mod config;
mod fit;
mod manifest;
mod run;

pub use config::{
    CodecMode, DegradeSection, EnhancerName, EvaluateSection, FitSection, PipelineConfig,
    RecoverySection, RestorationSection, RunSection, ENV_PREFIX,
};
pub use fit::{fit_from_manifest, latent_patch_pairs, training_pairs};
pub use manifest::{filter_by_mos, ingest_manifest, split_assets, Manifest, ManifestRecord, Role, Split};
pub use run::{
    config_hash, item_ids, item_seed, item_spec, run_pipeline, FailedItem, ItemOutputs, ItemReport,
    RunOutcome, RunReport, StageDurations,
};
