use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::{GriffinLimConfig, MelConfig};
use crate::degrade::{ExternalCodec, Profile};
use crate::diffusion::{
    ConditioningDenoiser, Denoiser, LinearDenoiser, NoiseSchedule, RestoreConfig, ScheduleParams,
};
use crate::error::{Error, Result};
use crate::latent::CodecConfig;
use crate::loudness::DEFAULT_TARGET_LUFS;
use crate::recovery::{EnhancerConfig, SpectralGate};

/// Every key `section.key` can be overridden by `SPEECH_RESTORE_SECTION__KEY`.
pub const ENV_PREFIX: &str = "SPEECH_RESTORE_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub manifest: Option<PathBuf>,
    pub resume: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, out: PathBuf::from("runs"), jobs: 0, manifest: None, resume: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CodecMode {
    None,
    #[default]
    Proxy,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradeSection {
    pub profile: Profile,
    /// What a drawn codec stage does; `none` disables it.
    pub codec: CodecMode,
    pub codec_encode: String,
    pub codec_decode: String,
}

impl Default for DegradeSection {
    fn default() -> Self {
        Self { profile: Profile::Eval, codec: CodecMode::Proxy, codec_encode: String::new(), codec_decode: String::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnhancerName {
    Identity,
    #[default]
    SpectralGate,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverySection {
    pub target_lufs: f64,
    pub enhancer: EnhancerName,
    pub enhancer_command: String,
    pub oversubtraction: f64,
    pub floor_percentile: f64,
    pub gain_floor_db: f64,
}

impl Default for RecoverySection {
    fn default() -> Self {
        let g = SpectralGate::default();
        Self {
            target_lufs: DEFAULT_TARGET_LUFS,
            enhancer: EnhancerName::SpectralGate,
            enhancer_command: String::new(),
            oversubtraction: g.oversubtraction,
            floor_percentile: g.floor_percentile,
            gain_floor_db: g.gain_floor_db,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestorationSection {
    pub enabled: bool,
    /// Fitted denoiser sidecar; without one the sampler follows the conditioning.
    pub denoiser: Option<PathBuf>,
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub sampling_steps: usize,
    pub griffin_lim_iterations: usize,
    pub patch: usize,
    pub kept: usize,
}

impl Default for RestorationSection {
    fn default() -> Self {
        let s = ScheduleParams::default();
        let r = RestoreConfig::default();
        Self {
            enabled: true,
            denoiser: None,
            steps: s.steps,
            beta_start: s.beta_start,
            beta_end: s.beta_end,
            sampling_steps: r.sampling_steps,
            griffin_lim_iterations: r.griffin_lim.iterations,
            patch: r.codec.patch,
            kept: r.codec.kept,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub iterations: usize,
    pub svg: bool,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { iterations: 5, svg: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub ridge_lambda: f64,
    pub buckets: usize,
    /// Degradation draws per clean file.
    pub draws: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { ridge_lambda: 1e-4, buckets: crate::diffusion::DEFAULT_BUCKETS, draws: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub run: RunSection,
    pub degrade: DegradeSection,
    pub recovery: RecoverySection,
    pub restoration: RestorationSection,
    pub evaluate: EvaluateSection,
    pub fit: FitSection,
}

/// Parses an override value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_overrides(
    table: &mut toml::Table,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<()> {
    for (name, value) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let Some((section, key)) = rest.split_once("__") else {
            return Err(Error::Config(format!("{name}: expected {ENV_PREFIX}<SECTION>__<KEY>")));
        };
        let section = section.to_ascii_lowercase();
        let entry = table
            .entry(section.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(t) = entry else {
            return Err(Error::Config(format!("{section} is not a section")));
        };
        t.insert(key.to_ascii_lowercase(), parse_value(&value));
    }
    Ok(())
}

impl PipelineConfig {
    /// Parses TOML text and applies overrides from the given variables.
    pub fn from_toml_with_env(
        text: &str,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        apply_overrides(&mut table, vars)?;
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads an optional config file, then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.recovery.target_lufs.is_finite() {
            return bad(format!("recovery.target_lufs {}", self.recovery.target_lufs));
        }
        if self.recovery.enhancer == EnhancerName::External && self.recovery.enhancer_command.trim().is_empty() {
            return bad("recovery.enhancer_command is required for the external enhancer".into());
        }
        if self.degrade.codec == CodecMode::External
            && (self.degrade.codec_encode.trim().is_empty() || self.degrade.codec_decode.trim().is_empty())
        {
            return bad("degrade.codec_encode and degrade.codec_decode are required for the external codec".into());
        }
        self.enhancer().build()?;
        self.schedule()?;
        let r = &self.restoration;
        if r.sampling_steps < 1 || r.sampling_steps > r.steps {
            return bad(format!("restoration.sampling_steps {} outside 1..={}", r.sampling_steps, r.steps));
        }
        self.restore_config().codec.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(p) = &r.denoiser {
            if !p.is_file() {
                return bad(format!("restoration.denoiser {} does not exist", p.display()));
            }
        }
        if let Some(m) = &self.run.manifest {
            if !m.is_file() {
                return bad(format!("run.manifest {} does not exist", m.display()));
            }
        }
        if self.evaluate.iterations < 1 {
            return bad("evaluate.iterations must be at least 1".into());
        }
        if !(self.fit.ridge_lambda >= 0.0) || self.fit.buckets < 1 || self.fit.draws < 1 {
            return bad("fit section out of range".into());
        }
        Ok(())
    }

    pub fn enhancer(&self) -> EnhancerConfig {
        let r = &self.recovery;
        match r.enhancer {
            EnhancerName::Identity => EnhancerConfig::Identity,
            EnhancerName::External => EnhancerConfig::External { command: r.enhancer_command.clone() },
            EnhancerName::SpectralGate => EnhancerConfig::SpectralGate(SpectralGate {
                oversubtraction: r.oversubtraction,
                floor_percentile: r.floor_percentile,
                gain_floor_db: r.gain_floor_db,
                ..SpectralGate::default()
            }),
        }
    }

    pub fn external_codec(&self) -> Option<ExternalCodec> {
        (self.degrade.codec == CodecMode::External)
            .then(|| ExternalCodec::new(&self.degrade.codec_encode, &self.degrade.codec_decode))
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        let r = &self.restoration;
        NoiseSchedule::try_from(ScheduleParams { steps: r.steps, beta_start: r.beta_start, beta_end: r.beta_end })
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn restore_config(&self) -> RestoreConfig {
        let r = &self.restoration;
        RestoreConfig {
            mel: MelConfig::default(),
            codec: CodecConfig { patch: r.patch, kept: r.kept, ..CodecConfig::default() },
            sampling_steps: r.sampling_steps,
            griffin_lim: GriffinLimConfig { iterations: r.griffin_lim_iterations, ..GriffinLimConfig::default() },
        }
    }

    /// The configured denoiser and the schedule it runs under. A sidecar's
    /// own schedule takes precedence over the configured one.
    pub fn denoiser(&self) -> Result<(Box<dyn Denoiser>, NoiseSchedule)> {
        match &self.restoration.denoiser {
            Some(p) => {
                let (d, schedule) = LinearDenoiser::load(p)?;
                if schedule != self.schedule()? {
                    log::warn!("denoiser {} carries its own schedule; configured schedule ignored", p.display());
                }
                Ok((Box::new(d), schedule))
            }
            None => Ok((Box::new(ConditioningDenoiser), self.schedule()?)),
        }
    }
}
