use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{CodecMode, PipelineConfig};
use super::manifest::{Manifest, ManifestRecord, Role, Split};
use crate::audio::{load_wav, resample, save_wav, AudioBuffer, BitDepth};
use crate::corpus::white_noise;
use crate::degrade::{degrade, sample_degradation, Codec, DegradationSpec, Profile};
use crate::diffusion::{restore, Denoiser, NoiseSchedule, RestoreConfig};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_pair, write_rows, MetricRow};
use crate::recovery::{recover, Enhancer};

const REPORT_VERSION: u32 = 1;
// Stream for asset selection, distinct from the degradation streams.
const STREAM_ASSETS: u64 = 16;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageDurations {
    pub degrade_s: f64,
    pub recover_s: f64,
    pub restore_s: f64,
    pub evaluate_s: f64,
}

impl StageDurations {
    fn add(&mut self, o: &StageDurations) {
        self.degrade_s += o.degrade_s;
        self.recover_s += o.recover_s;
        self.restore_s += o.restore_s;
        self.evaluate_s += o.evaluate_s;
    }
}

/// Output paths relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutputs {
    pub degraded: PathBuf,
    pub recovered: PathBuf,
    pub restored: Option<PathBuf>,
}

impl ItemOutputs {
    fn all(&self) -> impl Iterator<Item = &PathBuf> {
        [&self.degraded, &self.recovered].into_iter().chain(self.restored.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemReport {
    pub id: String,
    pub source: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    pub noise: Option<PathBuf>,
    pub rir: Option<PathBuf>,
    pub spec: DegradationSpec,
    pub outputs: ItemOutputs,
    pub rows: Vec<MetricRow>,
    pub durations: StageDurations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedItem {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub run_id: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub stage_totals: StageDurations,
    pub items: Vec<ItemReport>,
    pub failed: Vec<FailedItem>,
    /// Items reused from an earlier run; not serialized so that a resumed
    /// report matches the original.
    #[serde(skip)]
    pub reused: usize,
}

impl RunReport {
    pub fn rows(&self) -> Vec<MetricRow> {
        self.items.iter().flat_map(|i| i.rows.iter().cloned()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub report: RunReport,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of everything that determines the outputs: the config minus its
/// scheduling keys, and the manifest.
pub fn config_hash(config: &PipelineConfig, manifest: &Manifest) -> Result<String> {
    let mut c = config.clone();
    c.run.out = PathBuf::new();
    c.run.jobs = 0;
    c.run.resume = true;
    c.run.manifest = None;
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&c)?);
    h.update(serde_json::to_vec(&manifest.records)?);
    if let Some(p) = &config.restoration.denoiser {
        h.update(fs::read(p).map_err(|e| Error::io(p, e))?);
    }
    Ok(hex(&h.finalize()))
}

/// Per-item seed derived from the master seed and the item id.
pub fn item_seed(master: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// File stems made unique by a numeric suffix, in manifest order.
pub fn item_ids<'a>(records: impl IntoIterator<Item = &'a ManifestRecord>) -> Vec<String> {
    let mut seen = HashSet::new();
    records
        .into_iter()
        .map(|r| {
            let stem = r.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "item".into());
            let mut id = stem.clone();
            let mut k = 2;
            while !seen.insert(id.clone()) {
                id = format!("{stem}-{k}");
                k += 1;
            }
            id
        })
        .collect()
}

/// Draws the degradation for one item and applies the configured codec mode.
pub fn item_spec(config: &PipelineConfig, seed: u64) -> DegradationSpec {
    let mut spec = sample_degradation(config.degrade.profile, seed);
    if spec.codec != Codec::None {
        spec.codec = match config.degrade.codec {
            CodecMode::None => Codec::None,
            CodecMode::Proxy => spec.codec,
            CodecMode::External => Codec::External(config.external_codec().expect("external codec configured")),
        };
    }
    spec
}

fn split_for(profile: Profile) -> Split {
    match profile {
        Profile::Train => Split::Train,
        Profile::Eval => Split::Eval,
    }
}

fn pick<'a>(assets: &[&'a ManifestRecord], rng: &mut ChaCha8Rng) -> Option<&'a ManifestRecord> {
    // Always draw so the stream does not depend on which roles are present.
    let u: f64 = rng.random();
    (!assets.is_empty()).then(|| assets[((u * assets.len() as f64) as usize).min(assets.len() - 1)])
}

fn load_at(path: &Path, rate: u32) -> Result<AudioBuffer> {
    resample(&load_wav(path)?, rate)
}

struct Shared<'a> {
    config: &'a PipelineConfig,
    hash: &'a str,
    run_dir: &'a Path,
    noise: Vec<&'a ManifestRecord>,
    rirs: Vec<&'a ManifestRecord>,
    enhancer: Box<dyn Enhancer>,
    denoiser: Box<dyn Denoiser>,
    schedule: NoiseSchedule,
    restore_cfg: RestoreConfig,
}

fn item_json(run_dir: &Path, id: &str) -> PathBuf {
    run_dir.join("items").join(format!("{id}.json"))
}

fn reusable(shared: &Shared<'_>, id: &str) -> Option<ItemReport> {
    let text = fs::read_to_string(item_json(shared.run_dir, id)).ok()?;
    let item: ItemReport = serde_json::from_str(&text).ok()?;
    let complete = item.config_hash == shared.hash && item.outputs.all().all(|p| shared.run_dir.join(p).is_file());
    complete.then_some(item)
}

fn process_item(shared: &Shared<'_>, record: &ManifestRecord, id: &str) -> Result<ItemReport> {
    let cfg = shared.config;
    let seed = item_seed(cfg.run.seed, id);
    let spec = item_spec(cfg, seed);
    log::info!("{id}: seed {seed:#018x} spec {}", serde_json::to_string(&spec)?);
    let mut durations = StageDurations::default();

    let clock = Instant::now();
    let clean = load_wav(&record.path)?;
    let rate = clean.sample_rate();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_ASSETS);
    let noise_rec = pick(&shared.noise, &mut rng);
    let rir_rec = pick(&shared.rirs, &mut rng);
    let noise = match noise_rec {
        Some(r) => load_at(&r.path, rate)?,
        None => white_noise(0.1, clean.duration_s(), rate, rng.random()),
    };
    let rir = match rir_rec {
        Some(r) if spec.apply_reverb => Some(load_at(&r.path, rate)?),
        _ => None,
    };
    let pair = degrade(&clean, Some(&noise), rir.as_ref(), &spec)?;
    durations.degrade_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let recovered = recover(&pair.degraded, shared.enhancer.as_ref(), cfg.recovery.target_lufs)?.audio;
    durations.recover_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let restored = if cfg.restoration.enabled {
        Some(restore(&recovered, shared.denoiser.as_ref(), &shared.schedule, &shared.restore_cfg, seed)?.audio)
    } else {
        None
    };
    durations.restore_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mut rows = vec![evaluate_pair(&clean, &recovered, &format!("{id}#recovered"), 1)?];
    if let Some(r) = &restored {
        rows.push(evaluate_pair(&clean, r, &format!("{id}#restored"), 1)?);
    }
    for row in &mut rows {
        row.external_mos = record.external_mos;
    }
    durations.evaluate_s = clock.elapsed().as_secs_f64();

    let outputs = ItemOutputs {
        degraded: PathBuf::from("degraded").join(format!("{id}.wav")),
        recovered: PathBuf::from("recovered").join(format!("{id}.wav")),
        restored: restored.as_ref().map(|_| PathBuf::from("restored").join(format!("{id}.wav"))),
    };
    save_wav(&pair.degraded, shared.run_dir.join(&outputs.degraded), BitDepth::Float32)?;
    save_wav(&recovered, shared.run_dir.join(&outputs.recovered), BitDepth::Float32)?;
    if let (Some(r), Some(p)) = (&restored, &outputs.restored) {
        save_wav(r, shared.run_dir.join(p), BitDepth::Float32)?;
    }
    let item = ItemReport {
        id: id.to_string(),
        source: record.path.clone(),
        config_hash: shared.hash.to_string(),
        seed,
        noise: noise_rec.map(|r| r.path.clone()),
        rir: rir.as_ref().and(rir_rec).map(|r| r.path.clone()),
        spec,
        outputs,
        rows,
        durations,
    };
    let path = item_json(shared.run_dir, id);
    fs::write(&path, serde_json::to_string_pretty(&item)?).map_err(|e| Error::io(&path, e))?;
    Ok(item)
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Runs degrade, recover, restore and evaluate over every speech row.
///
/// Outputs land in `<out>/<run id>/`. Per-item failures are collected in
/// the report instead of aborting the run.
pub fn run_pipeline(config: &PipelineConfig, manifest: &Manifest) -> Result<RunOutcome> {
    config.validate()?;
    let hash = config_hash(config, manifest)?;
    let run_id = hash[..12].to_string();
    let run_dir = config.run.out.join(&run_id);
    for sub in ["degraded", "recovered", "restored", "items"] {
        create_dir(&run_dir.join(sub))?;
    }
    let snapshot = run_dir.join("config.toml");
    fs::write(&snapshot, config.to_toml()).map_err(|e| Error::io(&snapshot, e))?;
    manifest.save(run_dir.join("manifest.csv"))?;

    let split = split_for(config.degrade.profile);
    let (denoiser, schedule) = config.denoiser()?;
    let shared = Shared {
        config,
        hash: &hash,
        run_dir: &run_dir,
        noise: manifest.assets(Role::Noise, split),
        rirs: manifest.assets(Role::Rir, split),
        enhancer: config.enhancer().build()?,
        denoiser,
        schedule,
        restore_cfg: config.restore_config(),
    };
    if shared.noise.is_empty() {
        log::warn!("manifest has no noise assets; mixing seeded white noise");
    }
    let speech: Vec<&ManifestRecord> = manifest.with_role(Role::Speech).collect();
    let ids = item_ids(speech.iter().copied());
    log::info!("run {run_id}: {} items into {}", speech.len(), run_dir.display());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.run.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<(String, Result<ItemReport>, bool)> = pool.install(|| {
        speech
            .par_iter()
            .zip(ids.par_iter())
            .map(|(record, id)| {
                if config.run.resume {
                    if let Some(item) = reusable(&shared, id) {
                        log::info!("{id}: outputs up to date, skipped");
                        return (id.clone(), Ok(item), true);
                    }
                }
                (id.clone(), process_item(&shared, record, id), false)
            })
            .collect()
    });

    let mut report = RunReport {
        version: REPORT_VERSION,
        run_id,
        config_hash: hash.clone(),
        master_seed: config.run.seed,
        stage_totals: StageDurations::default(),
        items: Vec::new(),
        failed: Vec::new(),
        reused: 0,
    };
    for (id, result, reused) in results {
        match result {
            Ok(item) => {
                report.stage_totals.add(&item.durations);
                report.reused += reused as usize;
                report.items.push(item);
            }
            Err(e) => {
                log::error!("{id}: {e}");
                report.failed.push(FailedItem { id, error: e.to_string() });
            }
        }
    }
    report.items.sort_by(|a, b| a.id.cmp(&b.id));
    report.failed.sort_by(|a, b| a.id.cmp(&b.id));

    let csv_path = run_dir.join("metrics.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_rows(&report.rows(), file)?;
    let report_path = run_dir.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&report_path, e))?;
    Ok(RunOutcome { run_dir, report })
}
