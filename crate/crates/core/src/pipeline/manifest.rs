use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::load_wav;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Speech,
    Noise,
    Rir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Speech => "speech",
            Role::Noise => "noise",
            Role::Rir => "rir",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub path: PathBuf,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub external_mos: Option<f64>,
    pub split: Split,
    pub role: Role,
}

/// Row as written by users: duration and rate may be left for probing.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    path: PathBuf,
    #[serde(default)]
    duration_s: Option<f64>,
    #[serde(default)]
    sample_rate: Option<u32>,
    #[serde(default)]
    external_mos: Option<f64>,
    split: Split,
    role: Role,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(&r.path) {
                return Err(Error::Manifest(format!("duplicate path {}", r.path.display())));
            }
            if !(r.duration_s > 0.0) {
                return Err(Error::Manifest(format!("{}: duration {} s", r.path.display(), r.duration_s)));
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.role == role)
    }

    /// Assets of `role` in `split`, or all of that role when the split is empty.
    pub fn assets(&self, role: Role, split: Split) -> Vec<&ManifestRecord> {
        let in_split: Vec<_> = self.with_role(role).filter(|r| r.split == split).collect();
        if in_split.is_empty() {
            self.with_role(role).collect()
        } else {
            in_split
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.records.is_empty() {
            w.write_record(["path", "duration_s", "sample_rate", "external_mos", "split", "role"])?;
        }
        for r in &self.records {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Manifest(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Writes CSV, or JSON lines when the extension is `jsonl`/`json`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if is_jsonl(path) { self.to_jsonl()? } else { self.to_csv()? };
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn is_jsonl(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "json"))
}

fn resolve(raw: RawRecord, base: &Path, line: usize) -> Result<ManifestRecord> {
    let path = if raw.path.is_absolute() { raw.path } else { base.join(raw.path) };
    if !path.is_file() {
        return Err(Error::Manifest(format!("line {line}: no such file {}", path.display())));
    }
    let (duration_s, sample_rate) = match (raw.duration_s, raw.sample_rate) {
        (Some(d), Some(r)) => (d, r),
        _ => {
            let audio = load_wav(&path)
                .map_err(|e| Error::Manifest(format!("line {line}: cannot probe {}: {e}", path.display())))?;
            (raw.duration_s.unwrap_or(audio.duration_s()), raw.sample_rate.unwrap_or(audio.sample_rate()))
        }
    };
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::Manifest(format!("line {line}: duration {duration_s} s")));
    }
    if let Some(m) = raw.external_mos {
        if !m.is_finite() {
            return Err(Error::Manifest(format!("line {line}: mos {m}")));
        }
    }
    Ok(ManifestRecord { path, duration_s, sample_rate, external_mos: raw.external_mos, split: raw.split, role: raw.role })
}

/// Reads a CSV or JSON-lines manifest. Relative paths are resolved against
/// the manifest's directory; missing durations and rates are probed.
pub fn ingest_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut records = Vec::new();
    if is_jsonl(path) {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = serde_json::from_str(line)
                .map_err(|e| Error::Manifest(format!("line {}: {e}", i + 1)))?;
            records.push(resolve(raw, &base, i + 1)?);
        }
    } else if !text.trim().is_empty() {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        for row in reader.deserialize::<RawRecord>() {
            let raw = row.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::Manifest(format!("line {line}: {e}"))
            })?;
            // Header is line 1.
            let line = records.len() + 2;
            records.push(resolve(raw, &base, line)?);
        }
    }
    if records.is_empty() {
        log::warn!("manifest {} is empty", path.display());
    }
    let mut seen: BTreeMap<&Path, usize> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(prev) = seen.insert(&r.path, i) {
            return Err(Error::Manifest(format!(
                "duplicate path {} (records {} and {})",
                r.path.display(),
                prev + 1,
                i + 1
            )));
        }
    }
    Manifest::new(records)
}

/// Removes speech rows whose external MOS is strictly below `threshold`.
/// Rows without a score are kept and reported.
pub fn filter_by_mos(manifest: &Manifest, threshold: f64) -> Manifest {
    let mut missing = 0usize;
    let records: Vec<ManifestRecord> = manifest
        .records
        .iter()
        .filter(|r| {
            if r.role != Role::Speech {
                return true;
            }
            match r.external_mos {
                Some(m) => m >= threshold,
                None => {
                    missing += 1;
                    true
                }
            }
        })
        .cloned()
        .collect();
    if missing > 0 {
        log::warn!("{missing} speech rows have no MOS and were kept");
    }
    let kept_speech = records.iter().filter(|r| r.role == Role::Speech).count();
    if kept_speech == 0 && manifest.with_role(Role::Speech).next().is_some() {
        log::warn!("every speech row is below MOS {threshold}");
    }
    Manifest { records }
}

/// Deterministically reassigns noise and RIR rows to train/eval with
/// `round(fraction * n)` training items per role. Speech rows are untouched.
pub fn split_assets(manifest: &Manifest, train_fraction: f64, seed: u64) -> Result<Manifest> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction {train_fraction}")));
    }
    let mut out = manifest.clone();
    for (k, role) in [Role::Noise, Role::Rir].into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..out.records.len()).filter(|&i| out.records[i].role == role).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Manifest(format!("cannot split a single {role} item")));
        }
        // Shuffle a path-sorted list so input order does not matter.
        idx.sort_by(|&a, &b| out.records[a].path.cmp(&out.records[b].path));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        idx.shuffle(&mut rng);
        let n_train = (train_fraction * idx.len() as f64).round() as usize;
        for (j, &i) in idx.iter().enumerate() {
            out.records[i].split = if j < n_train { Split::Train } else { Split::Eval };
        }
    }
    Ok(out)
}
