#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use speech_restore::audio::{save_wav, AudioBuffer, BitDepth};
use speech_restore::corpus::{white_noise, HarmonicSpeech};

pub const BIN: &str = env!("CARGO_BIN_EXE_speech-restore");

/// Clean items rendered at a mix of rates, one noise file per split, and a
/// CSV manifest listing them with relative paths.
pub struct ToyCorpus {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub speech: Vec<(PathBuf, AudioBuffer)>,
}

pub fn toy_corpus(dir: &Path, items: usize, duration_s: f64) -> ToyCorpus {
    fs::create_dir_all(dir).unwrap();
    let rates = [16_000, 48_000, 24_000];
    let mut rows = vec!["path,external_mos,split,role".to_string()];
    let mut speech = Vec::new();
    for i in 0..items {
        let rate = rates[i % rates.len()];
        let x = HarmonicSpeech::with_seed(i as u64).render(duration_s + 0.25 * i as f64, rate);
        let name = format!("speech_{i}.wav");
        save_wav(&x, dir.join(&name), BitDepth::Float32).unwrap();
        rows.push(format!("{name},{},eval,speech", 4.0 + 0.1 * i as f64));
        speech.push((dir.join(&name), x));
    }
    for (k, split) in ["train", "eval"].iter().enumerate() {
        let n = white_noise(0.1, duration_s + 2.0, 16_000, 100 + k as u64);
        let name = format!("noise_{split}.wav");
        save_wav(&n, dir.join(&name), BitDepth::Float32).unwrap();
        rows.push(format!("{name},,{split},noise"));
    }
    let manifest = dir.join("manifest.csv");
    fs::write(&manifest, rows.join("\n") + "\n").unwrap();
    ToyCorpus { dir: dir.to_path_buf(), manifest, speech }
}

/// Runs the CLI with a clean environment for config overrides.
pub fn cli(args: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    for (k, _) in std::env::vars() {
        if k.starts_with("SPEECH_RESTORE_") {
            cmd.env_remove(k);
        }
    }
    cmd.env("RUST_LOG", "warn").args(args).output().expect("binary runs")
}

/// Single run directory created under `out`.
pub fn run_dir(out: &Path) -> PathBuf {
    let mut dirs: Vec<_> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.pop().unwrap()
}

/// Relative path and bytes of every file below `root`, sorted.
pub fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
