use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use speech_restore::audio::{load_wav, resample, save_wav, AudioBuffer, BitDepth};
use speech_restore::corpus::white_noise;
use speech_restore::degrade::{degrade, synth_rir, Profile};
use speech_restore::diffusion::{iterative_refine, restore, RefineStage, RESTORE_INPUT_RATE};
use speech_restore::error::{Error, Result};
use speech_restore::metrics::{evaluate_pair, refinement_report, write_rows, MetricRow};
use speech_restore::pipeline::{
    filter_by_mos, fit_from_manifest, ingest_manifest, item_seed, item_spec, run_pipeline, split_assets,
    PipelineConfig,
};
use speech_restore::recovery::recover;

#[derive(Parser)]
#[command(name = "speech-restore", version, about = "Degrade, recover, restore and evaluate speech")]
struct Cli {
    /// TOML config file; keys can also be set through SPEECH_RESTORE_<SECTION>__<KEY>.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a sampled degradation to one file.
    Degrade {
        input: PathBuf,
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        rir: Option<PathBuf>,
        #[arg(long)]
        profile: Option<Profile>,
    },
    /// Loudness-normalize and enhance one file at 16 kHz.
    Recover { input: PathBuf },
    /// Run latent diffusion restoration on one file, producing 48 kHz.
    Restore {
        input: PathBuf,
        #[arg(long)]
        denoiser: Option<PathBuf>,
    },
    /// Process every speech row of a manifest.
    Pipeline {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Score a processed file against its reference.
    Evaluate {
        reference: PathBuf,
        processed: PathBuf,
        #[arg(long)]
        id: Option<String>,
    },
    /// Feed outputs back through a stage and score every iteration.
    Refine {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, value_enum, default_value_t = Stage::Full)]
        stage: Stage,
    },
    /// Fit a linear denoiser on training speech from a manifest.
    FitDenoiser {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Synthesize an exponentially decaying room impulse response.
    SynthRir {
        #[arg(long)]
        t60: f64,
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 48_000)]
        rate: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Curate manifests.
    Manifest {
        #[command(subcommand)]
        action: ManifestAction,
    },
}

#[derive(Subcommand)]
enum ManifestAction {
    /// Drop speech rows whose MOS is below the threshold.
    Filter(FilterArgs),
    /// Split noise and RIR rows into train and eval.
    Split(SplitArgs),
}

#[derive(Args)]
struct FilterArgs {
    manifest: PathBuf,
    #[arg(long, default_value_t = 4.0)]
    threshold: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Full,
    Recover,
    Restore,
    Identity,
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "audio".into())
}

fn ensure_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::Io { path: p.to_path_buf(), source: e })
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| Error::Io { path: p.to_path_buf(), source: e })
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.run.out = o.clone();
    }
    if let Some(j) = cli.jobs {
        cfg.run.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_manifest(mut cfg: PipelineConfig, manifest: &Option<PathBuf>) -> Result<PipelineConfig> {
    if manifest.is_some() {
        cfg.run.manifest = manifest.clone();
        cfg.validate()?;
    }
    Ok(cfg)
}

fn at_restore_rate(x: &AudioBuffer) -> Result<AudioBuffer> {
    if x.sample_rate() != RESTORE_INPUT_RATE {
        log::info!("resampling {} Hz input to {RESTORE_INPUT_RATE} Hz for restoration", x.sample_rate());
    }
    resample(x, RESTORE_INPUT_RATE)
}

fn print_rows(rows: &[MetricRow]) -> Result<()> {
    write_rows(rows, std::io::stdout().lock())
}

/// Returns whether every item succeeded.
fn run(cli: &Cli, mut cfg: PipelineConfig) -> Result<bool> {
    let out = cfg.run.out.clone();
    match &cli.command {
        Command::Degrade { input, noise, rir, profile } => {
            if let Some(p) = profile {
                cfg.degrade.profile = *p;
            }
            let clean = load_wav(input)?;
            let rate = clean.sample_rate();
            let spec = item_spec(&cfg, cfg.run.seed);
            let noise = match noise {
                Some(p) => resample(&load_wav(p)?, rate)?,
                None => white_noise(0.1, clean.duration_s(), rate, cfg.run.seed),
            };
            let rir = rir.as_ref().map(|p| load_wav(p).and_then(|h| resample(&h, rate))).transpose()?;
            let pair = degrade(&clean, Some(&noise), rir.as_ref(), &spec)?;
            ensure_dir(&out)?;
            let path = out.join(format!("{}.degraded.wav", stem(input)));
            save_wav(&pair.degraded, &path, BitDepth::Float32)?;
            write_text(&path.with_extension("json"), &serde_json::to_string_pretty(&spec)?)?;
            println!("{}", path.display());
        }
        Command::Recover { input } => {
            let r = recover(&load_wav(input)?, cfg.enhancer().build()?.as_ref(), cfg.recovery.target_lufs)?;
            ensure_dir(&out)?;
            let path = out.join(format!("{}.recovered.wav", stem(input)));
            save_wav(&r.audio, &path, BitDepth::Float32)?;
            println!("{}", path.display());
        }
        Command::Restore { input, denoiser } => {
            if denoiser.is_some() {
                cfg.restoration.denoiser = denoiser.clone();
                cfg.validate()?;
            }
            let (d, schedule) = cfg.denoiser()?;
            let x = at_restore_rate(&load_wav(input)?)?;
            let r = restore(&x, d.as_ref(), &schedule, &cfg.restore_config(), cfg.run.seed)?;
            ensure_dir(&out)?;
            let path = out.join(format!("{}.restored.wav", stem(input)));
            save_wav(&r.audio, &path, BitDepth::Float32)?;
            println!("{}", path.display());
        }
        Command::Pipeline { manifest } => {
            let cfg = with_manifest(cfg, manifest)?;
            let Some(m) = &cfg.run.manifest else {
                return Err(Error::Config("pipeline needs a manifest (--manifest or run.manifest)".into()));
            };
            let outcome = run_pipeline(&cfg, &ingest_manifest(m)?)?;
            let r = &outcome.report;
            log::info!("{} items done ({} reused), {} failed", r.items.len(), r.reused, r.failed.len());
            println!("{}", outcome.run_dir.display());
            return Ok(r.failed.is_empty());
        }
        Command::Evaluate { reference, processed, id } => {
            let id = id.clone().unwrap_or_else(|| stem(processed));
            let row = evaluate_pair(&load_wav(reference)?, &load_wav(processed)?, &id, 1)?;
            print_rows(&[row])?;
        }
        Command::Refine { inputs, iterations, stage } => {
            let iterations = iterations.unwrap_or(cfg.evaluate.iterations);
            let enhancer = cfg.enhancer().build()?;
            let (denoiser, schedule) = cfg.denoiser()?;
            let rcfg = cfg.restore_config();
            let target = cfg.recovery.target_lufs;
            let mut rows = Vec::new();
            let mut ok = true;
            for input in inputs {
                let id = stem(input);
                let seed = item_seed(cfg.run.seed, &id);
                let recover_stage = |a: &AudioBuffer, _: usize| Ok(recover(a, enhancer.as_ref(), target)?.audio);
                let restore_stage = |a: &AudioBuffer, k: usize| {
                    Ok(restore(&at_restore_rate(a)?, denoiser.as_ref(), &schedule, &rcfg, seed.wrapping_add(k as u64))?.audio)
                };
                let identity = |a: &AudioBuffer, _: usize| Ok(a.clone());
                let stages: Vec<RefineStage<'_>> = match stage {
                    Stage::Full => vec![&recover_stage, &restore_stage],
                    Stage::Recover => vec![&recover_stage],
                    Stage::Restore => vec![&restore_stage],
                    Stage::Identity => vec![&identity],
                };
                let steps = match load_wav(input).and_then(|x| iterative_refine(&x, &stages, iterations, &id)) {
                    Ok(s) => s,
                    Err(e) => {
                        log::error!("{id}: {e}");
                        ok = false;
                        continue;
                    }
                };
                let dir = out.join(&id);
                ensure_dir(&dir)?;
                for s in steps {
                    save_wav(&s.audio, dir.join(format!("iter{}.wav", s.row.iteration)), BitDepth::Float32)?;
                    rows.push(s.row);
                }
            }
            ensure_dir(&out)?;
            let files = refinement_report(&rows, &out, cfg.evaluate.svg)?;
            println!("{}", files.metrics_csv.display());
            return Ok(ok);
        }
        Command::FitDenoiser { manifest, output } => {
            let cfg = with_manifest(cfg, manifest)?;
            let Some(m) = &cfg.run.manifest else {
                return Err(Error::Config("fit-denoiser needs a manifest (--manifest or run.manifest)".into()));
            };
            let (d, schedule, n) = fit_from_manifest(&cfg, &ingest_manifest(m)?)?;
            ensure_dir(&out)?;
            let path = output.clone().unwrap_or_else(|| out.join("denoiser.json"));
            d.save(&schedule, &path)?;
            log::info!("fitted on {n} pairs");
            println!("{}", path.display());
        }
        Command::SynthRir { t60, duration, rate, output } => {
            let h = synth_rir(*t60, *duration, *rate, cfg.run.seed)?;
            let path = match output {
                Some(p) => p.clone(),
                None => {
                    ensure_dir(&out)?;
                    out.join(format!("rir_t60_{t60}s.wav"))
                }
            };
            save_wav(&h, &path, BitDepth::Float32)?;
            println!("{}", path.display());
        }
        Command::Manifest { action } => {
            let (result, source, output, suffix) = match action {
                ManifestAction::Filter(a) => (filter_by_mos(&ingest_manifest(&a.manifest)?, a.threshold), &a.manifest, &a.output, "filtered"),
                ManifestAction::Split(a) => (split_assets(&ingest_manifest(&a.manifest)?, a.fraction, cfg.run.seed)?, &a.manifest, &a.output, "split"),
            };
            let path = match output {
                Some(p) => p.clone(),
                None => {
                    ensure_dir(&out)?;
                    let ext = source.extension().and_then(|e| e.to_str()).unwrap_or("csv");
                    out.join(format!("{}.{suffix}.{ext}", stem(source)))
                }
            };
            result.save(&path)?;
            println!("{}", path.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            log::error!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(1)
        }
    }
}
