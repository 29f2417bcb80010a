use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use phonalign::checks;
use phonalign::eval::{boundary_errors, metrics, MetricsReport};
use phonalign::io::checkpoint::read_checkpoint;
use phonalign::io::config::{config_to_text, read_config};
use phonalign::io::dataset::{load_utterances, vocabulary_from_labels};
use phonalign::io::features::load_features;
use phonalign::io::text::{read_boundaries, read_labels, read_manifest, write_boundaries, ManifestEntry};
use phonalign::synth::{synth_corpus, SynthSpec};
use phonalign::train::{decode, train_loop, Trainer};
use phonalign::Vocabulary;

#[derive(Parser)]
#[command(name = "phonalign", version, about = "Unsupervised phoneme forced alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with exact reference boundaries.
    Synth(SynthArgs),
    /// Train an aligner.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dev manifest scored every eval_interval steps.
        #[arg(long)]
        dev: Option<PathBuf>,
    },
    /// Decode one boundary TSV per utterance.
    Align {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted boundaries against the manifest's references.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Run the oracle and gradient self-checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    n_utts: usize,
    #[arg(long, default_value_t = 20)]
    n_dev: usize,
    #[arg(long, default_value_t = 10)]
    vocab_size: usize,
    #[arg(long, default_value_t = 3)]
    states_per_phoneme: usize,
    #[arg(long, default_value_t = 16)]
    feature_dim: usize,
    #[arg(long, default_value_t = 2)]
    min_dur: usize,
    #[arg(long, default_value_t = 8)]
    max_dur: usize,
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    frame_shift_us: u32,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Synth(a) => synth(a)?,
        Command::Train {
            config,
            manifest,
            out,
            dev,
        } => train(&config, &manifest, &out, dev.as_deref())?,
        Command::Align {
            checkpoint,
            manifest,
            out,
        } => align(&checkpoint, &manifest, &out)?,
        Command::Eval { pred, manifest } => eval(&pred, &manifest)?,
        Command::Check { seed } => return Ok(check(seed)),
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_utts: a.n_utts,
        n_dev: a.n_dev,
        vocab_size: a.vocab_size,
        states_per_phoneme: a.states_per_phoneme,
        feature_dim: a.feature_dim,
        min_dur: a.min_dur,
        max_dur: a.max_dur,
        noise_std: a.noise_std,
        seed: a.seed,
        frame_shift_us: a.frame_shift_us,
    };
    info!("synth spec: {spec:?}");
    let (_, paths) = synth_corpus(&spec, &a.out)?;
    println!("train manifest: {}", paths.train_manifest.display());
    println!("dev manifest: {}", paths.dev_manifest.display());
    Ok(())
}

fn train(config: &Path, manifest: &Path, out: &Path, dev: Option<&Path>) -> Result<()> {
    let cfg = read_config(config)?;
    info!("resolved config:\n{}", config_to_text(&cfg).trim_end());
    let train_entries = read_manifest(manifest)?;
    let dev_entries = dev.map(read_manifest).transpose()?.unwrap_or_default();
    let mut all = train_entries.clone();
    all.extend(dev_entries.iter().cloned());
    let vocab = vocabulary_from_labels(&all)?;
    info!("vocabulary ({}): {}", vocab.len(), vocab.symbols().join(" "));
    let train_utts = load_utterances(&train_entries, &vocab)?;
    let dev_utts = load_utterances(&dev_entries, &vocab)?;
    let (trainer, report) = train_loop(&train_utts, &dev_utts, &vocab, &cfg, Some(out))?;
    info!(
        "trained {} steps on {} utterances ({} skipped)",
        trainer.store.step(),
        report.processed,
        report.skipped
    );
    if let Some(last) = report.steps.last() {
        println!("final step {} L={:.6} L_align={:.6}", last.step, last.loss, last.l_align);
    }
    if let Some((step, m)) = report.evals.last() {
        println!("dev step {step}: {}", m.to_key_values());
    }
    if let Some(ckpt) = report.checkpoints.last() {
        println!("checkpoint: {}", ckpt.display());
    }
    Ok(())
}

fn align(checkpoint: &Path, manifest: &Path, out: &Path) -> Result<()> {
    let ckpt = read_checkpoint(checkpoint)?;
    info!(
        "checkpoint {} at step {}, config:\n{}",
        checkpoint.display(),
        ckpt.store.step(),
        config_to_text(&ckpt.config).trim_end()
    );
    let trainer = Trainer::from_checkpoint(ckpt)?;
    let entries = read_manifest(manifest)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (mut written, mut skipped) = (0, 0);
    for e in &entries {
        let features = load_features(&e.features)?;
        let phonemes = read_labels(&e.labels, &trainer.vocab)?;
        let states = phonemes.len() * trainer.config.states_per_phoneme;
        if features.num_frames() < states {
            warn!("skipping {}: {} frames < {} states", e.utt_id, features.num_frames(), states);
            skipped += 1;
            continue;
        }
        let (_, bounds) = decode(&trainer.model, &trainer.store, &trainer.config, &features, &phonemes)?;
        write_boundaries(&out.join(format!("{}.tsv", e.utt_id)), &bounds, &trainer.vocab)?;
        written += 1;
    }
    println!("aligned {written} utterances, skipped {skipped}");
    Ok(())
}

fn eval(pred: &Path, manifest: &Path) -> Result<()> {
    let entries = read_manifest(manifest)?;
    info!("eval pred={} manifest={}", pred.display(), manifest.display());
    let vocab = vocabulary_from_labels(&entries)?;
    let report = score(pred, &entries, &vocab)?;
    println!("| MAE (ms) | Median (ms) | 20 ms tol (%) | 50 ms tol (%) |");
    println!("|---|---|---|---|");
    println!(
        "| {:.2} | {:.2} | {:.2} | {:.2} |",
        report.mae_ms, report.median_ms, report.tol20_pct, report.tol50_pct
    );
    println!("{}", report.to_key_values());
    Ok(())
}

fn score(pred: &Path, entries: &[ManifestEntry], vocab: &Vocabulary) -> Result<MetricsReport> {
    let mut pooled = Vec::new();
    let mut missing = 0;
    for e in entries {
        let Some(reference) = &e.reference else {
            continue;
        };
        let shift = load_features(&e.features)?.frame_shift();
        let pred_path = pred.join(format!("{}.tsv", e.utt_id));
        if !pred_path.exists() {
            missing += 1;
            continue;
        }
        let r = read_boundaries(reference, shift, vocab)?;
        let p = read_boundaries(&pred_path, shift, vocab)?;
        pooled.extend(boundary_errors(&p, &r).with_context(|| format!("utterance {}", e.utt_id))?);
    }
    if missing > 0 {
        warn!("{missing} utterances have no prediction and were not scored");
    }
    if pooled.is_empty() {
        bail!("no boundaries to score under {}", pred.display());
    }
    Ok(metrics(&pooled)?)
}

fn check(seed: u64) -> ExitCode {
    info!("check seed={seed}");
    let results = checks::run_all(seed);
    for r in &results {
        println!("{r}");
    }
    if results.iter().all(|r| r.passed) {
        println!("all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("{} checks failed", results.iter().filter(|r| !r.passed).count());
        ExitCode::FAILURE
    }
}
