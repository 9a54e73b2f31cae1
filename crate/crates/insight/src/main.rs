//! `insight` command-line tool: run the detection pipeline over a dataset
//! split, materialize the debiased prompt store, render reports, and manage
//! the response cache.
//!
//! Exit codes: 0 success, 2 config error, 3 dataset error, 4 backend error,
//! 5 artifact error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use insight::backend::{BackendKind, EntryStore};
use insight::config::{RunConfig, Toggles};
use insight::dataset::Split;
use insight::pipeline::{self, RunError};
use insight::report;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATASET: u8 = 3;
const EXIT_BACKEND: u8 = 4;
const EXIT_ARTIFACT: u8 = 5;

#[derive(Parser)]
#[command(name = "insight", version, about = "Multimodal misinformation detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Dataset split override.
    #[arg(long)]
    split: Option<String>,
    /// Toggle overrides, e.g. --toggle cap=off (repeatable).
    #[arg(long = "toggle")]
    toggles: Vec<String>,
    /// Stratified sample size per class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Continue past per-item hard failures.
    #[arg(long)]
    skip_failures: bool,
    /// Backend kind override: live|replay|scripted.
    #[arg(long)]
    backend: Option<String>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the pipeline over a dataset split and write the run artifact.
    Run(ConfigArgs),
    /// Materialize the debiased prompt store and its lock file.
    Adp(ConfigArgs),
    /// Render the tables of a finished run, optionally against a baseline.
    Report {
        run_dir: PathBuf,
        /// Baseline run directory; adds a delta row to every table.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Response-cache maintenance.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    /// Entry count and location.
    Stats {
        #[arg(long)]
        config: PathBuf,
    },
    /// Delete every cached entry.
    Clear {
        #[arg(long)]
        config: PathBuf,
    },
    /// Copy the cache entries touched by a run into a replayable transcript.
    ExportTranscript {
        #[arg(long)]
        config: PathBuf,
        /// Finished run directory (source of the touched-keys list).
        #[arg(long)]
        run: PathBuf,
        /// Destination transcript directory.
        #[arg(long)]
        dest: PathBuf,
    },
}

fn resolve_config(args: &ConfigArgs) -> Result<RunConfig, (u8, String)> {
    let mut config = RunConfig::load(&args.config)
        .map_err(|e| (EXIT_CONFIG, format!("cannot load config: {e}")))?;
    if let Some(split) = &args.split {
        config.split = Split::parse(split)
            .ok_or_else(|| (EXIT_CONFIG, format!("unknown split {split:?}")))?;
    }
    for assignment in &args.toggles {
        let (name, on) = Toggles::parse_assignment(assignment)
            .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
        config.toggles.set(&name, on).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    }
    if let Some(per_class) = args.per_class {
        let seed = args.seed.or(config.sample.map(|s| s.seed)).unwrap_or(0);
        config.sample = Some(insight::config::SampleSpec { per_class, seed });
    } else if let Some(seed) = args.seed {
        if let Some(sample) = &mut config.sample {
            sample.seed = seed;
        }
    }
    if args.skip_failures {
        config.skip_failures = true;
    }
    if let Some(kind) = &args.backend {
        config.backend.kind = match kind.as_str() {
            "live" => BackendKind::Live,
            "replay" => BackendKind::Replay,
            "scripted" => BackendKind::Scripted,
            other => return Err((EXIT_CONFIG, format!("unknown backend kind {other:?}"))),
        };
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    config.validate().map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    Ok(config)
}

fn run_error_exit(e: &RunError) -> u8 {
    match e {
        RunError::Config(_) => EXIT_CONFIG,
        RunError::Dataset(_) => EXIT_DATASET,
        RunError::Item { .. } | RunError::Backend(_) | RunError::Prompts(_) => EXIT_BACKEND,
        RunError::Artifact(_) | RunError::Metrics(_) => EXIT_ARTIFACT,
    }
}

fn cmd_run(args: &ConfigArgs) -> Result<(), (u8, String)> {
    let config = resolve_config(args)?;
    let backend = config
        .backend
        .build()
        .map_err(|e| (EXIT_BACKEND, format!("cannot build backend: {e}")))?;
    let summary = pipeline::run(&config, &backend)
        .map_err(|e| (run_error_exit(&e), e.to_string()))?;

    println!("{}", report::render(&summary.report, None));
    let avg_secs = if summary.items > 0 {
        summary.total_millis as f64 / summary.items as f64 / 1000.0
    } else {
        0.0
    };
    println!(
        "run complete: {} items ({} scored, {} skipped) in {:.1}s ({avg_secs:.2}s/item avg) -> {}",
        summary.items,
        summary.scored,
        summary.skipped.len(),
        summary.total_millis as f64 / 1000.0,
        summary.out_dir.display()
    );
    Ok(())
}

fn cmd_adp(args: &ConfigArgs) -> Result<(), (u8, String)> {
    let config = resolve_config(args)?;
    let backend = config
        .backend
        .build()
        .map_err(|e| (EXIT_BACKEND, format!("cannot build backend: {e}")))?;
    let store = pipeline::materialize_prompts(&config, &backend)
        .map_err(|e| (run_error_exit(&e), e.to_string()))?;
    println!("materialized {} prompt assets (mode {:?})", store.len(), store.mode());
    for (id, outcome) in store.fallbacks() {
        println!("  fallback: {id} ({outcome:?})");
    }
    if let Some(lock) = config.effective_lock_path() {
        println!("lock file: {}", lock.display());
    }
    Ok(())
}

fn cmd_report(run_dir: &Path, compare: Option<&PathBuf>) -> Result<(), (u8, String)> {
    let main = report::load_report(run_dir).map_err(|e| (EXIT_ARTIFACT, e.to_string()))?;
    let baseline = match compare {
        Some(dir) => Some(report::load_report(dir).map_err(|e| (EXIT_ARTIFACT, e.to_string()))?),
        None => None,
    };
    print!("{}", report::render(&main, baseline.as_ref()));
    Ok(())
}

fn cache_store(config_path: &Path) -> Result<EntryStore, (u8, String)> {
    let config = RunConfig::load(config_path)
        .map_err(|e| (EXIT_CONFIG, format!("cannot load config: {e}")))?;
    let dir = config
        .backend
        .cache_dir
        .ok_or((EXIT_CONFIG, "config has no backend.cache_dir".to_string()))?;
    Ok(EntryStore::new(dir))
}

fn cmd_cache(action: &CacheAction) -> Result<(), (u8, String)> {
    match action {
        CacheAction::Stats { config } => {
            let store = cache_store(config)?;
            let count = store.len().map_err(|e| (EXIT_ARTIFACT, e.to_string()))?;
            println!("{count} entries under {}", store.root().display());
        }
        CacheAction::Clear { config } => {
            let store = cache_store(config)?;
            store.clear().map_err(|e| (EXIT_ARTIFACT, e.to_string()))?;
            println!("cleared {}", store.root().display());
        }
        CacheAction::ExportTranscript { config, run, dest } => {
            let store = cache_store(config)?;
            let keys = pipeline::load_touched_keys(run)
                .map_err(|e| (EXIT_ARTIFACT, e.to_string()))?;
            let dest_store = EntryStore::new(dest);
            let mut exported = 0usize;
            for key in &keys {
                match store.read(key).map_err(|e| (EXIT_ARTIFACT, e.to_string()))? {
                    Some(entry) => {
                        dest_store.write(&entry).map_err(|e| (EXIT_ARTIFACT, e.to_string()))?;
                        exported += 1;
                    }
                    None => {
                        return Err((
                            EXIT_ARTIFACT,
                            format!("cache has no entry for touched key {key}"),
                        ))
                    }
                }
            }
            println!("exported {exported} entries to {}", dest_store.root().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Adp(args) => cmd_adp(args),
        Command::Report { run_dir, compare } => cmd_report(run_dir, compare.as_ref()),
        Command::Cache { action } => cmd_cache(action),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
