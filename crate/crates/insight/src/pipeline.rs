//! Run orchestration: materialize the prompt store, process every item
//! through the enabled stages with a bounded worker pool, and write the run
//! artifact (verdicts, traces, report, config snapshot, flags, timing).
//!
//! Artifact layout under the output directory:
//!
//! ```text
//! verdicts.jsonl          one summary line per item, deterministic
//! traces/<item_id>.json   full reasoning traces and final response
//! calls.jsonl             (tag, key) of every backend call, per item
//! report.json             every metric surface
//! config.snapshot.json    the resolved configuration
//! flags.json              run-level flag summary
//! timing.json             wall-clock timing (excluded from determinism)
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adp::{self, AdpError, AdpMode, PromptStore};
use crate::backend::{Backend, BackendError, ChatRequest, ChatResponse};
use crate::cap::{self, CapError, ScoringMode};
use crate::captioning::{self, CaptioningError};
use crate::config::{ConfigError, RunConfig};
use crate::dataset::{self, DatasetError};
use crate::decision::{self, flags, DecisionError, Verdict};
use crate::metrics::{EvalReport, ReportCounts};
use crate::types::{BinaryLabel, Modality, NewsItem, VeracityLabel};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("backend failure on item {item_id}: {source}")]
    Item {
        item_id: String,
        #[source]
        source: BackendError,
    },
    #[error("prompt materialization failed: {0}")]
    Prompts(#[from] AdpError),
    #[error("cannot write run artifact: {0}")]
    Artifact(#[from] std::io::Error),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn item_error(item_id: &str, source: BackendError) -> RunError {
    RunError::Item { item_id: item_id.to_string(), source }
}

fn backend_of_cap(item_id: &str, e: CapError) -> RunError {
    match e {
        CapError::Backend(b) => item_error(item_id, b),
        CapError::Prompt(p) => RunError::Prompts(p),
        CapError::ImageIo(io) => item_error(item_id, BackendError::Io(io)),
        other => item_error(item_id, BackendError::InvalidRequest(other.to_string())),
    }
}

fn backend_of_caption(item_id: &str, e: CaptioningError) -> RunError {
    match e {
        CaptioningError::Backend(b) => item_error(item_id, b),
        CaptioningError::Prompt(p) => RunError::Prompts(p),
        CaptioningError::UnreadableImage { source, .. } => {
            item_error(item_id, BackendError::Io(source))
        }
    }
}

fn backend_of_decision(item_id: &str, e: DecisionError) -> RunError {
    match e {
        DecisionError::Backend(b) => item_error(item_id, b),
        DecisionError::Prompt(p) => RunError::Prompts(p),
        DecisionError::UnreadableImage { source, .. } => {
            item_error(item_id, BackendError::Io(source))
        }
    }
}

/// Per-item view of the shared backend: counts calls and records
/// (tag, key) pairs for the call log.
struct ItemScope<'a> {
    inner: &'a dyn Backend,
    calls: Mutex<Vec<(String, String)>>,
}

impl<'a> ItemScope<'a> {
    fn new(inner: &'a dyn Backend) -> Self {
        ItemScope { inner, calls: Mutex::new(Vec::new()) }
    }

    fn into_calls(self) -> Vec<(String, String)> {
        self.calls.into_inner().expect("scope poisoned")
    }
}

impl Backend for ItemScope<'_> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls
            .lock()
            .expect("scope poisoned")
            .push((request.tag.clone(), request.cache_key()));
        self.inner.complete(request)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// One line of `verdicts.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictLine {
    pub item_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<VeracityLabel>,
    pub label: VeracityLabel,
    pub binary: BinaryLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_product: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_product: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_tag: Option<String>,
    pub flags: Vec<String>,
    pub backend_calls: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CallLine {
    item_id: String,
    tag: String,
    key: String,
}

struct ItemOutput {
    verdict: Verdict,
    calls: Vec<(String, String)>,
    millis: u128,
}

fn process_item(
    item: &NewsItem,
    prompts: &PromptStore,
    backend: &dyn Backend,
    config: &RunConfig,
) -> Result<ItemOutput, RunError> {
    let started = Instant::now();
    let scope = ItemScope::new(backend);
    let toggles = &config.toggles;
    let model = &config.model;
    let mut extra_flags: Vec<String> = Vec::new();

    // attribution: gold injection where annotated, CAP otherwise
    let (mut text_attr, mut image_attr) = (None, None);
    if toggles.gold_attribution && !item.gold_attribution().is_empty() {
        let (t, i) = decision::inject_gold_attribution(item.gold_attribution());
        text_attr = t;
        image_attr = i;
        extra_flags.push(flags::ATTRIBUTION_GOLD.to_string());
    }
    if toggles.cap {
        let scoring = ScoringMode { reasoning_score: toggles.ars, category_score: toggles.pps };
        if text_attr.is_none() {
            text_attr = Some(
                cap::attribute_modality(item, Modality::Text, prompts, &scope, model, scoring)
                    .map_err(|e| backend_of_cap(item.id(), e))?,
            );
        }
        if image_attr.is_none() {
            image_attr = Some(
                cap::attribute_modality(item, Modality::Image, prompts, &scope, model, scoring)
                    .map_err(|e| backend_of_cap(item.id(), e))?,
            );
        }
    }

    // caption-blind image description
    let caption = if toggles.ic {
        let caption = captioning::caption_image(item, prompts, &scope, model)
            .map_err(|e| backend_of_caption(item.id(), e))?;
        if caption.is_empty_sentinel() {
            extra_flags.push(flags::IC_EMPTY.to_string());
        }
        Some(caption)
    } else {
        None
    };

    let request = decision::build_final_query(
        item,
        caption.as_ref(),
        text_attr.as_ref(),
        image_attr.as_ref(),
        prompts,
        model,
    )
    .map_err(|e| backend_of_decision(item.id(), e))?;
    let mut verdict = decision::final_verdict(item, &request, text_attr, image_attr, &scope)
        .map_err(|e| backend_of_decision(item.id(), e))?;

    for flag in extra_flags {
        verdict.flags.insert(flag);
    }
    for attr in [&verdict.text_attribution, &verdict.image_attribution].into_iter().flatten() {
        for trace in &attr.per_category {
            let prefix =
                format!("cap.{}.{}", attr.modality.as_str(), trace.category.kind().as_str());
            if trace.score_flags.parse_fallback_r {
                verdict.flags.insert(format!("{prefix}.parse_fallback_r"));
            }
            if trace.score_flags.parse_fallback_p {
                verdict.flags.insert(format!("{prefix}.parse_fallback_p"));
            }
        }
    }

    Ok(ItemOutput { verdict, calls: scope.into_calls(), millis: started.elapsed().as_millis() })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub items: usize,
    pub scored: usize,
    pub skipped: Vec<String>,
    pub report: EvalReport,
    pub per_item_calls: Vec<(String, u64)>,
    pub total_millis: u128,
}

/// Materialize the prompt store for this configuration. Separated out so
/// the `adp` subcommand can run it without touching the dataset.
pub fn materialize_prompts(
    config: &RunConfig,
    backend: &dyn Backend,
) -> Result<PromptStore, RunError> {
    let assets = match &config.prompts_dir {
        Some(dir) => adp::load_assets(dir)?,
        None => adp::builtin_assets(),
    };
    let mode = if config.toggles.adp { AdpMode::AdpOn } else { AdpMode::AdpOff };
    let lock = config.effective_lock_path();
    Ok(adp::materialize_store(&assets, backend, config.adp_model(), mode, lock.as_deref())?)
}

fn load_items(config: &RunConfig) -> Result<Vec<NewsItem>, RunError> {
    let mut items = dataset::load_dataset(&config.dataset_root, config.split)?;
    if let Some(sample) = &config.sample {
        items = dataset::sample_stratified(&items, sample.per_class, sample.seed)?;
    }
    if config.toggles.gold_attribution
        && !items.iter().any(|i| !i.gold_attribution().is_empty())
    {
        return Err(RunError::Config(ConfigError::Invalid(
            "gold_attribution is on but no record carries gold categories".into(),
        )));
    }
    Ok(items)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), RunError> {
    let mut body = serde_json::to_vec_pretty(value)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    body.push(b'\n');
    std::fs::write(path, body)?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, lines: &[T]) -> Result<(), RunError> {
    let mut out = Vec::new();
    for line in lines {
        let body = serde_json::to_vec(line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        out.extend_from_slice(&body);
        out.push(b'\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Execute a full run and write the artifact directory.
pub fn run(config: &RunConfig, backend: &dyn Backend) -> Result<RunSummary, RunError> {
    config.validate()?;
    let run_started = Instant::now();

    let adp_scope = ItemScope::new(backend);
    let prompts = materialize_prompts(config, &adp_scope)?;
    let adp_calls = adp_scope.into_calls();
    let items = load_items(config)?;

    // bounded worker pool over a shared index counter; results keep item order
    let worker_count = config.concurrency.min(items.len().max(1));
    let next_index = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<ItemOutput, RunError>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let index = next_index.fetch_add(1, Ordering::SeqCst);
                if index >= items.len() {
                    break;
                }
                let outcome = process_item(&items[index], &prompts, backend, config);
                *results[index].lock().expect("result slot poisoned") = Some(outcome);
            });
        }
    });

    let mut verdict_lines = Vec::with_capacity(items.len());
    let mut verdicts = Vec::with_capacity(items.len());
    let mut call_lines: Vec<CallLine> = adp_calls
        .into_iter()
        .map(|(tag, key)| CallLine { item_id: String::new(), tag, key })
        .collect();
    let mut skipped = Vec::new();
    let mut per_item_millis = Vec::new();
    let mut per_item_calls = Vec::new();

    for (item, slot) in items.iter().zip(results) {
        let outcome = slot.into_inner().expect("result slot poisoned").expect("worker ran");
        match outcome {
            Ok(output) => {
                let verdict = &output.verdict;
                let calls = output.calls.len() as u64;
                verdict_lines.push(VerdictLine {
                    item_id: verdict.item_id.clone(),
                    gold: item.gold_label(),
                    label: verdict.label,
                    binary: verdict.label.to_binary(),
                    text_category: verdict.text_attribution.as_ref().map(|a| a.selected.id()),
                    text_product: verdict.text_attribution.as_ref().map(|a| a.selected_product),
                    image_category: verdict.image_attribution.as_ref().map(|a| a.selected.id()),
                    image_product: verdict.image_attribution.as_ref().map(|a| a.selected_product),
                    generation_tag: item.generation_tag().map(str::to_string),
                    flags: verdict.flags.iter().cloned().collect(),
                    backend_calls: calls,
                });
                for (tag, key) in &output.calls {
                    call_lines.push(CallLine {
                        item_id: verdict.item_id.clone(),
                        tag: tag.clone(),
                        key: key.clone(),
                    });
                }
                per_item_millis.push((verdict.item_id.clone(), output.millis));
                per_item_calls.push((verdict.item_id.clone(), calls));
                verdicts.push(output.verdict);
            }
            Err(e) if config.skip_failures => {
                log::warn!("skipping item {}: {e}", item.id());
                skipped.push(item.id().to_string());
            }
            Err(e) => return Err(e),
        }
    }

    // metric assembly over scored items (those with gold labels)
    let mut pairs = Vec::new();
    let mut tagged = Vec::new();
    let mut flag_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut per_gold_class: BTreeMap<String, u64> = BTreeMap::new();
    for line in &verdict_lines {
        if let Some(gold) = line.gold {
            pairs.push((line.label, gold));
            *per_gold_class.entry(gold.name().to_string()).or_default() += 1;
        }
        if let Some(tag) = &line.generation_tag {
            tagged.push((tag.clone(), line.binary));
        }
        for flag in &line.flags {
            *flag_counts.entry(flag.clone()).or_default() += 1;
        }
    }
    for (id, outcome) in prompts.fallbacks() {
        *flag_counts.entry(format!("adp.fallback.{id}.{outcome:?}")).or_default() += 1;
    }
    let counts = ReportCounts {
        items: items.len() as u64,
        scored: pairs.len() as u64,
        skipped: skipped.len() as u64,
        per_gold_class,
    };
    let report = EvalReport::assemble(&pairs, &tagged, counts, flag_counts.clone())?;

    // artifact directory
    let out = &config.out_dir;
    std::fs::create_dir_all(out.join("traces"))?;
    write_jsonl(&out.join("verdicts.jsonl"), &verdict_lines)?;
    write_jsonl(&out.join("calls.jsonl"), &call_lines)?;
    for verdict in &verdicts {
        write_json(&out.join("traces").join(format!("{}.json", verdict.item_id)), verdict)?;
    }
    write_json(&out.join("report.json"), &report)?;
    write_json(&out.join("config.snapshot.json"), config)?;
    write_json(
        &out.join("flags.json"),
        &serde_json::json!({ "flags": flag_counts, "skipped": skipped }),
    )?;

    let total_millis = run_started.elapsed().as_millis();
    let average = if per_item_millis.is_empty() {
        0.0
    } else {
        per_item_millis.iter().map(|(_, m)| *m as f64).sum::<f64>() / per_item_millis.len() as f64
    };
    write_json(
        &out.join("timing.json"),
        &serde_json::json!({
            "total_ms": total_millis,
            "average_item_ms": average,
            "per_item_ms": per_item_millis.iter().map(|(id, m)| serde_json::json!({"item_id": id, "ms": m})).collect::<Vec<_>>(),
        }),
    )?;

    Ok(RunSummary {
        out_dir: out.clone(),
        items: items.len(),
        scored: pairs.len(),
        skipped,
        report,
        per_item_calls,
        total_millis,
    })
}

/// Re-read the verdict lines of a finished run.
pub fn load_verdict_lines(run_dir: &Path) -> Result<Vec<VerdictLine>, RunError> {
    let text = std::fs::read_to_string(run_dir.join("verdicts.jsonl"))?;
    let mut lines = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        lines.push(
            serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?,
        );
    }
    Ok(lines)
}

/// Keys touched by a run, in call order, from `calls.jsonl`.
pub fn load_touched_keys(run_dir: &Path) -> Result<Vec<String>, RunError> {
    let text = std::fs::read_to_string(run_dir.join("calls.jsonl"))?;
    let mut keys = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let call: CallLine = serde_json::from_str(line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        keys.push(call.key);
    }
    Ok(keys)
}
