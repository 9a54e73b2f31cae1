//! Cross-attribution prompting: each generation category gets its own
//! reasoning path, a reasoning-quality score `s_r` and an independent
//! category-likelihood score `s_p`; the category with the largest product
//! wins. Text and image modalities run the same procedure over their own
//! category sets.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adp::{asset_ids, AdpError, PromptStore};
use crate::backend::{Backend, BackendError, ChatRequest, ImageAttachment, Message};
use crate::types::{GenerationCategory, Modality, NewsItem};

/// Value recorded when a score cannot be parsed even after one retry:
/// maximally non-committal, and always flagged.
pub const FALLBACK_SCORE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum CapError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] AdpError),
    #[error("cannot select an attribution from an empty trace list")]
    EmptyTraceList,
    #[error("trace for {0} has unset or invalid scores")]
    ScoresUnset(String),
    #[error("traces mix modalities: {0} vs {1}")]
    MixedModalities(Modality, Modality),
    #[error("failed to read image: {0}")]
    ImageIo(std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreFlags {
    /// Reasoning-quality score was clamped or fell back after parse failure.
    #[serde(default)]
    pub parse_fallback_r: bool,
    /// Category-likelihood score was clamped or fell back after parse failure.
    #[serde(default)]
    pub parse_fallback_p: bool,
}

/// One per-category attribution reasoning path with its dual scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub category: GenerationCategory,
    pub raw_response: String,
    pub steps: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_p: Option<f64>,
    #[serde(default)]
    pub score_flags: ScoreFlags,
}

impl ReasoningTrace {
    pub fn new(category: GenerationCategory, raw_response: String) -> Self {
        let steps = split_steps(&raw_response);
        ReasoningTrace {
            category,
            raw_response,
            steps,
            s_r: None,
            s_p: None,
            score_flags: ScoreFlags::default(),
        }
    }

    pub fn product(&self) -> Option<f64> {
        Some(self.s_r? * self.s_p?)
    }
}

/// The winning category for one modality, with all candidate traces kept
/// for audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionResult {
    pub modality: Modality,
    pub selected: GenerationCategory,
    pub selected_product: f64,
    pub per_category: Vec<ReasoningTrace>,
}

impl AttributionResult {
    /// Table-7 style synthetic result: the gold category with both scores 1.
    pub fn gold(category: GenerationCategory) -> Self {
        let mut trace = ReasoningTrace::new(category, String::new());
        trace.s_r = Some(1.0);
        trace.s_p = Some(1.0);
        AttributionResult {
            modality: category.modality(),
            selected: category,
            selected_product: 1.0,
            per_category: vec![trace],
        }
    }
}

/// Split a reasoning response on numbered-line boundaries
/// (`1. ...`, `2) ...`, `3: ...`). Unnumbered responses become one step.
pub fn split_steps(text: &str) -> Vec<String> {
    static STEP_RE: OnceLock<Regex> = OnceLock::new();
    let re = STEP_RE.get_or_init(|| Regex::new(r"(?m)^\s*\d+\s*[.):]").expect("valid regex"));

    let starts: Vec<usize> = re.find_iter(text).map(|m| m.start()).collect();
    if starts.is_empty() {
        return vec![text.to_string()];
    }
    let mut steps = Vec::with_capacity(starts.len());
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(text.len());
        let step = text[start..end].trim();
        if !step.is_empty() {
            steps.push(step.to_string());
        }
    }
    if steps.is_empty() {
        vec![text.to_string()]
    } else {
        steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParsedScore {
    pub value: f64,
    pub clamped: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no parseable SCORE marker in response")]
pub struct ScoreParseFailure;

/// Extract the first `SCORE: <number>` (case-insensitive). Integers 0-100
/// are divided by 100; values written with a decimal point are taken as
/// unit-interval reals. Out-of-range values clamp and are flagged.
pub fn parse_score(text: &str) -> Result<ParsedScore, ScoreParseFailure> {
    static SCORE_RE: OnceLock<Regex> = OnceLock::new();
    let re = SCORE_RE.get_or_init(|| {
        Regex::new(r"(?i)score\s*:\s*(-?(?:\d+(?:\.\d+)?|\.\d+))").expect("valid regex")
    });

    let captures = re.captures(text).ok_or(ScoreParseFailure)?;
    let number = &captures[1];
    let parsed: f64 = number.parse().map_err(|_| ScoreParseFailure)?;
    let is_real = number.contains('.');
    let value = if is_real { parsed } else { parsed / 100.0 };
    if (0.0..=1.0).contains(&value) {
        Ok(ParsedScore { value, clamped: false })
    } else {
        Ok(ParsedScore { value: value.clamp(0.0, 1.0), clamped: true })
    }
}

fn image_attachment(item: &NewsItem) -> Result<ImageAttachment, CapError> {
    let bytes = item.image().read_bytes().map_err(CapError::ImageIo)?;
    let media_type = match image::guess_format(&bytes) {
        Ok(format) => format.to_mime_type().to_string(),
        Err(_) => "application/octet-stream".to_string(),
    };
    Ok(ImageAttachment::from_bytes(&bytes, media_type))
}

fn definition_block(
    prompts: &PromptStore,
    category: GenerationCategory,
) -> Result<String, AdpError> {
    let definition = prompts.text(&asset_ids::category_definition(category))?;
    Ok(format!(
        "Generation category under consideration: {}\n{definition}",
        category.kind().display_name()
    ))
}

fn content_message(item: &NewsItem, modality: Modality) -> Result<Message, CapError> {
    Ok(match modality {
        Modality::Text => Message::user(format!("News caption:\n{}", item.caption())),
        Modality::Image => {
            Message::user_with_image("The news image is attached.", image_attachment(item)?)
        }
    })
}

/// Request for the per-category reasoning path: debiased reasoning prompt,
/// category definition, then the caption or the image (never both).
pub fn build_reason_request(
    item: &NewsItem,
    category: GenerationCategory,
    prompts: &PromptStore,
    model: &str,
) -> Result<ChatRequest, CapError> {
    let prompt_id = match category.modality() {
        Modality::Text => asset_ids::CAP_TEXT_REASON,
        Modality::Image => asset_ids::CAP_IMAGE_REASON,
    };
    let system = format!("{}\n\n{}", prompts.text(prompt_id)?, definition_block(prompts, category)?);
    Ok(ChatRequest::new(
        model,
        vec![Message::system(system), content_message(item, category.modality())?],
        format!("cap.{}.reason.{}#{}", category.modality(), category.kind().as_str(), item.id()),
    ))
}

/// Request for the reasoning-quality score `s_r`: sees the reasoning path,
/// never the category-likelihood exchange.
pub fn build_reasoning_score_request(
    trace: &ReasoningTrace,
    item_id: &str,
    prompts: &PromptStore,
    model: &str,
) -> Result<ChatRequest, CapError> {
    let system = prompts.text(asset_ids::CAP_SCORE_REASONING)?.to_string();
    let user = format!("Reasoning under review:\n{}", trace.raw_response);
    Ok(ChatRequest::new(
        model,
        vec![Message::system(system), Message::user(user)],
        format!(
            "cap.{}.score_r.{}#{item_id}",
            trace.category.modality(),
            trace.category.kind().as_str()
        ),
    ))
}

/// Request for the category-likelihood score `s_p`: sees the item content
/// and the category definition, never the reasoning path.
pub fn build_category_score_request(
    item: &NewsItem,
    category: GenerationCategory,
    prompts: &PromptStore,
    model: &str,
) -> Result<ChatRequest, CapError> {
    let system = format!(
        "{}\n\n{}",
        prompts.text(asset_ids::CAP_SCORE_CATEGORY)?,
        definition_block(prompts, category)?
    );
    Ok(ChatRequest::new(
        model,
        vec![Message::system(system), content_message(item, category.modality())?],
        format!("cap.{}.score_p.{}#{}", category.modality(), category.kind().as_str(), item.id()),
    ))
}

/// Issue a score request, retrying once on parse failure, then falling back
/// to [`FALLBACK_SCORE`]. Returns (score, needs_flag).
fn elicit_score(request: &ChatRequest, backend: &dyn Backend) -> Result<(f64, bool), CapError> {
    for attempt in 0..2 {
        let response = backend.complete(request)?;
        match parse_score(&response.text) {
            Ok(parsed) => return Ok((parsed.value, parsed.clamped)),
            Err(_) if attempt == 0 => continue,
            Err(_) => break,
        }
    }
    Ok((FALLBACK_SCORE, true))
}

/// One reasoning call for one category.
pub fn reason_category(
    item: &NewsItem,
    category: GenerationCategory,
    prompts: &PromptStore,
    backend: &dyn Backend,
    model: &str,
) -> Result<ReasoningTrace, CapError> {
    let request = build_reason_request(item, category, prompts, model)?;
    let response = backend.complete(&request)?;
    let mut trace = ReasoningTrace::new(category, response.text);
    if trace.raw_response.trim().is_empty() {
        // nothing to score: both scores fall back immediately
        trace.steps = vec![String::new()];
        trace.s_r = Some(FALLBACK_SCORE);
        trace.s_p = Some(FALLBACK_SCORE);
        trace.score_flags = ScoreFlags { parse_fallback_r: true, parse_fallback_p: true };
    }
    Ok(trace)
}

pub fn elicit_reasoning_score(
    trace: &mut ReasoningTrace,
    item_id: &str,
    prompts: &PromptStore,
    backend: &dyn Backend,
    model: &str,
) -> Result<f64, CapError> {
    let request = build_reasoning_score_request(trace, item_id, prompts, model)?;
    let (score, flagged) = elicit_score(&request, backend)?;
    trace.s_r = Some(score);
    trace.score_flags.parse_fallback_r |= flagged;
    Ok(score)
}

pub fn elicit_category_score(
    trace: &mut ReasoningTrace,
    item: &NewsItem,
    prompts: &PromptStore,
    backend: &dyn Backend,
    model: &str,
) -> Result<f64, CapError> {
    let request = build_category_score_request(item, trace.category, prompts, model)?;
    let (score, flagged) = elicit_score(&request, backend)?;
    trace.s_p = Some(score);
    trace.score_flags.parse_fallback_p |= flagged;
    Ok(score)
}

/// Pure product-argmax over the traces. Exact ties break by canonical
/// category order, never by input order.
pub fn select_attribution(traces: &[ReasoningTrace]) -> Result<AttributionResult, CapError> {
    let first = traces.first().ok_or(CapError::EmptyTraceList)?;
    let modality = first.category.modality();

    let mut best: Option<(f64, usize)> = None;
    for trace in traces {
        if trace.category.modality() != modality {
            return Err(CapError::MixedModalities(modality, trace.category.modality()));
        }
        let (s_r, s_p) = match (trace.s_r, trace.s_p) {
            (Some(r), Some(p)) => (r, p),
            _ => return Err(CapError::ScoresUnset(trace.category.id())),
        };
        if !(0.0..=1.0).contains(&s_r) || !(0.0..=1.0).contains(&s_p) {
            return Err(CapError::ScoresUnset(trace.category.id()));
        }
        let product = s_r * s_p;
        let rank = trace.category.canonical_rank();
        let better = match best {
            None => true,
            Some((best_product, best_rank)) => {
                product > best_product || (product == best_product && rank < best_rank)
            }
        };
        if better {
            best = Some((product, rank));
        }
    }

    let (product, rank) = best.expect("non-empty trace list");
    let selected = GenerationCategory::categories_for(modality)[rank];
    Ok(AttributionResult {
        modality,
        selected,
        selected_product: product,
        per_category: traces.to_vec(),
    })
}

/// Which scores are elicited; a disabled side is fixed at 1 so the product
/// reduces to the other score alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringMode {
    pub reasoning_score: bool,
    pub category_score: bool,
}

impl Default for ScoringMode {
    fn default() -> Self {
        ScoringMode { reasoning_score: true, category_score: true }
    }
}

/// Full CAP procedure for one modality: reason about every category, elicit
/// both scores, select the product-argmax winner.
pub fn attribute_modality(
    item: &NewsItem,
    modality: Modality,
    prompts: &PromptStore,
    backend: &dyn Backend,
    model: &str,
    scoring: ScoringMode,
) -> Result<AttributionResult, CapError> {
    let mut traces = Vec::new();
    for category in GenerationCategory::categories_for(modality) {
        let mut trace = reason_category(item, *category, prompts, backend, model)?;
        let already_scored = trace.s_r.is_some() && trace.s_p.is_some();
        if !already_scored {
            if scoring.reasoning_score {
                elicit_reasoning_score(&mut trace, item.id(), prompts, backend, model)?;
            } else {
                trace.s_r = Some(1.0);
            }
            if scoring.category_score {
                elicit_category_score(&mut trace, item, prompts, backend, model)?;
            } else {
                trace.s_p = Some(1.0);
            }
        }
        traces.push(trace);
    }
    select_attribution(&traces)
}
