//! Final decision: assemble the joint query from the caption, the image,
//! the image description and the attribution clues, then parse the model's
//! answer into one of the four classes. Every item ends with exactly one
//! label; an unparseable answer falls back deterministically.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adp::{asset_ids, AdpError, PromptStore};
use crate::backend::{Backend, BackendError, ChatRequest, ImageAttachment, Message};
use crate::cap::AttributionResult;
use crate::captioning::CaptionText;
use crate::types::{GenerationCategory, GoldAttribution, Modality, NewsItem, VeracityLabel};

pub mod flags {
    pub const FINAL_PARSE_FALLBACK: &str = "final.parse_fallback";
    pub const IC_EMPTY: &str = "ic.empty";
    pub const ATTRIBUTION_GOLD: &str = "attribution.gold";
}

#[derive(Debug, Error)]
pub enum DecisionError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] AdpError),
    #[error("cannot read image for item {item_id}: {source}")]
    UnreadableImage {
        item_id: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no label token found in response")]
pub struct LabelParseFailure;

/// Case-insensitive scan for the four answer tokens and their long forms;
/// the first match in reading order wins.
pub fn parse_label(text: &str) -> Result<VeracityLabel, LabelParseFailure> {
    static LABEL_RE: OnceLock<Regex> = OnceLock::new();
    let re = LABEL_RE.get_or_init(|| {
        Regex::new(
            r"(?i)\b(real|tvd|vvd|ccd|textual veracity distortion|visual veracity distortion|cross[-\s]modal consistency distortion)\b",
        )
        .expect("valid regex")
    });
    let m = re.find(text).ok_or(LabelParseFailure)?;
    let token = m.as_str().to_ascii_lowercase();
    Ok(match token.as_str() {
        "real" => VeracityLabel::Real,
        "tvd" => VeracityLabel::Tvd,
        "vvd" => VeracityLabel::Vvd,
        "ccd" => VeracityLabel::Ccd,
        t if t.starts_with("textual") => VeracityLabel::Tvd,
        t if t.starts_with("visual") => VeracityLabel::Vvd,
        _ => VeracityLabel::Ccd,
    })
}

/// Answer-format contract appended after everything else; kept out of the
/// debiased prompt store so the tokens cannot be rewritten.
const ANSWER_FORMAT: &str = "Answer with exactly one of the four tokens: REAL, TVD, VVD, CCD.\n\
TVD = textual veracity distortion: the caption itself is fabricated or false.\n\
VVD = visual veracity distortion: the image is synthetic or manipulated.\n\
CCD = cross-modal consistency distortion: caption and image are each genuine but do not belong together.\n\
REAL = the caption and the image are authentic and consistent with each other.";

/// One verdict for one item, with everything needed to audit it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub item_id: String,
    pub label: VeracityLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_attribution: Option<AttributionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_attribution: Option<AttributionResult>,
    pub final_response: String,
    pub flags: BTreeSet<String>,
}

fn clue_block(
    text_attr: Option<&AttributionResult>,
    image_attr: Option<&AttributionResult>,
) -> Option<String> {
    if text_attr.is_none() && image_attr.is_none() {
        return None;
    }
    let mut lines = vec!["Attribution clues from a prior analysis:".to_string()];
    if let Some(attr) = text_attr {
        lines.push(format!(
            "- Caption: most consistent with the {} generation category (score {:.2}).",
            attr.selected.kind().display_name(),
            attr.selected_product
        ));
    }
    if let Some(attr) = image_attr {
        lines.push(format!(
            "- Image: most consistent with the {} generation category (score {:.2}).",
            attr.selected.kind().display_name(),
            attr.selected_product
        ));
    }
    Some(lines.join("\n"))
}

/// Assemble the final request: debiased decision prompt, caption, image
/// attachment, description (when present), clue block (when CAP ran), and
/// the answer-format contract, in that order.
pub fn build_final_query(
    item: &NewsItem,
    caption: Option<&CaptionText>,
    text_attr: Option<&AttributionResult>,
    image_attr: Option<&AttributionResult>,
    prompts: &PromptStore,
    model: &str,
) -> Result<ChatRequest, DecisionError> {
    let bytes = item.image().read_bytes().map_err(|source| {
        DecisionError::UnreadableImage { item_id: item.id().to_string(), source }
    })?;
    let media_type = match image::guess_format(&bytes) {
        Ok(format) => format.to_mime_type().to_string(),
        Err(_) => "application/octet-stream".to_string(),
    };
    let attachment = ImageAttachment::from_bytes(&bytes, media_type);

    let mut sections = vec![
        format!("News caption:\n{}", item.caption()),
        "The news image is attached.".to_string(),
    ];
    if let Some(caption) = caption.filter(|c| !c.is_empty_sentinel()) {
        sections.push(format!("Image description:\n{}", caption.text));
    }
    if let Some(clues) = clue_block(text_attr, image_attr) {
        sections.push(clues);
    }
    sections.push(ANSWER_FORMAT.to_string());

    Ok(ChatRequest::new(
        model,
        vec![
            Message::system(prompts.text(asset_ids::DECISION_FINAL)?),
            Message::user_with_image(sections.join("\n\n"), attachment),
        ],
        format!("decision.final#{}", item.id()),
    ))
}

/// Deterministic label when parsing fails even after one retry: the
/// stronger modality attribution decides; without CAP the item is called
/// real.
fn fallback_label(
    text_attr: Option<&AttributionResult>,
    image_attr: Option<&AttributionResult>,
) -> VeracityLabel {
    match (text_attr, image_attr) {
        (Some(t), Some(i)) => {
            if t.selected_product >= i.selected_product {
                VeracityLabel::Tvd
            } else {
                VeracityLabel::Vvd
            }
        }
        (Some(_), None) => VeracityLabel::Tvd,
        (None, Some(_)) => VeracityLabel::Vvd,
        (None, None) => VeracityLabel::Real,
    }
}

/// Issue the final request, retrying once on parse failure, then applying
/// the deterministic fallback. Totality: always returns a labelled verdict.
pub fn final_verdict(
    item: &NewsItem,
    request: &ChatRequest,
    text_attr: Option<AttributionResult>,
    image_attr: Option<AttributionResult>,
    backend: &dyn Backend,
) -> Result<Verdict, DecisionError> {
    let mut flags = BTreeSet::new();
    let mut last_response = String::new();
    let mut label = None;
    for _ in 0..2 {
        let response = backend.complete(request)?;
        last_response = response.text;
        if let Ok(parsed) = parse_label(&last_response) {
            label = Some(parsed);
            break;
        }
    }
    let label = label.unwrap_or_else(|| {
        flags.insert(flags::FINAL_PARSE_FALLBACK.to_string());
        fallback_label(text_attr.as_ref(), image_attr.as_ref())
    });
    Ok(Verdict {
        item_id: item.id().to_string(),
        label,
        text_attribution: text_attr,
        image_attribution: image_attr,
        final_response: last_response,
        flags,
    })
}

/// Table-7 style gold injection: synthesize attributions with both scores 1
/// for the annotated categories, skipping CAP entirely for those modalities.
pub fn inject_gold_attribution(
    gold: &GoldAttribution,
) -> (Option<AttributionResult>, Option<AttributionResult>) {
    let make = |cat: Option<GenerationCategory>, modality: Modality| {
        cat.filter(|c| c.modality() == modality).map(AttributionResult::gold)
    };
    (make(gold.text, Modality::Text), make(gold.image, Modality::Image))
}
