//! Image captioning: a caption-blind textual description of the news image,
//! fed into the final decision to sharpen cross-modal consistency checking.
//! The request carries the image and the describe prompt only; the item's
//! caption must never leak into it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adp::{asset_ids, AdpError, PromptStore};
use crate::backend::{Backend, BackendError, ChatRequest, ImageAttachment, Message};
use crate::types::NewsItem;

/// Sentinel used when the model returns a blank description; the decision
/// stage drops the description section for that item.
pub const EMPTY_CAPTION_SENTINEL: &str = "[no caption]";

#[derive(Debug, Error)]
pub enum CaptioningError {
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

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionText {
    pub text: String,
    pub item_id: String,
}

impl CaptionText {
    pub fn is_empty_sentinel(&self) -> bool {
        self.text == EMPTY_CAPTION_SENTINEL
    }
}

pub fn build_caption_request(
    item: &NewsItem,
    prompts: &PromptStore,
    model: &str,
) -> Result<ChatRequest, CaptioningError> {
    let bytes = item.image().read_bytes().map_err(|source| {
        CaptioningError::UnreadableImage { item_id: item.id().to_string(), source }
    })?;
    let media_type = match image::guess_format(&bytes) {
        Ok(format) => format.to_mime_type().to_string(),
        Err(_) => "application/octet-stream".to_string(),
    };
    let attachment = ImageAttachment::from_bytes(&bytes, media_type);
    Ok(ChatRequest::new(
        model,
        vec![
            Message::system(prompts.text(asset_ids::CAPTIONING_DESCRIBE)?),
            Message::user_with_image("The news image is attached.", attachment),
        ],
        format!("ic#{}", item.id()),
    ))
}

/// One captioning call per item. A blank response yields the sentinel
/// caption rather than an error.
pub fn caption_image(
    item: &NewsItem,
    prompts: &PromptStore,
    backend: &dyn Backend,
    model: &str,
) -> Result<CaptionText, CaptioningError> {
    let request = build_caption_request(item, prompts, model)?;
    let response = backend.complete(&request)?;
    let text = response.text.trim();
    Ok(CaptionText {
        text: if text.is_empty() { EMPTY_CAPTION_SENTINEL.to_string() } else { text.to_string() },
        item_id: item.id().to_string(),
    })
}
