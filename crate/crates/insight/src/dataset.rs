//! JSONL dataset ingestion and validation, split handling, and stratified
//! mini-subset sampling for desk-scale runs.

use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{
    CategoryKind, GenerationCategory, GoldAttribution, ImageRef, Modality, NewsItem, VeracityLabel,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("schema error at {path}:{line}: {detail}")]
    Schema { path: PathBuf, line: usize, detail: String },
    #[error("record {id}: image {path} is missing or not a decodable image ({detail})")]
    MissingImage { id: String, path: PathBuf, detail: String },
    #[error("class {label} has {have} items, need {need} for stratified sampling")]
    InsufficientClass { label: VeracityLabel, have: usize, need: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    Test,
}

impl Split {
    pub fn file_name(self) -> &'static str {
        match self {
            Split::Validation => "validation.jsonl",
            Split::Test => "test.jsonl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "validation" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Validation => f.write_str("validation"),
            Split::Test => f.write_str("test"),
        }
    }
}

/// One line of the on-disk JSONL schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub text: String,
    pub image_path: String,
    pub label: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_text_category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_image_category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_tag: Option<String>,
}

fn validate_image(id: &str, path: &Path) -> Result<(), DatasetError> {
    let mut file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) => {
            return Err(DatasetError::MissingImage {
                id: id.to_string(),
                path: path.to_path_buf(),
                detail: e.to_string(),
            })
        }
    };
    // header sniff only; the backend re-encodes the full bytes later
    let mut header = [0u8; 64];
    let n = std::io::Read::read(&mut file, &mut header).unwrap_or(0);
    if image::guess_format(&header[..n]).is_err() {
        return Err(DatasetError::MissingImage {
            id: id.to_string(),
            path: path.to_path_buf(),
            detail: "unrecognized image format".to_string(),
        });
    }
    Ok(())
}

fn record_to_item(
    record: DatasetRecord,
    root: &Path,
    path: &Path,
    line: usize,
) -> Result<NewsItem, DatasetError> {
    let schema_err = |detail: String| DatasetError::Schema {
        path: path.to_path_buf(),
        line,
        detail,
    };

    let label = VeracityLabel::from_code(record.label).map_err(|e| schema_err(e.to_string()))?;
    let image_path = root.join(&record.image_path);
    validate_image(&record.id, &image_path)?;

    let parse_gold = |raw: &Option<String>, modality: Modality| -> Result<Option<GenerationCategory>, DatasetError> {
        match raw {
            None => Ok(None),
            Some(s) => {
                let kind = CategoryKind::from_str_loose(s).map_err(|e| schema_err(e.to_string()))?;
                GenerationCategory::new(modality, kind)
                    .map(Some)
                    .map_err(|e| schema_err(e.to_string()))
            }
        }
    };
    let gold = GoldAttribution {
        text: parse_gold(&record.gold_text_category, Modality::Text)?,
        image: parse_gold(&record.gold_image_category, Modality::Image)?,
    };

    NewsItem::new(record.id, record.text, ImageRef::new(image_path), Some(label))
        .map(|item| item.with_gold_attribution(gold).with_generation_tag(record.generation_tag))
        .map_err(|e| schema_err(e.to_string()))
}

/// Load and validate `<root>/<split>.jsonl`, preserving on-disk order.
pub fn load_dataset(root: &Path, split: Split) -> Result<Vec<NewsItem>, DatasetError> {
    let path = root.join(split.file_name());
    let file = std::fs::File::open(&path)?;
    let reader = BufReader::new(file);

    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord = serde_json::from_str(&line).map_err(|e| {
            DatasetError::Schema { path: path.clone(), line: line_no, detail: e.to_string() }
        })?;
        items.push(record_to_item(record, root, &path, line_no)?);
    }
    Ok(items)
}

/// Deterministically sample `per_class` items from each of the four classes.
/// Unlabeled items are never sampled. The subset keeps the original order.
pub fn sample_stratified(
    items: &[NewsItem],
    per_class: usize,
    seed: u64,
) -> Result<Vec<NewsItem>, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked_indices = Vec::with_capacity(per_class * 4);
    for label in VeracityLabel::ALL {
        let class_indices: Vec<usize> = items
            .iter()
            .enumerate()
            .filter(|(_, item)| item.gold_label() == Some(label))
            .map(|(i, _)| i)
            .collect();
        if class_indices.len() < per_class {
            return Err(DatasetError::InsufficientClass {
                label,
                have: class_indices.len(),
                need: per_class,
            });
        }
        let mut shuffled = class_indices;
        shuffled.shuffle(&mut rng);
        picked_indices.extend(shuffled.into_iter().take(per_class));
    }
    picked_indices.sort_unstable();
    Ok(picked_indices.into_iter().map(|i| items[i].clone()).collect())
}
