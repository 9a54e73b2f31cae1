//! Attribution-debiased prompting: every human-drafted prompt asset is
//! rewritten once by the model into a debiased version with the same
//! semantics, and the result is kept in a versioned store consumed by the
//! downstream stages. The rewrite happens once per (asset, model), never per
//! news item.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::{Backend, BackendError, ChatRequest, Message};

/// Stable asset ids for the shipped prompt set.
pub mod asset_ids {
    pub const CAP_TEXT_REASON: &str = "cap.text.reason";
    pub const CAP_IMAGE_REASON: &str = "cap.image.reason";
    pub const CAP_SCORE_REASONING: &str = "cap.score.reasoning";
    pub const CAP_SCORE_CATEGORY: &str = "cap.score.category";
    pub const CAPTIONING_DESCRIBE: &str = "captioning.describe";
    pub const DECISION_FINAL: &str = "decision.final";

    pub fn category_definition(category: crate::types::GenerationCategory) -> String {
        format!("cap.def.{}.{}", category.modality().as_str(), category.kind().as_str())
    }
}

#[derive(Debug, Error)]
pub enum AdpError {
    #[error("prompt asset {0:?} has an empty raw text")]
    EmptyRaw(String),
    #[error("duplicate prompt asset id {0:?}")]
    DuplicateId(String),
    #[error("prompt store has no asset {0:?}")]
    MissingAsset(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptAsset {
    pub id: String,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debiased: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

impl PromptAsset {
    pub fn new(id: impl Into<String>, raw: impl Into<String>) -> Self {
        PromptAsset {
            id: id.into(),
            raw: raw.into(),
            debiased: None,
            source_model: None,
            created_at: None,
        }
    }

    /// The debiased text when available, the raw text otherwise.
    pub fn text(&self) -> &str {
        self.debiased.as_deref().unwrap_or(&self.raw)
    }

    pub fn raw_hash(&self) -> String {
        hex::encode(Sha256::digest(self.raw.as_bytes()))
    }
}

/// The shipped prompt assets, compiled in so the tool runs without a
/// prompts directory. A directory of `<id>.txt` files overrides them.
pub fn builtin_assets() -> Vec<PromptAsset> {
    macro_rules! shipped {
        ($id:literal) => {
            PromptAsset::new($id, include_str!(concat!("../prompts/", $id, ".txt")).trim())
        };
    }
    vec![
        shipped!("cap.text.reason"),
        shipped!("cap.image.reason"),
        shipped!("cap.score.reasoning"),
        shipped!("cap.score.category"),
        shipped!("cap.def.text.largemodel"),
        shipped!("cap.def.text.smallmodel"),
        shipped!("cap.def.text.artificiality"),
        shipped!("cap.def.image.largemodel"),
        shipped!("cap.def.image.artificiality"),
        shipped!("captioning.describe"),
        shipped!("decision.final"),
    ]
}

/// Load raw assets from a directory of UTF-8 `.txt` files; the id is the
/// file name without the extension.
pub fn load_assets(dir: &Path) -> Result<Vec<PromptAsset>, AdpError> {
    let mut assets = Vec::new();
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    names.sort();
    for path in names {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let raw = std::fs::read_to_string(&path)?;
        assets.push(PromptAsset::new(id, raw.trim()));
    }
    Ok(assets)
}

const DEBIAS_INSTRUCTIONS: &str = "Your task is to generate a sentence. Follow the instructions below:\n\
1. Eliminate language biases, including rare words and grammatical mistakes, from the raw sentence.\n\
2. Return only a new prompt, keeping the semantics of the raw sentence unchanged.";

const DEBIAS_INPUT_MARKER: &str = "Raw sentence:";

/// The rewrite query: fixed instructions plus the raw sentence in the
/// input slot.
pub fn build_debias_query(model: &str, asset: &PromptAsset) -> Result<ChatRequest, AdpError> {
    if asset.raw.trim().is_empty() {
        return Err(AdpError::EmptyRaw(asset.id.clone()));
    }
    let user = format!("{DEBIAS_INSTRUCTIONS}\n\n{DEBIAS_INPUT_MARKER} {}", asset.raw);
    Ok(ChatRequest::new(model, vec![Message::user(user)], format!("adp#{}", asset.id)))
}

/// Strip markdown fences and symmetric surrounding quotes from a rewrite.
fn clean_rewrite(text: &str) -> String {
    let mut s = text.trim();
    if s.starts_with("```") {
        if let Some(first_newline) = s.find('\n') {
            s = &s[first_newline + 1..];
        } else {
            s = "";
        }
        s = s.trim_end();
        if let Some(stripped) = s.strip_suffix("```") {
            s = stripped;
        }
        s = s.trim();
    }
    for (open, close) in [('"', '"'), ('\'', '\''), ('\u{201c}', '\u{201d}')] {
        if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
            s = s[open.len_utf8()..s.len() - close.len_utf8()].trim();
        }
    }
    s.to_string()
}

/// Rewrites that echo the rewrite instructions back are unusable.
fn echoes_scaffolding(text: &str) -> bool {
    text.contains("Eliminate language biases") || text.contains(DEBIAS_INPUT_MARKER)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdpMode {
    AdpOn,
    AdpOff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteOutcome {
    Rewritten,
    /// Model returned a blank rewrite; the raw text is used, flagged.
    EmptyRewrite,
    /// Model echoed the rewrite instructions; the raw text is used, flagged.
    ScaffoldEcho,
}

/// One model rewrite of one asset.
pub fn debias_prompt(
    asset: &PromptAsset,
    model: &str,
    backend: &dyn Backend,
) -> Result<(PromptAsset, RewriteOutcome), AdpError> {
    let request = build_debias_query(model, asset)?;
    let response = backend.complete(&request)?;
    let cleaned = clean_rewrite(&response.text);

    let (debiased, outcome) = if cleaned.is_empty() {
        (asset.raw.clone(), RewriteOutcome::EmptyRewrite)
    } else if echoes_scaffolding(&cleaned) {
        (asset.raw.clone(), RewriteOutcome::ScaffoldEcho)
    } else {
        (cleaned, RewriteOutcome::Rewritten)
    };

    let created_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .ok();
    let mut out = asset.clone();
    out.debiased = Some(debiased);
    out.source_model = Some(model.to_string());
    out.created_at = created_at;
    Ok((out, outcome))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PromptLock {
    pub entries: Vec<LockEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LockEntry {
    pub id: String,
    pub raw_hash: String,
    pub model: String,
    pub debiased: String,
}

impl PromptLock {
    pub fn load(path: &Path) -> Result<Self, AdpError> {
        match std::fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| {
                AdpError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(PromptLock::default()),
            Err(e) => Err(AdpError::Io(e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), AdpError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let body = serde_json::to_vec_pretty(self)
            .map_err(|e| AdpError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        std::fs::write(path, body)?;
        Ok(())
    }

    fn lookup(&self, id: &str, raw_hash: &str, model: &str) -> Option<&LockEntry> {
        self.entries
            .iter()
            .find(|e| e.id == id && e.raw_hash == raw_hash && e.model == model)
    }
}

/// The materialized, immutable prompt store used by all downstream stages.
#[derive(Debug, Clone)]
pub struct PromptStore {
    assets: BTreeMap<String, PromptAsset>,
    mode: AdpMode,
    fallbacks: Vec<(String, RewriteOutcome)>,
}

impl PromptStore {
    pub fn text(&self, id: &str) -> Result<&str, AdpError> {
        self.assets
            .get(id)
            .map(|a| a.text())
            .ok_or_else(|| AdpError::MissingAsset(id.to_string()))
    }

    pub fn asset(&self, id: &str) -> Result<&PromptAsset, AdpError> {
        self.assets.get(id).ok_or_else(|| AdpError::MissingAsset(id.to_string()))
    }

    pub fn assets(&self) -> impl Iterator<Item = &PromptAsset> {
        self.assets.values()
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn mode(&self) -> AdpMode {
        self.mode
    }

    /// Asset ids whose rewrite fell back to the raw text, with the reason.
    pub fn fallbacks(&self) -> &[(String, RewriteOutcome)] {
        &self.fallbacks
    }
}

/// Debias every asset exactly once per (raw, model) pair. `adp_off` simply
/// mirrors the raw texts (the ablation baseline, zero backend calls). With a
/// lock path, previously rewritten (id, raw-hash, model) tuples are reused
/// without new calls and fresh rewrites are persisted.
pub fn materialize_store(
    assets: &[PromptAsset],
    backend: &dyn Backend,
    model: &str,
    mode: AdpMode,
    lock_path: Option<&Path>,
) -> Result<PromptStore, AdpError> {
    let mut map = BTreeMap::new();
    for asset in assets {
        if asset.raw.trim().is_empty() {
            return Err(AdpError::EmptyRaw(asset.id.clone()));
        }
        if map.contains_key(&asset.id) {
            return Err(AdpError::DuplicateId(asset.id.clone()));
        }
        map.insert(asset.id.clone(), asset.clone());
    }

    let mut fallbacks = Vec::new();
    match mode {
        AdpMode::AdpOff => {
            for asset in map.values_mut() {
                asset.debiased = Some(asset.raw.clone());
                asset.source_model = None;
            }
        }
        AdpMode::AdpOn => {
            let mut lock = match lock_path {
                Some(p) => PromptLock::load(p)?,
                None => PromptLock::default(),
            };
            let mut dirty = false;
            for asset in map.values_mut() {
                let raw_hash = asset.raw_hash();
                if let Some(entry) = lock.lookup(&asset.id, &raw_hash, model) {
                    asset.debiased = Some(entry.debiased.clone());
                    asset.source_model = Some(model.to_string());
                    continue;
                }
                let (rewritten, outcome) = debias_prompt(asset, model, backend)?;
                if outcome != RewriteOutcome::Rewritten {
                    fallbacks.push((asset.id.clone(), outcome));
                }
                *asset = rewritten;
                lock.entries.push(LockEntry {
                    id: asset.id.clone(),
                    raw_hash,
                    model: model.to_string(),
                    debiased: asset.debiased.clone().unwrap_or_default(),
                });
                dirty = true;
            }
            if dirty {
                if let Some(p) = lock_path {
                    lock.save(p)?;
                }
            }
        }
    }

    Ok(PromptStore { assets: map, mode, fallbacks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{CountingBackend, ScriptedBackend};

    fn seven_assets() -> Vec<PromptAsset> {
        (0..7)
            .map(|i| PromptAsset::new(format!("asset.{i}"), format!("Judge the thing number {i}.")))
            .collect()
    }

    #[test]
    fn debias_query_embeds_instructions_and_raw() {
        let asset = PromptAsset::new("x", "Judge the text veracity.");
        let req = build_debias_query("m", &asset).unwrap();
        let text = &req.messages[0].text;
        assert!(text.contains("Eliminate language biases"));
        assert!(text.contains("semantics of the raw sentence unchanged"));
        assert!(text.contains("Judge the text veracity."));
        // deterministic
        let again = build_debias_query("m", &asset).unwrap();
        assert_eq!(req.canonical_bytes(), again.canonical_bytes());
    }

    #[test]
    fn empty_raw_rejected() {
        let asset = PromptAsset::new("x", "   ");
        assert!(build_debias_query("m", &asset).is_err());
    }

    #[test]
    fn fence_and_quote_stripping() {
        assert_eq!(clean_rewrite("```\nX\n```"), "X");
        assert_eq!(clean_rewrite("```text\nAssess the caption.\n```"), "Assess the caption.");
        assert_eq!(clean_rewrite("\"Assess the caption.\""), "Assess the caption.");
        assert_eq!(clean_rewrite("  plain  "), "plain");
        assert_eq!(clean_rewrite("\u{201c}Quoted.\u{201d}"), "Quoted.");
    }

    #[test]
    fn scripted_rewrite_lands_in_debiased() {
        let backend = ScriptedBackend::constant("Assess whether the caption is truthful.");
        let asset = PromptAsset::new("x", "Judge the text veracity.");
        let (out, outcome) = debias_prompt(&asset, "m", &backend).unwrap();
        assert_eq!(out.debiased.as_deref(), Some("Assess whether the caption is truthful."));
        assert_eq!(outcome, RewriteOutcome::Rewritten);
        assert_eq!(out.source_model.as_deref(), Some("m"));
    }

    #[test]
    fn blank_rewrite_falls_back_to_raw() {
        let backend = ScriptedBackend::constant("");
        let asset = PromptAsset::new("x", "Judge the text veracity.");
        let (out, outcome) = debias_prompt(&asset, "m", &backend).unwrap();
        assert_eq!(out.debiased.as_deref(), Some("Judge the text veracity."));
        assert_eq!(outcome, RewriteOutcome::EmptyRewrite);
    }

    #[test]
    fn scaffold_echo_falls_back_to_raw() {
        let backend =
            ScriptedBackend::constant("Eliminate language biases from: Judge the text veracity.");
        let asset = PromptAsset::new("x", "Judge the text veracity.");
        let (out, outcome) = debias_prompt(&asset, "m", &backend).unwrap();
        assert_eq!(out.debiased.as_deref(), Some("Judge the text veracity."));
        assert_eq!(outcome, RewriteOutcome::ScaffoldEcho);
    }

    #[test]
    fn adp_on_calls_once_per_asset() {
        let backend = CountingBackend::new(ScriptedBackend::constant("Rewritten."));
        let store =
            materialize_store(&seven_assets(), &backend, "m", AdpMode::AdpOn, None).unwrap();
        assert_eq!(backend.calls(), 7);
        assert_eq!(store.len(), 7);
        assert!(store.assets().all(|a| a.text() == "Rewritten."));
    }

    #[test]
    fn adp_off_makes_zero_calls_and_mirrors_raw() {
        let backend = CountingBackend::new(ScriptedBackend::constant("Rewritten."));
        let store =
            materialize_store(&seven_assets(), &backend, "m", AdpMode::AdpOff, None).unwrap();
        assert_eq!(backend.calls(), 0);
        assert!(store.assets().all(|a| a.text() == a.raw));
    }

    #[test]
    fn warm_lock_makes_zero_calls() {
        let dir = tempfile::tempdir().unwrap();
        let lock_path = dir.path().join("prompts.lock.json");
        let assets = seven_assets();

        let backend = CountingBackend::new(ScriptedBackend::constant("Rewritten."));
        materialize_store(&assets, &backend, "m", AdpMode::AdpOn, Some(&lock_path)).unwrap();
        assert_eq!(backend.calls(), 7);

        let backend2 = CountingBackend::new(ScriptedBackend::constant("Rewritten."));
        let store =
            materialize_store(&assets, &backend2, "m", AdpMode::AdpOn, Some(&lock_path)).unwrap();
        assert_eq!(backend2.calls(), 0);
        assert!(store.assets().all(|a| a.text() == "Rewritten."));

        // a different model is a different tuple: rewrites run again
        let backend3 = CountingBackend::new(ScriptedBackend::constant("Other."));
        materialize_store(&assets, &backend3, "m2", AdpMode::AdpOn, Some(&lock_path)).unwrap();
        assert_eq!(backend3.calls(), 7);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let assets = vec![PromptAsset::new("a", "one"), PromptAsset::new("a", "two")];
        let backend = ScriptedBackend::constant("x");
        assert!(matches!(
            materialize_store(&assets, &backend, "m", AdpMode::AdpOn, None),
            Err(AdpError::DuplicateId(_))
        ));
    }

    #[test]
    fn builtin_assets_are_complete_and_unique() {
        let assets = builtin_assets();
        assert_eq!(assets.len(), 11);
        let mut ids: Vec<&str> = assets.iter().map(|a| a.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 11);
        for required in [
            asset_ids::CAP_TEXT_REASON,
            asset_ids::CAP_IMAGE_REASON,
            asset_ids::CAP_SCORE_REASONING,
            asset_ids::CAP_SCORE_CATEGORY,
            asset_ids::CAPTIONING_DESCRIBE,
            asset_ids::DECISION_FINAL,
        ] {
            assert!(ids.contains(&required), "missing {required}");
        }
        use crate::types::{GenerationCategory, Modality};
        for modality in [Modality::Text, Modality::Image] {
            for cat in GenerationCategory::categories_for(modality) {
                let id = asset_ids::category_definition(*cat);
                assert!(ids.contains(&id.as_str()), "missing definition {id}");
            }
        }
    }
}
