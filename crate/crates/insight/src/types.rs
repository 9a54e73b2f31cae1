//! Domain types shared by every pipeline stage: news items, the 4-class
//! veracity taxonomy and its binary projection, and the closed set of
//! generation categories per modality.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("caption is empty after trimming (item {0})")]
    EmptyCaption(String),
    #[error("invalid label code {0}, expected 0..=3")]
    InvalidLabelCode(i64),
    #[error("unknown label name {0:?}")]
    InvalidLabelName(String),
    #[error("category {kind:?} is not valid for the {modality} modality")]
    InvalidCategory { modality: Modality, kind: CategoryKind },
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
}

/// The 4-class verdict taxonomy. Codes are wire-stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VeracityLabel {
    Real = 0,
    /// Textual veracity distortion: the caption itself is fabricated.
    Tvd = 1,
    /// Visual veracity distortion: the image is synthetic or manipulated.
    Vvd = 2,
    /// Cross-modal consistency distortion: caption and image do not belong together.
    Ccd = 3,
}

impl VeracityLabel {
    pub const ALL: [VeracityLabel; 4] = [
        VeracityLabel::Real,
        VeracityLabel::Tvd,
        VeracityLabel::Vvd,
        VeracityLabel::Ccd,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: i64) -> Result<Self, DomainError> {
        match code {
            0 => Ok(VeracityLabel::Real),
            1 => Ok(VeracityLabel::Tvd),
            2 => Ok(VeracityLabel::Vvd),
            3 => Ok(VeracityLabel::Ccd),
            other => Err(DomainError::InvalidLabelCode(other)),
        }
    }

    /// Short answer token used in prompts and reports.
    pub fn token(self) -> &'static str {
        match self {
            VeracityLabel::Real => "REAL",
            VeracityLabel::Tvd => "TVD",
            VeracityLabel::Vvd => "VVD",
            VeracityLabel::Ccd => "CCD",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VeracityLabel::Real => "Real",
            VeracityLabel::Tvd => "TVD",
            VeracityLabel::Vvd => "VVD",
            VeracityLabel::Ccd => "CCD",
        }
    }

    /// Real stays real; the three distortion classes project to fake.
    pub fn to_binary(self) -> BinaryLabel {
        match self {
            VeracityLabel::Real => BinaryLabel::Real,
            _ => BinaryLabel::Fake,
        }
    }
}

impl fmt::Display for VeracityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for VeracityLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for VeracityLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = i64::deserialize(deserializer)?;
        VeracityLabel::from_code(code).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Real,
    Fake,
}

impl BinaryLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Real => "real",
            BinaryLabel::Fake => "fake",
        }
    }

    pub fn index(self) -> usize {
        match self {
            BinaryLabel::Real => 0,
            BinaryLabel::Fake => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Image => "image",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hypothesized forgery source. Declaration order is the canonical order
/// used for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryKind {
    Largemodel,
    Smallmodel,
    Artificiality,
}

impl CategoryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CategoryKind::Largemodel => "largemodel",
            CategoryKind::Smallmodel => "smallmodel",
            CategoryKind::Artificiality => "artificiality",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            CategoryKind::Largemodel => "Largemodel",
            CategoryKind::Smallmodel => "Smallmodel",
            CategoryKind::Artificiality => "Artificiality",
        }
    }

    pub fn from_str_loose(s: &str) -> Result<Self, DomainError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "largemodel" => Ok(CategoryKind::Largemodel),
            "smallmodel" => Ok(CategoryKind::Smallmodel),
            "artificiality" => Ok(CategoryKind::Artificiality),
            other => Err(DomainError::UnknownCategory(other.to_string())),
        }
    }
}

/// A (modality, kind) pair. The set is closed: text admits all three kinds,
/// image admits only largemodel and artificiality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GenerationCategory {
    modality: Modality,
    kind: CategoryKind,
}

const TEXT_CATEGORIES: [GenerationCategory; 3] = [
    GenerationCategory { modality: Modality::Text, kind: CategoryKind::Largemodel },
    GenerationCategory { modality: Modality::Text, kind: CategoryKind::Smallmodel },
    GenerationCategory { modality: Modality::Text, kind: CategoryKind::Artificiality },
];

const IMAGE_CATEGORIES: [GenerationCategory; 2] = [
    GenerationCategory { modality: Modality::Image, kind: CategoryKind::Largemodel },
    GenerationCategory { modality: Modality::Image, kind: CategoryKind::Artificiality },
];

impl GenerationCategory {
    pub fn new(modality: Modality, kind: CategoryKind) -> Result<Self, DomainError> {
        if modality == Modality::Image && kind == CategoryKind::Smallmodel {
            return Err(DomainError::InvalidCategory { modality, kind });
        }
        Ok(GenerationCategory { modality, kind })
    }

    /// The canonical, declaration-ordered category list for a modality.
    pub fn categories_for(modality: Modality) -> &'static [GenerationCategory] {
        match modality {
            Modality::Text => &TEXT_CATEGORIES,
            Modality::Image => &IMAGE_CATEGORIES,
        }
    }

    pub fn modality(self) -> Modality {
        self.modality
    }

    pub fn kind(self) -> CategoryKind {
        self.kind
    }

    /// Position within the modality's canonical list; used for tie-breaking.
    pub fn canonical_rank(self) -> usize {
        Self::categories_for(self.modality)
            .iter()
            .position(|c| *c == self)
            .expect("constructible category is always listed")
    }

    /// Stable dotted identifier, e.g. `text.largemodel`.
    pub fn id(self) -> String {
        format!("{}.{}", self.modality.as_str(), self.kind.as_str())
    }

    pub fn parse_id(s: &str) -> Result<Self, DomainError> {
        let (m, k) = s
            .split_once('.')
            .ok_or_else(|| DomainError::UnknownCategory(s.to_string()))?;
        let modality = match m {
            "text" => Modality::Text,
            "image" => Modality::Image,
            _ => return Err(DomainError::UnknownCategory(s.to_string())),
        };
        GenerationCategory::new(modality, CategoryKind::from_str_loose(k)?)
    }
}

impl fmt::Display for GenerationCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl Serialize for GenerationCategory {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for GenerationCategory {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        GenerationCategory::parse_id(&s).map_err(serde::de::Error::custom)
    }
}

/// Reference to the news image on disk with a lazily computed content digest.
#[derive(Debug)]
pub struct ImageRef {
    path: PathBuf,
    digest: OnceLock<String>,
}

impl ImageRef {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        ImageRef { path: path.into(), digest: OnceLock::new() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// SHA-256 of the raw file bytes, computed once and reused.
    pub fn digest(&self) -> std::io::Result<&str> {
        if let Some(d) = self.digest.get() {
            return Ok(d.as_str());
        }
        let bytes = std::fs::read(&self.path)?;
        let hash = hex::encode(Sha256::digest(&bytes));
        Ok(self.digest.get_or_init(|| hash).as_str())
    }

    pub fn read_bytes(&self) -> std::io::Result<Vec<u8>> {
        std::fs::read(&self.path)
    }
}

impl Clone for ImageRef {
    fn clone(&self) -> Self {
        let digest = OnceLock::new();
        if let Some(d) = self.digest.get() {
            let _ = digest.set(d.clone());
        }
        ImageRef { path: self.path.clone(), digest }
    }
}

/// Gold forgery-source annotations, present only on records that carry them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GoldAttribution {
    pub text: Option<GenerationCategory>,
    pub image: Option<GenerationCategory>,
}

impl GoldAttribution {
    pub fn is_empty(&self) -> bool {
        self.text.is_none() && self.image.is_none()
    }

    pub fn for_modality(&self, modality: Modality) -> Option<GenerationCategory> {
        match modality {
            Modality::Text => self.text,
            Modality::Image => self.image,
        }
    }
}

/// One caption/image pair under test. Immutable after construction.
#[derive(Debug, Clone)]
pub struct NewsItem {
    id: String,
    caption: String,
    image: ImageRef,
    gold_label: Option<VeracityLabel>,
    gold_attribution: GoldAttribution,
    generation_tag: Option<String>,
}

impl NewsItem {
    pub fn new(
        id: impl Into<String>,
        caption: impl Into<String>,
        image: ImageRef,
        gold_label: Option<VeracityLabel>,
    ) -> Result<Self, DomainError> {
        let id = id.into();
        let caption = caption.into();
        if caption.trim().is_empty() {
            return Err(DomainError::EmptyCaption(id));
        }
        Ok(NewsItem {
            id,
            caption,
            image,
            gold_label,
            gold_attribution: GoldAttribution::default(),
            generation_tag: None,
        })
    }

    pub fn with_gold_attribution(mut self, gold: GoldAttribution) -> Self {
        self.gold_attribution = gold;
        self
    }

    pub fn with_generation_tag(mut self, tag: Option<String>) -> Self {
        self.generation_tag = tag;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn caption(&self) -> &str {
        &self.caption
    }

    pub fn image(&self) -> &ImageRef {
        &self.image
    }

    pub fn gold_label(&self) -> Option<VeracityLabel> {
        self.gold_label
    }

    pub fn gold_attribution(&self) -> &GoldAttribution {
        &self.gold_attribution
    }

    pub fn generation_tag(&self) -> Option<&str> {
        self.generation_tag.as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_codes_round_trip() {
        for label in VeracityLabel::ALL {
            assert_eq!(VeracityLabel::from_code(label.code() as i64).unwrap(), label);
        }
        assert!(VeracityLabel::from_code(4).is_err());
        assert!(VeracityLabel::from_code(-1).is_err());
    }

    #[test]
    fn binary_projection() {
        assert_eq!(VeracityLabel::Real.to_binary(), BinaryLabel::Real);
        assert_eq!(VeracityLabel::Tvd.to_binary(), BinaryLabel::Fake);
        assert_eq!(VeracityLabel::Vvd.to_binary(), BinaryLabel::Fake);
        assert_eq!(VeracityLabel::Ccd.to_binary(), BinaryLabel::Fake);
        let fakes = VeracityLabel::ALL
            .iter()
            .filter(|l| l.to_binary() == BinaryLabel::Fake)
            .count();
        assert_eq!(fakes, 3);
    }

    #[test]
    fn categories_per_modality() {
        let text = GenerationCategory::categories_for(Modality::Text);
        assert_eq!(text.len(), 3);
        assert_eq!(text[0].kind(), CategoryKind::Largemodel);
        assert_eq!(text[1].kind(), CategoryKind::Smallmodel);
        assert_eq!(text[2].kind(), CategoryKind::Artificiality);

        let image = GenerationCategory::categories_for(Modality::Image);
        assert_eq!(image.len(), 2);
        assert_eq!(image[0].kind(), CategoryKind::Largemodel);
        assert_eq!(image[1].kind(), CategoryKind::Artificiality);

        // pure: repeated calls return the same list
        assert_eq!(GenerationCategory::categories_for(Modality::Text), text);
        assert_eq!(GenerationCategory::categories_for(Modality::Image), image);
    }

    #[test]
    fn image_smallmodel_rejected() {
        let err = GenerationCategory::new(Modality::Image, CategoryKind::Smallmodel);
        assert!(err.is_err());
        assert!(GenerationCategory::new(Modality::Text, CategoryKind::Smallmodel).is_ok());
    }

    #[test]
    fn category_id_round_trip() {
        for modality in [Modality::Text, Modality::Image] {
            for cat in GenerationCategory::categories_for(modality) {
                assert_eq!(GenerationCategory::parse_id(&cat.id()).unwrap(), *cat);
            }
        }
        assert!(GenerationCategory::parse_id("image.smallmodel").is_err());
        assert!(GenerationCategory::parse_id("audio.largemodel").is_err());
    }

    #[test]
    fn canonical_rank_matches_declaration_order() {
        let text = GenerationCategory::categories_for(Modality::Text);
        for (i, cat) in text.iter().enumerate() {
            assert_eq!(cat.canonical_rank(), i);
        }
    }

    #[test]
    fn empty_caption_rejected() {
        let img = ImageRef::new("img.png");
        assert!(NewsItem::new("a", "   \t\n", img.clone(), None).is_err());
        assert!(NewsItem::new("a", "ok", img, None).is_ok());
    }

    #[test]
    fn image_digest_stable_for_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.bin");
        let p2 = dir.path().join("b.bin");
        std::fs::write(&p1, b"same bytes").unwrap();
        std::fs::write(&p2, b"same bytes").unwrap();
        let r1 = ImageRef::new(&p1);
        let r2 = ImageRef::new(&p2);
        let d1 = r1.digest().unwrap().to_string();
        assert_eq!(d1, r2.digest().unwrap());
        // second call hits the cached value
        assert_eq!(r1.digest().unwrap(), d1);
    }
}
