//! Zero-shot multimodal misinformation detection with attribution reasoning.
//!
//! The pipeline judges caption/image news pairs in four classes (real,
//! textual distortion, visual distortion, cross-modal distortion) by
//! prompting a multimodal LLM through four stages: debiased prompt
//! preparation, per-generation-category attribution reasoning with dual
//! scoring, caption-blind image description, and a final joint decision.
//! Everything runs against live OpenAI-compatible endpoints or a
//! deterministic record/replay backend, and every evaluation surface
//! (multiclass, binary, per-source, per-generation-tag) comes out of the
//! same verdict list.

pub mod adp;
pub mod backend;
pub mod cap;
pub mod captioning;
pub mod config;
pub mod dataset;
pub mod decision;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod types;

pub use backend::{Backend, BackendConfig, BackendError, ChatRequest, ChatResponse};
pub use cap::{AttributionResult, ReasoningTrace};
pub use config::{RunConfig, Toggles};
pub use decision::Verdict;
pub use metrics::EvalReport;
pub use types::{
    BinaryLabel, CategoryKind, GenerationCategory, GoldAttribution, ImageRef, Modality, NewsItem,
    VeracityLabel,
};
