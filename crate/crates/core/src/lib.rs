//! Query intent classification engine.
//!
//! Classifies search queries into vertical intents (people, job, company, ...)
//! at two stages of a search session: per-keystroke prefixes for typeahead
//! blending (character-level models) and submitted queries for result-page
//! blending (word-level models). Everything runs on a small reverse-mode
//! autodiff tape: CNN, bidirectional LSTM and transformer encoders, two
//! linear baselines, locale injection for multilingual traffic, and a
//! wide-and-deep fusion head over hand-crafted user features.
//!
//! Modules:
//! - [`tensor`]: dense tensors, the computation graph, gradient checking.
//! - [`text`]: vocabularies, tokenization, click-log ingestion, synthetic data.
//! - [`model`]: encoder architectures, bundles, prediction.
//! - [`train`]: classifier training, masked-LM pre-training, optimizers.
//! - [`eval`]: accuracy/F1 reports, model comparison, the latency harness.
//! - [`serving`]: bundle persistence, typeahead sessions, the line protocol.

pub mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod serving;
pub mod tensor;
pub mod text;
pub mod train;

pub use error::{Error, Result};
pub use model::{IntentDistribution, ModelBundle, ModelConfig};
pub use tensor::{Graph, NodeRef, Tensor};
pub use text::{IntentLabelSet, LocaleRegistry, Query, Vocabulary};
