//! Text pipeline: vocabularies, tokenization, click-log ingestion,
//! synthetic data generation and dataset handling.

mod click;
mod dataset;
mod features;
mod query;
mod synth;
mod vocab;

pub use click::{
    derive_label, ingest_click_log, read_click_log, ClickRecord, IngestReport, IntentLabelSet,
    TypeIntentMap,
};
pub use dataset::{prefix_expand, split_dataset, Dataset, DatasetHeader, LabeledExample};
pub use features::{build_user_features, UserContext, UserFeaturizer};
pub use query::{encode_query, generate_prefixes, normalize_text, LocaleRegistry, Query};
pub use synth::{lit, slot, synth_click_log, ClickLogStream, GeneratorSpec, Part, Slice, SliceKind};
pub use vocab::{
    build_vocab, tokenize, triletters, Granularity, Vocabulary, CLS_ID, MASK_ID, PAD_ID, RESERVED,
    UNK_ID,
};
