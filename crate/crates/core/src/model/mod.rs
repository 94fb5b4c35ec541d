//! Model architectures, parameters and prediction.

mod baseline;
mod bundle;
mod config;
mod encode;
mod params;

pub use baseline::{
    bow_with_trad, chars_from_ids, featurize_bow, featurize_triletter, linear_logits,
};
pub use bundle::{IntentDistribution, ModelBundle, BUNDLE_FORMAT_VERSION};
pub use config::{
    Architecture, CnnConfig, LstmConfig, ModelConfig, Multilingual, TransformerConfig,
    DEFAULT_TRILETTER_BUCKETS,
};
pub use encode::{
    embed_sequence, encode_bilstm, encode_cnn, encode_deep_batch, encode_transformer,
    encode_transformer_sequence, fuse_wide_deep, inject_locale_concat, inject_locale_embed,
    run_direction, Batch, BilstmWeights, DirectionWeights, GraphParams,
};
pub use params::{ParamCountReport, Parameters};
