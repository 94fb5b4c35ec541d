//! Shared fixtures for the criterion benchmarks.

use qintent::model::{ModelBundle, ModelConfig};
use qintent::text::{build_vocab, synth_click_log, GeneratorSpec, Granularity, IntentLabelSet};

/// Untrained bundles over a realistic synthetic vocabulary; latency is
/// shape-bound, so initialization is irrelevant.
pub fn word_bundles() -> Vec<(&'static str, ModelBundle, Vec<String>)> {
    let corpus: Vec<String> = synth_click_log(&GeneratorSpec::word_preset(), 2_000, 9)
        .expect("generator")
        .map(|r| r.query)
        .collect();
    let vocab = build_vocab(corpus.iter(), Granularity::Word, 100_000).expect("vocab");
    let labels = IntentLabelSet::default();
    [
        ("cnn-word", ModelConfig::word_cnn()),
        ("bilstm-word", ModelConfig::word_bilstm()),
        ("transformer", ModelConfig::libert()),
    ]
    .into_iter()
    .map(|(name, config)| {
        let bundle = ModelBundle::new(
            config.with_vocab_size(vocab.size()),
            vocab.clone(),
            labels.clone(),
            None,
            7,
        )
        .expect("bundle");
        (name, bundle, corpus[..32].to_vec())
    })
    .collect()
}
