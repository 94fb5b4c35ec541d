//! The deployable unit: config + parameters + vocabulary + labels.

use crate::tensor::Graph;
use crate::text::{encode_query, IntentLabelSet, LocaleRegistry, Query, UserContext, Vocabulary, PAD_ID};
use crate::{Error, Result};

use super::baseline::{bow_with_trad, chars_from_ids, featurize_triletter, linear_logits};
use super::config::{Architecture, ModelConfig, Multilingual};
use super::encode::{encode_deep_batch, fuse_wide_deep, Batch, GraphParams};
use super::params::{ParamCountReport, Parameters};

/// Current bundle file format.
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Probability vector over the bundle's intent labels. Ties in the argmax
/// resolve to the lowest label id.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntentDistribution {
    pub probabilities: Vec<f64>,
    pub argmax: u32,
}

impl IntentDistribution {
    pub fn from_logits(logits: &[f64]) -> Self {
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
        let denom: f64 = exps.iter().sum();
        let probabilities: Vec<f64> = exps.iter().map(|e| e / denom).collect();
        let mut argmax = 0u32;
        let mut best = f64::NEG_INFINITY;
        for (i, &p) in probabilities.iter().enumerate() {
            if p > best {
                best = p;
                argmax = i as u32;
            }
        }
        IntentDistribution { probabilities, argmax }
    }
}

/// A complete, immutable model: safe to share across threads; prediction
/// never mutates it.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub config: ModelConfig,
    pub params: Parameters,
    pub vocab: Vocabulary,
    pub labels: IntentLabelSet,
    pub locales: Option<LocaleRegistry>,
    pub format_version: u32,
}

impl ModelBundle {
    /// Fresh bundle with seeded initialization. The config's vocabulary
    /// size, label count and locale count must match the companions.
    pub fn new(
        config: ModelConfig,
        vocab: Vocabulary,
        labels: IntentLabelSet,
        locales: Option<LocaleRegistry>,
        seed: u64,
    ) -> Result<Self> {
        if config.is_deep() && config.vocab_size != vocab.size() {
            return Err(Error::InvalidConfig(format!(
                "config vocab_size {} != vocabulary size {}",
                config.vocab_size,
                vocab.size()
            )));
        }
        if config.architecture == Architecture::BowLr && config.vocab_size != vocab.size() {
            return Err(Error::InvalidConfig(format!(
                "config vocab_size {} != vocabulary size {}",
                config.vocab_size,
                vocab.size()
            )));
        }
        if config.label_count != labels.len() {
            return Err(Error::InvalidConfig(format!(
                "config label_count {} != label set size {}",
                config.label_count,
                labels.len()
            )));
        }
        let locale_count = locales.as_ref().map_or(0, LocaleRegistry::len);
        if !matches!(config.multilingual, Multilingual::None) && config.locale_count != locale_count
        {
            return Err(Error::InvalidConfig(format!(
                "config locale_count {} != registry size {locale_count}",
                config.locale_count
            )));
        }
        let params = Parameters::init(&config, seed)?;
        Ok(ModelBundle {
            config,
            params,
            vocab,
            labels,
            locales,
            format_version: BUNDLE_FORMAT_VERSION,
        })
    }

    /// Full prediction pipeline: tokenize, embed (with locale injection per
    /// config), encode, fuse with the user's features, softmax. Pure: the
    /// same inputs always produce bit-identical outputs.
    pub fn predict(&self, q: &Query, user: &UserContext) -> Result<IntentDistribution> {
        let ids = encode_query(q, &self.vocab, self.config.text_max_len())?;
        let valid: Vec<u32> = ids.iter().copied().take_while(|&id| id != PAD_ID).collect();
        self.predict_encoded(&valid, q.locale, &user.features)
    }

    /// Prediction from already-encoded ids (no trailing padding needed).
    pub fn predict_encoded(
        &self,
        ids: &[u32],
        locale: u32,
        trad: &[f64],
    ) -> Result<IntentDistribution> {
        if self.config.trad_width > 0 && trad.len() != self.config.trad_width {
            return Err(Error::DimMismatch {
                op: "predict",
                expected: format!("{} traditional features", self.config.trad_width),
                got: format!("{}", trad.len()),
            });
        }
        if let Some(reg) = &self.locales {
            if locale as usize >= reg.len() {
                return Err(Error::LocaleIdOutOfRange { id: locale, size: reg.len() });
            }
        }
        let ids: Vec<u32> = ids.iter().copied().take_while(|&id| id != PAD_ID).collect();
        let logits = match self.config.architecture {
            Architecture::TriletterLr => {
                let text = chars_from_ids(&ids, &self.vocab);
                let feats = featurize_triletter(&text, self.config.triletter_buckets);
                linear_logits(&feats, self.params.get("linear.w")?, self.params.get("linear.b")?)?
            }
            Architecture::BowLr => {
                let feats = bow_with_trad(&ids, self.vocab.size(), trad);
                linear_logits(&feats, self.params.get("linear.w")?, self.params.get("linear.b")?)?
            }
            _ => {
                let mut g = Graph::new();
                let gp = GraphParams::insert(&mut g, &self.params);
                let batch = Batch { ids: vec![&ids], locales: vec![locale] };
                let emb = encode_deep_batch(&mut g, &self.config, &gp, &batch)?;
                let trad_node = if self.config.trad_width > 0 {
                    Some(g.constant(trad.to_vec(), vec![1, trad.len()]))
                } else {
                    None
                };
                let logits = fuse_wide_deep(&mut g, emb, trad_node, &gp)?;
                g.value(logits).to_vec()
            }
        };
        Ok(IntentDistribution::from_logits(&logits))
    }

    /// Exact element counts per named tensor plus the total.
    pub fn param_count(&self) -> ParamCountReport {
        ParamCountReport::of(&self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{build_vocab, Granularity};

    fn char_vocab() -> Vocabulary {
        build_vocab(["abcdefghijklmnopqrstuvwxyz "], Granularity::Char, 100).unwrap()
    }

    fn bundle(arch: Architecture) -> ModelBundle {
        let vocab = char_vocab();
        let mut config = match arch {
            Architecture::Cnn => ModelConfig::char_cnn(),
            Architecture::Bilstm => ModelConfig::char_bilstm(),
            Architecture::TriletterLr => ModelConfig::char_triletter_lr(),
            _ => unreachable!(),
        };
        config.vocab_size = vocab.size();
        config.embedding_dim = if config.is_deep() { 16 } else { 0 };
        config.cnn.filters = 8;
        config.lstm.hidden = 8;
        config.fusion_hidden = 16;
        config.triletter_buckets = 4096;
        ModelBundle::new(config, vocab, IntentLabelSet::default(), None, 42).unwrap()
    }

    fn user() -> UserContext {
        UserContext::fresh("u", 0, 16, 5, 8).unwrap()
    }

    #[test]
    fn distribution_is_simplex_with_low_tie() {
        let d = IntentDistribution::from_logits(&[1.0, 3.0, 3.0]);
        let sum: f64 = d.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(d.argmax, 1, "tie must resolve to the lowest id");
    }

    #[test]
    fn zero_head_gives_uniform_distribution() {
        let mut b = bundle(Architecture::Cnn);
        // Zero the classifier output layer: logits collapse to zero.
        b.params.insert("fusion.w2".into(), crate::tensor::Tensor::zeros(vec![16, 5]));
        b.params.insert("fusion.b2".into(), crate::tensor::Tensor::zeros(vec![5]));
        let d = b.predict(&Query::incomplete("nursing", 0), &user()).unwrap();
        for p in &d.probabilities {
            assert!((p - 0.2).abs() < 1e-12);
        }
        assert_eq!(d.argmax, 0);
    }

    #[test]
    fn predict_is_pure() {
        for arch in [Architecture::Cnn, Architecture::Bilstm, Architecture::TriletterLr] {
            let b = bundle(arch);
            let q = Query::incomplete("maria gon", 0);
            let d1 = b.predict(&q, &user()).unwrap();
            let d2 = b.predict(&q, &user()).unwrap();
            assert_eq!(d1, d2, "{arch:?} prediction must be bit-identical");
        }
    }

    #[test]
    fn empty_query_is_defined_for_all_architectures() {
        for arch in [Architecture::Cnn, Architecture::Bilstm, Architecture::TriletterLr] {
            let b = bundle(arch);
            let d = b.predict(&Query::incomplete("", 0), &user()).unwrap();
            let sum: f64 = d.probabilities.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "{arch:?}");
        }
    }

    #[test]
    fn wrong_feature_width_is_rejected() {
        let b = bundle(Architecture::Cnn);
        let bad = UserContext { user_id: "u".into(), features: vec![0.0; 3] };
        assert!(b.predict(&Query::incomplete("x", 0), &bad).is_err());
    }

    #[test]
    fn single_char_substitution_changes_one_embedded_row() {
        // Char-level robustness: editing one character perturbs exactly one
        // row of the embedded sequence.
        let b = bundle(Architecture::Cnn);
        let embed = |text: &str| -> Vec<f64> {
            let ids = encode_query(&Query::incomplete(text, 0), &b.vocab, 16).unwrap();
            let valid: Vec<u32> = ids.into_iter().take_while(|&id| id != PAD_ID).collect();
            let mut g = Graph::new();
            let gp = GraphParams::insert(&mut g, &b.params);
            let table = gp.node("embedding.table").unwrap();
            let (seq, _) = super::super::encode::embed_sequence(&mut g, table, &valid).unwrap();
            g.value(seq).to_vec()
        };
        let a = embed("marketing");
        let c = embed("margeting");
        let d = b.config.embedding_dim;
        let mut changed_rows = 0;
        for r in 0..9 {
            if a[r * d..(r + 1) * d] != c[r * d..(r + 1) * d] {
                changed_rows += 1;
            }
        }
        assert_eq!(changed_rows, 1);
    }
}
