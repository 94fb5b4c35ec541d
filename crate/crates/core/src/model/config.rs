//! Model architecture configuration and the parameter manifest.

use serde::{Deserialize, Serialize};

use crate::text::Granularity;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Hashed letter-trigram logistic regression (incomplete-query baseline).
    TriletterLr,
    /// Word bag-of-words + traditional features logistic regression
    /// (complete-query baseline).
    BowLr,
    Cnn,
    Bilstm,
    Transformer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "dim")]
pub enum Multilingual {
    /// No locale signal.
    None,
    /// Locale embedding appended to every token embedding before the
    /// sequence encoder.
    Embed(usize),
    /// Locale embedding appended to the encoder's output state.
    Concat(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub filters: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ffn_multiplier: usize,
}

/// Everything needed to lay out a model's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub granularity: Granularity,
    /// Rows of the embedding table; set from the actual vocabulary.
    pub vocab_size: usize,
    pub embedding_dim: usize,
    /// Maximum sequence length the model accepts. For the transformer this
    /// bounds `tokens + [CLS]` and sizes the position table.
    pub max_len: usize,
    pub cnn: CnnConfig,
    pub lstm: LstmConfig,
    pub transformer: TransformerConfig,
    pub multilingual: Multilingual,
    /// Rows of the locale table when multilingual is enabled.
    pub locale_count: usize,
    pub fusion_hidden: usize,
    pub trad_width: usize,
    pub label_count: usize,
    /// Hash buckets for the tri-letter baseline.
    pub triletter_buckets: usize,
    /// When set the manifest carries a masked-token output head instead of
    /// the classification head (pre-training shape).
    pub mlm_head: bool,
}

pub const DEFAULT_TRILETTER_BUCKETS: usize = 1 << 18;

impl ModelConfig {
    fn base(architecture: Architecture, granularity: Granularity) -> Self {
        ModelConfig {
            architecture,
            granularity,
            vocab_size: 0,
            embedding_dim: 0,
            max_len: 32,
            cnn: CnnConfig { filters: 128, height: 3 },
            lstm: LstmConfig { hidden: 128 },
            transformer: TransformerConfig { layers: 3, hidden: 256, heads: 8, ffn_multiplier: 4 },
            multilingual: Multilingual::None,
            locale_count: 0,
            fusion_hidden: 128,
            trad_width: 16,
            label_count: 5,
            triletter_buckets: DEFAULT_TRILETTER_BUCKETS,
            mlm_head: false,
        }
    }

    /// Character CNN for incomplete queries: 128-dim char embeddings over a
    /// 500-entry vocabulary, 128 filters of height 3.
    pub fn char_cnn() -> Self {
        ModelConfig {
            vocab_size: 500,
            embedding_dim: 128,
            ..Self::base(Architecture::Cnn, Granularity::Char)
        }
    }

    /// Character BiLSTM for incomplete queries: 128 hidden units.
    pub fn char_bilstm() -> Self {
        ModelConfig {
            vocab_size: 500,
            embedding_dim: 128,
            ..Self::base(Architecture::Bilstm, Granularity::Char)
        }
    }

    /// Tri-letter logistic regression baseline for incomplete queries.
    pub fn char_triletter_lr() -> Self {
        ModelConfig {
            vocab_size: 500,
            embedding_dim: 0,
            trad_width: 0,
            ..Self::base(Architecture::TriletterLr, Granularity::Char)
        }
    }

    /// Word CNN for complete queries: 64-dim embeddings over a 100K-word
    /// vocabulary, 200-wide fusion layer.
    pub fn word_cnn() -> Self {
        ModelConfig {
            vocab_size: 100_000,
            embedding_dim: 64,
            max_len: 16,
            fusion_hidden: 200,
            ..Self::base(Architecture::Cnn, Granularity::Word)
        }
    }

    /// Word BiLSTM for complete queries.
    pub fn word_bilstm() -> Self {
        ModelConfig {
            vocab_size: 100_000,
            embedding_dim: 64,
            max_len: 16,
            fusion_hidden: 200,
            ..Self::base(Architecture::Bilstm, Granularity::Word)
        }
    }

    /// Bag-of-words + traditional-features logistic regression baseline.
    pub fn word_bow_lr() -> Self {
        ModelConfig {
            vocab_size: 100_000,
            embedding_dim: 0,
            max_len: 16,
            ..Self::base(Architecture::BowLr, Granularity::Word)
        }
    }

    /// The compact in-domain transformer: 3 layers, 256 hidden, 8 heads.
    pub fn libert() -> Self {
        ModelConfig {
            vocab_size: 25_000,
            embedding_dim: 256,
            max_len: 512,
            fusion_hidden: 200,
            ..Self::base(Architecture::Transformer, Granularity::Word)
        }
    }

    pub fn with_vocab_size(mut self, n: usize) -> Self {
        self.vocab_size = n;
        self
    }

    pub fn with_labels(mut self, n: usize) -> Self {
        self.label_count = n;
        self
    }

    pub fn with_multilingual(mut self, mode: Multilingual, locale_count: usize) -> Self {
        self.multilingual = mode;
        self.locale_count = locale_count;
        self
    }

    pub fn is_deep(&self) -> bool {
        matches!(
            self.architecture,
            Architecture::Cnn | Architecture::Bilstm | Architecture::Transformer
        )
    }

    /// Locale embedding width, zero when disabled.
    pub fn locale_dim(&self) -> usize {
        match self.multilingual {
            Multilingual::None => 0,
            Multilingual::Embed(e) | Multilingual::Concat(e) => e,
        }
    }

    /// Width of each token vector as seen by the sequence encoder.
    pub fn encoder_input_dim(&self) -> usize {
        match self.multilingual {
            Multilingual::Embed(e) => self.embedding_dim + e,
            _ => self.embedding_dim,
        }
    }

    /// Width of the query embedding entering the fusion head.
    pub fn query_dim(&self) -> usize {
        let enc = match self.architecture {
            Architecture::Cnn => self.cnn.filters,
            Architecture::Bilstm => 2 * self.lstm.hidden,
            Architecture::Transformer => self.transformer.hidden,
            Architecture::TriletterLr | Architecture::BowLr => 0,
        };
        match self.multilingual {
            Multilingual::Concat(e) => enc + e,
            _ => enc,
        }
    }

    /// Longest token sequence the text side may produce.
    pub fn text_max_len(&self) -> usize {
        match self.architecture {
            Architecture::Transformer => self.max_len - 1, // room for [CLS]
            _ => self.max_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.label_count < 2 {
            return Err(Error::InvalidConfig("need at least 2 intent labels".into()));
        }
        if self.is_deep() {
            if self.vocab_size == 0 || self.embedding_dim == 0 {
                return Err(Error::InvalidConfig(
                    "deep models need a vocabulary and embedding dim".into(),
                ));
            }
            if self.max_len < 1 {
                return Err(Error::InvalidConfig("max_len must be >= 1".into()));
            }
        }
        match self.architecture {
            Architecture::Transformer => {
                let t = &self.transformer;
                if t.hidden % t.heads != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "transformer hidden {} not divisible by {} heads",
                        t.hidden, t.heads
                    )));
                }
                if self.embedding_dim != t.hidden {
                    return Err(Error::InvalidConfig(
                        "transformer embedding dim must equal hidden size".into(),
                    ));
                }
                if matches!(self.multilingual, Multilingual::Embed(_)) {
                    return Err(Error::InvalidConfig(
                        "locale embedding into token vectors is defined for CNN/LSTM encoders only".into(),
                    ));
                }
                if self.max_len < 2 {
                    return Err(Error::InvalidConfig("transformer max_len must fit CLS + 1".into()));
                }
            }
            Architecture::TriletterLr => {
                if self.triletter_buckets == 0 {
                    return Err(Error::InvalidConfig("triletter buckets must be positive".into()));
                }
            }
            _ => {}
        }
        if !matches!(self.multilingual, Multilingual::None) && self.locale_count == 0 {
            return Err(Error::InvalidConfig(
                "multilingual models need a locale registry".into(),
            ));
        }
        if self.mlm_head && self.architecture != Architecture::Transformer {
            return Err(Error::InvalidConfig("masked-LM head requires the transformer".into()));
        }
        Ok(())
    }

    /// Full parameter layout: name and shape of every tensor this
    /// architecture owns, in a fixed order. Bundle loading validates
    /// against this and weight init draws in this order.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        let mut m: Vec<(String, Vec<usize>)> = Vec::new();
        let name = |s: &str| s.to_string();
        match self.architecture {
            Architecture::TriletterLr => {
                m.push((name("linear.w"), vec![self.triletter_buckets, self.label_count]));
                m.push((name("linear.b"), vec![self.label_count]));
                return m;
            }
            Architecture::BowLr => {
                m.push((
                    name("linear.w"),
                    vec![self.vocab_size + self.trad_width, self.label_count],
                ));
                m.push((name("linear.b"), vec![self.label_count]));
                return m;
            }
            _ => {}
        }

        m.push((name("embedding.table"), vec![self.vocab_size, self.embedding_dim]));
        if self.locale_dim() > 0 {
            m.push((name("locale.table"), vec![self.locale_count, self.locale_dim()]));
        }
        let din = self.encoder_input_dim();
        match self.architecture {
            Architecture::Cnn => {
                m.push((name("cnn.filters"), vec![self.cnn.filters, self.cnn.height, din]));
                m.push((name("cnn.bias"), vec![self.cnn.filters]));
            }
            Architecture::Bilstm => {
                let k = self.lstm.hidden;
                for dir in ["fwd", "bwd"] {
                    m.push((format!("lstm.{dir}.w_x"), vec![din, 4 * k]));
                    m.push((format!("lstm.{dir}.w_h"), vec![k, 4 * k]));
                    m.push((format!("lstm.{dir}.bias"), vec![4 * k]));
                }
            }
            Architecture::Transformer => {
                let h = self.transformer.hidden;
                let ffn = h * self.transformer.ffn_multiplier;
                m.push((name("transformer.position"), vec![self.max_len, h]));
                m.push((name("transformer.emb_norm.gamma"), vec![h]));
                m.push((name("transformer.emb_norm.beta"), vec![h]));
                for i in 0..self.transformer.layers {
                    let p = format!("transformer.layer{i}");
                    for proj in ["w_q", "w_k", "w_v", "w_o"] {
                        m.push((format!("{p}.attn.{proj}"), vec![h, h]));
                    }
                    for bias in ["b_q", "b_k", "b_v", "b_o"] {
                        m.push((format!("{p}.attn.{bias}"), vec![h]));
                    }
                    m.push((format!("{p}.ffn.w1"), vec![h, ffn]));
                    m.push((format!("{p}.ffn.b1"), vec![ffn]));
                    m.push((format!("{p}.ffn.w2"), vec![ffn, h]));
                    m.push((format!("{p}.ffn.b2"), vec![h]));
                    m.push((format!("{p}.norm1.gamma"), vec![h]));
                    m.push((format!("{p}.norm1.beta"), vec![h]));
                    m.push((format!("{p}.norm2.gamma"), vec![h]));
                    m.push((format!("{p}.norm2.beta"), vec![h]));
                }
                m.push((name("transformer.pooler.w"), vec![h, h]));
                m.push((name("transformer.pooler.b"), vec![h]));
            }
            _ => unreachable!(),
        }
        if self.mlm_head {
            m.push((name("mlm.w"), vec![self.transformer.hidden, self.vocab_size]));
            m.push((name("mlm.b"), vec![self.vocab_size]));
        } else {
            let fan_in = self.query_dim() + self.trad_width;
            m.push((name("fusion.w1"), vec![fan_in, self.fusion_hidden]));
            m.push((name("fusion.b1"), vec![self.fusion_hidden]));
            m.push((name("fusion.w2"), vec![self.fusion_hidden, self.label_count]));
            m.push((name("fusion.b2"), vec![self.label_count]));
        }
        m
    }
}
