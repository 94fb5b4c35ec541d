//! Token vocabularies with reserved special ids.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const MASK_ID: u32 = 3;
pub const RESERVED: usize = 4;

const RESERVED_NAMES: [&str; RESERVED] = ["<pad>", "<unk>", "<cls>", "<mask>"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Char,
    Word,
    Triletter,
}

/// Bidirectional token/id mapping. Ids 0..4 are reserved for padding,
/// unknown, the sequence-classification token and the mask token; content
/// tokens start at 4. Lookup never fails: unknown strings map to `<unk>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabWire", into = "VocabWire")]
pub struct Vocabulary {
    granularity: Granularity,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize, Clone)]
struct VocabWire {
    granularity: Granularity,
    tokens: Vec<String>,
}

impl From<Vocabulary> for VocabWire {
    fn from(v: Vocabulary) -> Self {
        VocabWire {
            granularity: v.granularity,
            tokens: v.tokens,
        }
    }
}

impl TryFrom<VocabWire> for Vocabulary {
    type Error = Error;

    fn try_from(w: VocabWire) -> Result<Self> {
        let mut index = HashMap::with_capacity(w.tokens.len());
        for (i, t) in w.tokens.iter().enumerate() {
            if index.insert(t.clone(), (i + RESERVED) as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary {
            granularity: w.granularity,
            tokens: w.tokens,
            index,
        })
    }
}

impl Vocabulary {
    pub fn from_tokens(granularity: Granularity, tokens: Vec<String>) -> Result<Self> {
        Vocabulary::try_from(VocabWire { granularity, tokens })
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    /// Total size including the 4 reserved ids.
    pub fn size(&self) -> usize {
        self.tokens.len() + RESERVED
    }

    /// Id for a token, falling back to `<unk>`.
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        let id = id as usize;
        if id < RESERVED {
            Some(RESERVED_NAMES[id])
        } else {
            self.tokens.get(id - RESERVED).map(String::as_str)
        }
    }

    /// Stable content hash over granularity and token order, used to tie
    /// dataset artifacts to the vocabulary that encoded them.
    pub fn content_hash(&self) -> u64 {
        let mut h = crc32fast::Hasher::new();
        h.update(format!("{:?}", self.granularity).as_bytes());
        let mut h2 = crc32fast::Hasher::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\x1f");
            h2.update(t.as_bytes());
            h2.update(&(t.len() as u32).to_le_bytes());
        }
        ((h.finalize() as u64) << 32) | h2.finalize() as u64
    }
}

/// Splits one string into vocabulary tokens for the given granularity.
pub fn tokenize(text: &str, granularity: Granularity) -> Vec<String> {
    let lower = text.to_lowercase();
    match granularity {
        Granularity::Char => lower.chars().map(String::from).collect(),
        Granularity::Word => lower
            .chars()
            .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
            .collect::<String>()
            .split_whitespace()
            .map(String::from)
            .collect(),
        Granularity::Triletter => triletters(&lower),
    }
}

/// Overlapping character trigrams with a `#` boundary marker on each side.
pub fn triletters(lower: &str) -> Vec<String> {
    let chars: Vec<char> = std::iter::once('#')
        .chain(lower.chars())
        .chain(std::iter::once('#'))
        .collect();
    if chars.len() < 3 {
        return Vec::new();
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

/// Builds a vocabulary from a corpus: tokens ranked by frequency with ties
/// broken by first occurrence, truncated so the total size (including
/// reserved ids) does not exceed `max_size`.
pub fn build_vocab<I, S>(corpus: I, granularity: Granularity, max_size: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if max_size < 1 {
        return Err(Error::InvalidConfig("vocabulary max_size must be >= 1".into()));
    }
    let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
    let mut order = 0usize;
    for line in corpus {
        for tok in tokenize(line.as_ref(), granularity) {
            let e = counts.entry(tok).or_insert((0, order));
            e.0 += 1;
            order += 1;
        }
    }
    let mut ranked: Vec<(String, (u64, usize))> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    ranked.truncate(max_size.saturating_sub(RESERVED));
    Vocabulary::from_tokens(granularity, ranked.into_iter().map(|(t, _)| t).collect())
}
