//! Queries, locales, encoding and prefix generation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::vocab::{tokenize, Granularity, Vocabulary, PAD_ID};

/// A search query at some point of the typing session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    /// Index into the [`LocaleRegistry`] the model was built against.
    pub locale: u32,
    /// False while the user is still typing (typeahead prefixes).
    pub complete: bool,
}

impl Query {
    pub fn complete(text: impl Into<String>, locale: u32) -> Self {
        Query { text: text.into(), locale, complete: true }
    }

    pub fn incomplete(text: impl Into<String>, locale: u32) -> Self {
        Query { text: text.into(), locale, complete: false }
    }
}

/// Immutable, dense mapping of locale codes to ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LocaleRegistry {
    codes: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<LocaleRegistry> for Vec<String> {
    fn from(r: LocaleRegistry) -> Self {
        r.codes
    }
}

impl TryFrom<Vec<String>> for LocaleRegistry {
    type Error = Error;

    fn try_from(codes: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(codes.len());
        for (i, c) in codes.iter().enumerate() {
            if index.insert(c.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate locale code {c:?}")));
            }
        }
        Ok(LocaleRegistry { codes, index })
    }
}

impl LocaleRegistry {
    pub fn new<S: Into<String>>(codes: impl IntoIterator<Item = S>) -> Result<Self> {
        LocaleRegistry::try_from(codes.into_iter().map(Into::into).collect::<Vec<_>>())
    }

    pub fn id(&self, code: &str) -> Result<u32> {
        self.index
            .get(code)
            .copied()
            .ok_or_else(|| Error::UnknownLocale(code.to_string()))
    }

    pub fn code(&self, id: u32) -> Result<&str> {
        self.codes
            .get(id as usize)
            .map(String::as_str)
            .ok_or(Error::LocaleIdOutOfRange { id, size: self.codes.len() })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }
}

/// Collapses whitespace runs and trims the ends.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Encodes a query into a PAD-filled id sequence of exactly `max_len`.
///
/// Char mode splits on Unicode scalar values after lowercasing; word mode
/// lowercases, strips punctuation and splits on whitespace. Unknown tokens
/// map to `<unk>`; overlong input truncates.
pub fn encode_query(q: &Query, vocab: &Vocabulary, max_len: usize) -> Result<Vec<u32>> {
    if max_len < 1 {
        return Err(Error::InvalidConfig("max_len must be >= 1".into()));
    }
    match vocab.granularity() {
        Granularity::Char | Granularity::Word => {}
        g => {
            return Err(Error::InvalidConfig(format!(
                "encode_query requires a char or word vocabulary, got {g:?}"
            )))
        }
    }
    let mut ids: Vec<u32> = tokenize(&q.text, vocab.granularity())
        .into_iter()
        .take(max_len)
        .map(|t| vocab.id(&t))
        .collect();
    ids.resize(max_len, PAD_ID);
    Ok(ids)
}

/// All character prefixes of the query in typing order, each marked
/// incomplete and keeping the locale. Boundaries are Unicode scalar values.
pub fn generate_prefixes(q: &Query) -> Vec<Query> {
    let mut out = Vec::new();
    let mut buf = String::new();
    for ch in q.text.chars() {
        buf.push(ch);
        out.push(Query::incomplete(buf.clone(), q.locale));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::vocab::{build_vocab, UNK_ID};
    use super::*;

    #[test]
    fn encode_char_query_pads() {
        let v = build_vocab(["li"], Granularity::Char, 10).unwrap();
        let ids = encode_query(&Query::incomplete("li", 0), &v, 5).unwrap();
        assert_eq!(ids.len(), 5);
        assert_eq!(ids[0], v.id("l"));
        assert_eq!(ids[1], v.id("i"));
        assert_eq!(&ids[2..], &[PAD_ID; 3]);
    }

    #[test]
    fn unknown_char_becomes_unk() {
        let v = build_vocab(["abc"], Granularity::Char, 10).unwrap();
        let ids = encode_query(&Query::incomplete("Ω", 0), &v, 3).unwrap();
        assert_eq!(ids, vec![UNK_ID, PAD_ID, PAD_ID]);
    }

    #[test]
    fn word_mode_encodes_in_vocab_words() {
        let v = build_vocab(["linkedin jobs today"], Granularity::Word, 10).unwrap();
        let ids = encode_query(&Query::complete("LinkedIn Jobs", 0), &v, 4).unwrap();
        assert_eq!(ids[0], v.id("linkedin"));
        assert_eq!(ids[1], v.id("jobs"));
        assert_ne!(ids[0], UNK_ID);
        assert_ne!(ids[1], UNK_ID);
        assert_eq!(&ids[2..], &[PAD_ID; 2]);
    }

    #[test]
    fn encode_rejects_zero_max_len() {
        let v = build_vocab(["x"], Granularity::Char, 10).unwrap();
        assert!(encode_query(&Query::complete("x", 0), &v, 0).is_err());
    }

    #[test]
    fn prefixes_in_typing_order() {
        let q = Query::complete("link", 3);
        let p = generate_prefixes(&q);
        let texts: Vec<&str> = p.iter().map(|q| q.text.as_str()).collect();
        assert_eq!(texts, vec!["l", "li", "lin", "link"]);
        assert!(p.iter().all(|q| !q.complete && q.locale == 3));
    }

    #[test]
    fn empty_text_has_no_prefixes() {
        assert!(generate_prefixes(&Query::complete("", 0)).is_empty());
    }

    #[test]
    fn prefixes_respect_unicode_boundaries() {
        let p = generate_prefixes(&Query::complete("hél", 0));
        let texts: Vec<&str> = p.iter().map(|q| q.text.as_str()).collect();
        assert_eq!(texts, vec!["h", "hé", "hél"]);
    }

    #[test]
    fn registry_rejects_duplicates_and_resolves_codes() {
        assert!(LocaleRegistry::new(["en", "en"]).is_err());
        let r = LocaleRegistry::new(["en", "fr", "de"]).unwrap();
        assert_eq!(r.id("fr").unwrap(), 1);
        assert_eq!(r.code(2).unwrap(), "de");
        assert!(r.id("pt").is_err());
    }
}
