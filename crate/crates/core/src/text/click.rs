//! Click-log records and click-through label derivation.
//!
//! Supervision comes from what the user clicked: a click on a job posting
//! labels the query with job intent, a click on a company page with company
//! intent, and so on. The document-type-to-intent table is configuration.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::dataset::{Dataset, DatasetHeader, LabeledExample};
use super::features::UserFeaturizer;
use super::query::{encode_query, normalize_text, LocaleRegistry, Query};
use super::vocab::Vocabulary;

/// One raw click-through log row. Wire format is UTF-8 JSON Lines with
/// exactly these field names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub query: String,
    pub locale: String,
    pub user_id: String,
    pub clicked_type: String,
    pub ts: i64,
}

/// Ordered intent names with dense ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct IntentLabelSet {
    names: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl From<IntentLabelSet> for Vec<String> {
    fn from(l: IntentLabelSet) -> Self {
        l.names
    }
}

impl TryFrom<Vec<String>> for IntentLabelSet {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidConfig("label set must not be empty".into()));
        }
        let mut index = BTreeMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate intent name {n:?}")));
            }
        }
        Ok(IntentLabelSet { names, index })
    }
}

impl Default for IntentLabelSet {
    fn default() -> Self {
        IntentLabelSet::new(["PEOPLE", "JOB", "COMPANY", "GROUP", "CONTENT"]).unwrap()
    }
}

impl IntentLabelSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        IntentLabelSet::try_from(names.into_iter().map(Into::into).collect::<Vec<_>>())
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Clicked-document-type to intent-name table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeIntentMap(pub BTreeMap<String, String>);

impl Default for TypeIntentMap {
    fn default() -> Self {
        let pairs = [
            ("profile_page", "PEOPLE"),
            ("job_posting", "JOB"),
            ("company_page", "COMPANY"),
            ("group_page", "GROUP"),
            ("content_article", "CONTENT"),
        ];
        TypeIntentMap(
            pairs
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        )
    }
}

/// Maps a record's clicked document type to an intent id. Unmapped types
/// are rejected so ingestion can count them.
pub fn derive_label(
    record: &ClickRecord,
    labels: &IntentLabelSet,
    map: &TypeIntentMap,
) -> Result<u32> {
    let intent = map
        .0
        .get(&record.clicked_type)
        .ok_or_else(|| Error::UnmappedClickType(record.clicked_type.clone()))?;
    labels
        .id(intent)
        .ok_or_else(|| Error::UnmappedClickType(record.clicked_type.clone()))
}

/// Per-reason skip counters for one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: u64,
    pub skipped: BTreeMap<String, u64>,
}

impl IngestReport {
    pub fn skipped_total(&self) -> u64 {
        self.skipped.values().sum()
    }

    pub fn total(&self) -> u64 {
        self.accepted + self.skipped_total()
    }

    fn skip(&mut self, reason: &str) {
        *self.skipped.entry(reason.to_string()).or_insert(0) += 1;
    }
}

/// Turns a click-record stream into a labeled dataset.
///
/// Each record is labeled via [`derive_label`], encoded against `vocab`,
/// and paired with the user's behavioral features computed from their
/// clicks *before* this one. Deterministic for a fixed stream order.
pub fn ingest_click_log<I>(
    records: I,
    labels: &IntentLabelSet,
    type_map: &TypeIntentMap,
    vocab: &Vocabulary,
    registry: &LocaleRegistry,
    featurizer: &mut UserFeaturizer,
    max_len: usize,
) -> Result<(Dataset, IngestReport)>
where
    I: IntoIterator<Item = Result<ClickRecord>>,
{
    let mut report = IngestReport::default();
    let mut examples = Vec::new();
    for item in records {
        let record = match item {
            Ok(r) => r,
            Err(_) => {
                report.skip("parse_error");
                continue;
            }
        };
        if normalize_text(&record.query).is_empty() {
            report.skip("empty_query");
            continue;
        }
        if record.clicked_type.is_empty() {
            report.skip("empty_type");
            continue;
        }
        let locale = match registry.id(&record.locale) {
            Ok(l) => l,
            Err(_) => {
                report.skip("unknown_locale");
                continue;
            }
        };
        let label = match derive_label(&record, labels, type_map) {
            Ok(l) => l,
            Err(Error::UnmappedClickType(_)) => {
                report.skip("unmapped_type");
                continue;
            }
            Err(e) => return Err(e),
        };
        let features = featurizer.features(&record.user_id, locale)?;
        featurizer.observe(&record.user_id, label);
        let ids = encode_query(&Query::complete(record.query.clone(), locale), vocab, max_len)?;
        examples.push(LabeledExample {
            ids,
            locale,
            features,
            label,
        });
        report.accepted += 1;
    }
    let header = DatasetHeader {
        vocab_hash: vocab.content_hash(),
        labels: labels.names().to_vec(),
        locales: registry.codes().to_vec(),
        feature_width: featurizer.width(),
        granularity: vocab.granularity(),
        max_len,
    };
    Ok((Dataset { header, examples }, report))
}

/// Parses newline-delimited JSON click records from a reader. Line-level
/// failures become `Err` items so ingestion can count them.
pub fn read_click_log<R: BufRead>(reader: R) -> impl Iterator<Item = Result<ClickRecord>> {
    reader.lines().filter_map(|line| match line {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(serde_json::from_str::<ClickRecord>(&l).map_err(Error::from)),
        Err(e) => Some(Err(Error::from(e))),
    })
}

#[cfg(test)]
mod tests {
    use super::super::vocab::{build_vocab, Granularity};
    use super::*;

    fn record(query: &str, clicked: &str) -> ClickRecord {
        ClickRecord {
            query: query.into(),
            locale: "en".into(),
            user_id: "u1".into(),
            clicked_type: clicked.into(),
            ts: 0,
        }
    }

    #[test]
    fn job_click_labels_job_intent() {
        let labels = IntentLabelSet::default();
        let map = TypeIntentMap::default();
        let r = record("linkedin sales solutions", "job_posting");
        assert_eq!(derive_label(&r, &labels, &map).unwrap(), labels.id("JOB").unwrap());
    }

    #[test]
    fn company_click_labels_company_intent() {
        let labels = IntentLabelSet::default();
        let map = TypeIntentMap::default();
        let r = record("face", "company_page");
        assert_eq!(
            derive_label(&r, &labels, &map).unwrap(),
            labels.id("COMPANY").unwrap()
        );
    }

    #[test]
    fn unmapped_type_is_rejected() {
        let labels = IntentLabelSet::default();
        let map = TypeIntentMap::default();
        let r = record("x", "unknown_widget");
        assert!(matches!(
            derive_label(&r, &labels, &map),
            Err(Error::UnmappedClickType(_))
        ));
    }

    fn setup() -> (IntentLabelSet, TypeIntentMap, Vocabulary, LocaleRegistry) {
        (
            IntentLabelSet::default(),
            TypeIntentMap::default(),
            build_vocab(["abcdefghijklmnopqrstuvwxyz "], Granularity::Char, 100).unwrap(),
            LocaleRegistry::new(["en"]).unwrap(),
        )
    }

    #[test]
    fn ingest_counts_accepted_and_skipped() {
        let (labels, map, vocab, registry) = setup();
        let mut featurizer = UserFeaturizer::new(16, labels.len(), 8).unwrap();
        let stream = vec![
            Ok(record("alpha", "job_posting")),
            Ok(record("beta", "company_page")),
            Ok(record("gamma", "profile_page")),
        ];
        let (ds, report) =
            ingest_click_log(stream, &labels, &map, &vocab, &registry, &mut featurizer, 16).unwrap();
        assert_eq!(ds.examples.len(), 3);
        assert_eq!(report.accepted, 3);
        assert_eq!(report.skipped_total(), 0);
    }

    #[test]
    fn ingest_skips_unmapped_types_with_reason() {
        let (labels, map, vocab, registry) = setup();
        let mut featurizer = UserFeaturizer::new(16, labels.len(), 8).unwrap();
        let mut stream: Vec<crate::Result<ClickRecord>> =
            (0..4).map(|i| Ok(record(&format!("q{i}"), "job_posting"))).collect();
        stream.insert(2, Ok(record("odd", "unknown_widget")));
        let (ds, report) =
            ingest_click_log(stream, &labels, &map, &vocab, &registry, &mut featurizer, 16).unwrap();
        assert_eq!(ds.examples.len(), 4);
        assert_eq!(report.skipped["unmapped_type"], 1);
        assert_eq!(report.total(), 5);
    }

    #[test]
    fn ingest_skips_empty_queries() {
        let (labels, map, vocab, registry) = setup();
        let mut featurizer = UserFeaturizer::new(16, labels.len(), 8).unwrap();
        let stream = vec![Ok(record("   ", "job_posting"))];
        let (ds, report) =
            ingest_click_log(stream, &labels, &map, &vocab, &registry, &mut featurizer, 16).unwrap();
        assert!(ds.examples.is_empty());
        assert_eq!(report.skipped["empty_query"], 1);
    }

    #[test]
    fn click_log_wire_format_round_trips() {
        let r = record("linkedin", "company_page");
        let line = serde_json::to_string(&r).unwrap();
        assert!(line.contains("\"clicked_type\""));
        let parsed = read_click_log(std::io::Cursor::new(line))
            .next()
            .unwrap()
            .unwrap();
        assert_eq!(parsed, r);
    }
}
