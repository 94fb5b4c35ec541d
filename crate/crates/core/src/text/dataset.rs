//! Labeled datasets: splitting, prefix expansion and the JSONL artifact.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

use super::vocab::{Granularity, PAD_ID};

/// One supervised example: an encoded query plus its context and label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    /// Token ids, PAD-filled to the dataset's `max_len`.
    pub ids: Vec<u32>,
    pub locale: u32,
    pub features: Vec<f64>,
    pub label: u32,
}

impl LabeledExample {
    /// Number of leading non-PAD tokens.
    pub fn valid_len(&self) -> usize {
        self.ids.iter().position(|&id| id == PAD_ID).unwrap_or(self.ids.len())
    }

    /// No non-PAD token may follow the first PAD.
    pub fn is_well_formed(&self) -> bool {
        let vl = self.valid_len();
        self.ids[vl..].iter().all(|&id| id == PAD_ID)
    }
}

/// Artifact header binding examples to the vocabulary and label set that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub vocab_hash: u64,
    pub labels: Vec<String>,
    pub locales: Vec<String>,
    pub feature_width: usize,
    pub granularity: Granularity,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub examples: Vec<LabeledExample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Writes the artifact: one header line, then one example per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for e in &self.examples {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty dataset file".into()))??;
        let header: DatasetHeader = serde_json::from_str(&header_line)?;
        let mut examples = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            examples.push(serde_json::from_str(&line)?);
        }
        Ok(Dataset { header, examples })
    }
}

/// Seeded shuffle followed by contiguous cuts. Ratios must be positive and
/// sum to 1 within 1e-9; the dataset must hold at least 3 examples.
pub fn split_dataset(
    ds: &Dataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (a, b, c) = ratios;
    if a <= 0.0 || b <= 0.0 || c <= 0.0 {
        return Err(Error::InvalidConfig("split ratios must be positive".into()));
    }
    if (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split ratios sum to {}, expected 1",
            a + b + c
        )));
    }
    let n = ds.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "dataset of {n} examples cannot be split three ways"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Shuffle { epoch: 0 }));
    let n_train = ((a * n as f64).round() as usize).clamp(1, n - 2);
    let n_dev = ((b * n as f64).round() as usize).clamp(1, n - n_train - 1);
    let take = |idx: &[usize]| Dataset {
        header: ds.header.clone(),
        examples: idx.iter().map(|&i| ds.examples[i].clone()).collect(),
    };
    Ok((
        take(&order[..n_train]),
        take(&order[n_train..n_train + n_dev]),
        take(&order[n_train + n_dev..]),
    ))
}

/// Expands complete-query examples into one example per character prefix,
/// each inheriting the source example's label, locale and features. This is
/// the typeahead training signal: every keystroke of a session gets the
/// intent of the final click.
pub fn prefix_expand(ds: &Dataset) -> Result<Dataset> {
    if ds.header.granularity != Granularity::Char {
        return Err(Error::InvalidConfig(
            "prefix expansion requires a char-granularity dataset".into(),
        ));
    }
    let max_len = ds.header.max_len;
    let mut examples = Vec::new();
    for e in &ds.examples {
        let vl = e.valid_len();
        for p in 1..=vl {
            let mut ids = e.ids[..p].to_vec();
            ids.resize(max_len, PAD_ID);
            examples.push(LabeledExample {
                ids,
                locale: e.locale,
                features: e.features.clone(),
                label: e.label,
            });
        }
    }
    Ok(Dataset {
        header: ds.header.clone(),
        examples,
    })
}
