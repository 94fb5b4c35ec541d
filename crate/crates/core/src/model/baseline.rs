//! Sparse features and logits for the two linear baselines.

use std::collections::BTreeMap;

use crate::tensor::Tensor;
use crate::text::{triletters, Vocabulary};
use crate::{Error, Result};

/// Hashed letter-trigram counts: lowercase, wrap with `#`, emit all
/// overlapping trigrams, hash each into one of `buckets` slots.
/// Returns sparse `(bucket, count)` pairs sorted by bucket.
pub fn featurize_triletter(text: &str, buckets: usize) -> Vec<(u32, f64)> {
    let lower = text.to_lowercase();
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for tri in triletters(&lower) {
        let slot = (fnv1a(tri.as_bytes()) % buckets as u64) as u32;
        *counts.entry(slot).or_insert(0.0) += 1.0;
    }
    counts.into_iter().collect()
}

/// Word-id counts over the vocabulary (unknown words count under `<unk>`).
pub fn featurize_bow(ids: &[u32], vocab_size: usize) -> Vec<(u32, f64)> {
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    for &id in ids {
        if id != crate::text::PAD_ID && (id as usize) < vocab_size {
            *counts.entry(id).or_insert(0.0) += 1.0;
        }
    }
    counts.into_iter().collect()
}

/// Appends the traditional-feature block after the vocabulary block so a
/// single weight matrix covers both.
pub fn bow_with_trad(ids: &[u32], vocab_size: usize, trad: &[f64]) -> Vec<(u32, f64)> {
    let mut feats = featurize_bow(ids, vocab_size);
    for (j, &v) in trad.iter().enumerate() {
        if v != 0.0 {
            feats.push(((vocab_size + j) as u32, v));
        }
    }
    feats
}

/// Multinomial logistic-regression logits over sparse features:
/// `logits[c] = b[c] + sum_i w[feat_i][c] * value_i`.
pub fn linear_logits(features: &[(u32, f64)], w: &Tensor, b: &Tensor) -> Result<Vec<f64>> {
    let rows = w.shape()[0];
    let classes = w.shape()[1];
    if b.numel() != classes {
        return Err(Error::ShapeMismatch {
            op: "linear_logits",
            lhs: w.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let mut logits = b.values().to_vec();
    for &(idx, value) in features {
        if idx as usize >= rows {
            return Err(Error::DimMismatch {
                op: "linear_logits",
                expected: format!("feature index < {rows}"),
                got: format!("{idx}"),
            });
        }
        let row = &w.values()[idx as usize * classes..(idx as usize + 1) * classes];
        for (l, wv) in logits.iter_mut().zip(row) {
            *l += value * wv;
        }
    }
    Ok(logits)
}

/// Reconstructs lowercased text from char-granularity ids; characters that
/// were out of vocabulary come back as the replacement character.
pub fn chars_from_ids(ids: &[u32], vocab: &Vocabulary) -> String {
    ids.iter()
        .take_while(|&&id| id != crate::text::PAD_ID)
        .map(|&id| match vocab.token(id) {
            Some(t) if t.chars().count() == 1 => t.chars().next().unwrap(),
            _ => '\u{fffd}',
        })
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
