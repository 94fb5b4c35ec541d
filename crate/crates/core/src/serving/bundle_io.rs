//! Bundle persistence.
//!
//! File layout: an 8-byte magic, a format version, a JSON header (config,
//! vocabulary, labels, locales, tensor manifest), the little-endian f64
//! tensor payload in header order, then a CRC32 over header + payload.
//! Loading verifies the version, the checksum and the manifest before
//! constructing anything.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ModelBundle, ModelConfig, Parameters, BUNDLE_FORMAT_VERSION};
use crate::tensor::Tensor;
use crate::text::{IntentLabelSet, LocaleRegistry, Vocabulary};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"QINTBNDL";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vocabulary,
    labels: IntentLabelSet,
    locales: Option<LocaleRegistry>,
    tensors: Vec<TensorEntry>,
}

/// Serializes the bundle to its on-disk byte layout.
pub fn bundle_to_bytes(bundle: &ModelBundle) -> Result<Vec<u8>> {
    bundle.params.check_manifest(&bundle.config)?;
    let tensors: Vec<TensorEntry> = bundle
        .params
        .iter()
        .map(|(name, t)| TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            dtype: "f64".to_string(),
        })
        .collect();
    let header = Header {
        config: bundle.config.clone(),
        vocab: bundle.vocab.clone(),
        labels: bundle.labels.clone(),
        locales: bundle.locales.clone(),
        tensors,
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&bundle.format_version.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for (_, t) in bundle.params.iter() {
        for v in t.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&out[MAGIC.len() + 4 + 8..]);
    out.extend_from_slice(&hasher.finalize().to_le_bytes());
    Ok(out)
}

/// Parses and fully verifies a serialized bundle.
pub fn bundle_from_bytes(bytes: &[u8]) -> Result<ModelBundle> {
    let fixed = MAGIC.len() + 4 + 8;
    if bytes.len() < fixed + 4 {
        return Err(Error::InvalidInput("bundle file truncated".into()));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::InvalidInput("not a model bundle (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != BUNDLE_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: BUNDLE_FORMAT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = &bytes[fixed..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(body);
    let computed = hasher.finalize();
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    if header_len > body.len() {
        return Err(Error::InvalidInput("bundle header length out of range".into()));
    }
    let header: Header = serde_json::from_slice(&body[..header_len])?;
    let mut payload = &body[header_len..];
    let mut params = Parameters::default();
    for entry in &header.tensors {
        if entry.dtype != "f64" {
            return Err(Error::ManifestMismatch(format!(
                "tensor {:?} has unsupported dtype {:?}",
                entry.name, entry.dtype
            )));
        }
        let numel: usize = entry.shape.iter().product();
        if payload.len() < numel * 8 {
            return Err(Error::InvalidInput(format!(
                "payload truncated at tensor {:?}",
                entry.name
            )));
        }
        let values: Vec<f64> = payload[..numel * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        payload = &payload[numel * 8..];
        params.insert(
            entry.name.clone(),
            Tensor::new(entry.shape.clone(), values)?.with_grad(),
        );
    }
    if !payload.is_empty() {
        return Err(Error::InvalidInput("trailing bytes after tensor payload".into()));
    }
    params.check_manifest(&header.config)?;
    Ok(ModelBundle {
        config: header.config,
        params,
        vocab: header.vocab,
        labels: header.labels,
        locales: header.locales,
        format_version: version,
    })
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    let bytes = bundle_to_bytes(bundle)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    bundle_from_bytes(&bytes)
}

/// CRC32 of the canonical serialization; two bundles with equal checksums
/// hold bit-identical configs and weights.
pub fn bundle_checksum(bundle: &ModelBundle) -> Result<u32> {
    let bytes = bundle_to_bytes(bundle)?;
    Ok(u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::text::{build_vocab, Granularity, Query, UserContext};

    fn bundle() -> ModelBundle {
        let vocab = build_vocab(["abcdefghij klmnop"], Granularity::Char, 64).unwrap();
        let mut config = ModelConfig::char_cnn().with_vocab_size(vocab.size());
        config.embedding_dim = 8;
        config.cnn.filters = 8;
        config.fusion_hidden = 8;
        ModelBundle::new(config, vocab, IntentLabelSet::default(), None, 5).unwrap()
    }

    #[test]
    fn round_trip_preserves_predictions_bit_exactly() {
        let b = bundle();
        let bytes = bundle_to_bytes(&b).unwrap();
        let loaded = bundle_from_bytes(&bytes).unwrap();
        let user = UserContext::fresh("u", 0, 16, 5, 8).unwrap();
        for text in ["abe", "ghij k", "", "mno"] {
            let q = Query::incomplete(text, 0);
            assert_eq!(
                b.predict(&q, &user).unwrap(),
                loaded.predict(&q, &user).unwrap(),
                "text {text:?}"
            );
        }
    }

    #[test]
    fn any_flipped_payload_byte_fails_the_checksum() {
        let b = bundle();
        let mut bytes = bundle_to_bytes(&b).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(
            bundle_from_bytes(&bytes),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn future_version_is_rejected_before_anything_loads() {
        let b = bundle();
        let mut bytes = bundle_to_bytes(&b).unwrap();
        bytes[8..12].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            bundle_from_bytes(&bytes),
            Err(Error::UnsupportedVersion { found: 99, .. })
        ));
    }

    #[test]
    fn checksum_is_stable_and_weight_sensitive() {
        let b = bundle();
        assert_eq!(bundle_checksum(&b).unwrap(), bundle_checksum(&b).unwrap());
        let mut other = b.clone();
        let mut t = (**other.params.get("fusion.b2").unwrap()).clone();
        t.values_mut()[0] += 1e-9;
        other.params.insert("fusion.b2".into(), t);
        assert_ne!(bundle_checksum(&b).unwrap(), bundle_checksum(&other).unwrap());
    }

    #[test]
    fn save_and_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.qib");
        let b = bundle();
        save_bundle(&b, &path).unwrap();
        let loaded = load_bundle(&path).unwrap();
        assert_eq!(bundle_checksum(&b).unwrap(), bundle_checksum(&loaded).unwrap());
    }
}
