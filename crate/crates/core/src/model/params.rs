//! Named parameter tensors and their initialization.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::rng::{stream_rng, Stream};
use crate::tensor::Tensor;
use crate::{Error, Result};

use super::config::ModelConfig;

/// The model's named tensors. Values are shared (`Arc`) so prediction
/// graphs can reference them without copying; training holds the only
/// other reference and updates in place between graphs.
#[derive(Debug, Clone, Default)]
pub struct Parameters {
    map: BTreeMap<String, Arc<Tensor>>,
}

impl Parameters {
    /// Seeded initialization following the manifest order:
    /// embeddings uniform in (-0.05, 0.05) with the PAD row zeroed,
    /// weight matrices Glorot-style fan-scaled uniform, biases zero except
    /// the LSTM forget gate at +1, norm scales at 1.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(seed, Stream::Init);
        let mut map = BTreeMap::new();
        for (name, shape) in config.manifest() {
            let numel: usize = shape.iter().product();
            let values: Vec<f64> = if name.ends_with(".gamma") {
                vec![1.0; numel]
            } else if name.ends_with(".beta") {
                vec![0.0; numel]
            } else if is_bias(&name) {
                let mut v = vec![0.0; numel];
                if name.starts_with("lstm.") && name.ends_with(".bias") {
                    // forget-gate block gets +1 for stable small-data training
                    let k = numel / 4;
                    v[k..2 * k].fill(1.0);
                }
                v
            } else if name.ends_with(".table") || name == "transformer.position" {
                let mut v: Vec<f64> = (0..numel).map(|_| rng.gen_range(-0.05..0.05)).collect();
                if name == "embedding.table" {
                    let d = shape[1];
                    v[..d].fill(0.0); // PAD row stays zero
                }
                v
            } else {
                let limit = glorot_limit(&name, &shape);
                (0..numel).map(|_| rng.gen_range(-limit..limit)).collect()
            };
            map.insert(name, Arc::new(Tensor::new(shape, values)?.with_grad()));
        }
        Ok(Parameters { map })
    }

    pub fn get(&self, name: &str) -> Result<&Arc<Tensor>> {
        self.map
            .get(name)
            .ok_or_else(|| Error::ManifestMismatch(format!("missing tensor {name:?}")))
    }

    /// Mutable access for the optimizer. Fails if a prediction graph still
    /// shares the tensor.
    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        let arc = self
            .map
            .get_mut(name)
            .ok_or_else(|| Error::ManifestMismatch(format!("missing tensor {name:?}")))?;
        Arc::get_mut(arc).ok_or_else(|| {
            Error::Training(format!("tensor {name:?} is still shared with a live graph"))
        })
    }

    pub fn insert(&mut self, name: String, t: Tensor) {
        self.map.insert(name, Arc::new(t));
    }

    /// Copies every tensor so the snapshot stays fixed while training
    /// continues to mutate the originals.
    pub fn deep_clone(&self) -> Parameters {
        Parameters {
            map: self
                .map
                .iter()
                .map(|(k, v)| (k.clone(), Arc::new((**v).clone())))
                .collect(),
        }
    }

    pub fn remove(&mut self, name: &str) -> Option<Arc<Tensor>> {
        self.map.remove(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Arc<Tensor>)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Validates presence and exact shape of every manifest entry, and that
    /// nothing extra is present.
    pub fn check_manifest(&self, config: &ModelConfig) -> Result<()> {
        let manifest = config.manifest();
        for (name, shape) in &manifest {
            let t = self.get(name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::ManifestMismatch(format!(
                    "tensor {name:?} has shape {:?}, manifest wants {shape:?}",
                    t.shape()
                )));
            }
        }
        if self.map.len() != manifest.len() {
            let expected: Vec<&String> = manifest.iter().map(|(n, _)| n).collect();
            let got: Vec<&str> = self.names().collect();
            return Err(Error::ManifestMismatch(format!(
                "expected tensors {expected:?}, found {got:?}"
            )));
        }
        Ok(())
    }
}

fn is_bias(name: &str) -> bool {
    name.ends_with(".bias")
        || name.ends_with(".b")
        || name.ends_with(".b1")
        || name.ends_with(".b2")
        || name.contains(".b_")
}

fn glorot_limit(name: &str, shape: &[usize]) -> f64 {
    let (fan_in, fan_out) = match shape.len() {
        // conv filters [f, h, d]: receptive field in, filters out
        3 => (shape[1] * shape[2], shape[0]),
        2 if name.contains("lstm") => (shape[0], shape[1] / 4),
        2 => (shape[0], shape[1]),
        _ => (shape.iter().product(), 1),
    };
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Element counts per named tensor plus the grand total.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParamCountReport {
    pub named: Vec<(String, usize)>,
    pub total: usize,
}

impl ParamCountReport {
    pub fn of(params: &Parameters) -> Self {
        let named: Vec<(String, usize)> = params
            .iter()
            .map(|(n, t)| (n.to_string(), t.numel()))
            .collect();
        let total = named.iter().map(|(_, c)| c).sum();
        ParamCountReport { named, total }
    }

    pub fn render(&self) -> String {
        let width = self.named.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (n, c) in &self.named {
            out.push_str(&format!("{n:<width$}  {c:>12}\n"));
        }
        out.push_str(&format!("{:<width$}  {:>12}\n", "total", self.total));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ModelConfig;

    #[test]
    fn init_matches_manifest() {
        let c = ModelConfig::char_cnn().with_vocab_size(50);
        let p = Parameters::init(&c, 7).unwrap();
        p.check_manifest(&c).unwrap();
    }

    #[test]
    fn pad_row_is_zero_and_forget_bias_is_one() {
        let c = ModelConfig::char_bilstm().with_vocab_size(30);
        let p = Parameters::init(&c, 7).unwrap();
        let emb = p.get("embedding.table").unwrap();
        assert!(emb.values()[..c.embedding_dim].iter().all(|&v| v == 0.0));
        let bias = p.get("lstm.fwd.bias").unwrap();
        let k = c.lstm.hidden;
        assert!(bias.values()[k..2 * k].iter().all(|&v| v == 1.0));
        assert!(bias.values()[..k].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let c = ModelConfig::word_cnn().with_vocab_size(100);
        let a = Parameters::init(&c, 3).unwrap();
        let b = Parameters::init(&c, 3).unwrap();
        for ((_, ta), (_, tb)) in a.iter().zip(b.iter()) {
            assert_eq!(ta.values(), tb.values());
        }
        let d = Parameters::init(&c, 4).unwrap();
        let any_diff = a
            .iter()
            .zip(d.iter())
            .any(|((_, ta), (_, tb))| ta.values() != tb.values());
        assert!(any_diff);
    }

    #[test]
    fn manifest_check_rejects_wrong_shape() {
        let c = ModelConfig::char_cnn().with_vocab_size(50);
        let mut p = Parameters::init(&c, 7).unwrap();
        p.insert("cnn.bias".into(), Tensor::zeros(vec![64]));
        assert!(p.check_manifest(&c).is_err());
    }

    #[test]
    fn count_report_totals() {
        let c = ModelConfig::char_cnn().with_vocab_size(500);
        let p = Parameters::init(&c, 7).unwrap();
        let r = ParamCountReport::of(&p);
        let manual: usize = c.manifest().iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        assert_eq!(r.total, manual);
        assert!(r.render().contains("total"));
    }
}
