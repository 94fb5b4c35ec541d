//! Masked-token pre-training for the transformer encoder.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    encode_transformer_sequence, Architecture, GraphParams, ModelBundle, ModelConfig, Parameters,
    BUNDLE_FORMAT_VERSION,
};
use crate::rng::{stream_rng, Stream};
use crate::tensor::Graph;
use crate::text::{tokenize, IntentLabelSet, Vocabulary, CLS_ID, MASK_ID, PAD_ID, RESERVED};
use crate::{Error, Result};

use super::optimizer::{optimizer_step, OptState, TrainHyper};

/// Masking policy. Of the positions selected at `mask_rate`, `mask_frac`
/// become the mask token, `random_frac` become a random content token and
/// the rest stay unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskScheme {
    pub mask_rate: f64,
    pub mask_frac: f64,
    pub random_frac: f64,
}

impl Default for MaskScheme {
    fn default() -> Self {
        MaskScheme { mask_rate: 0.15, mask_frac: 0.8, random_frac: 0.1 }
    }
}

/// Corrupts a sequence for masked-token prediction. Returns the corrupted
/// ids, the selected positions and their original ids. PAD and CLS
/// positions are never selected. Deterministic for a fixed seed.
pub fn mask_tokens(
    ids: &[u32],
    mask_rate: f64,
    seed: u64,
) -> Result<(Vec<u32>, Vec<usize>, Vec<u32>)> {
    let scheme = MaskScheme { mask_rate, ..MaskScheme::default() };
    let mut rng = stream_rng(seed, Stream::Mask { epoch: 0 });
    mask_tokens_with(ids, &scheme, u32::MAX, &mut rng)
}

/// Core masking routine drawing from a caller-owned stream. `vocab_size`
/// bounds the random replacement ids; pass `u32::MAX` to disable the
/// random branch bound check when `random_frac` is zero.
pub fn mask_tokens_with(
    ids: &[u32],
    scheme: &MaskScheme,
    vocab_size: u32,
    rng: &mut ChaCha12Rng,
) -> Result<(Vec<u32>, Vec<usize>, Vec<u32>)> {
    if !(0.0..=1.0).contains(&scheme.mask_rate) {
        return Err(Error::InvalidConfig("mask rate must be in [0,1]".into()));
    }
    if scheme.mask_frac + scheme.random_frac > 1.0 + 1e-12 {
        return Err(Error::InvalidConfig("mask_frac + random_frac must not exceed 1".into()));
    }
    if scheme.random_frac > 0.0 && vocab_size <= RESERVED as u32 {
        return Err(Error::InvalidConfig(
            "random replacement needs content tokens in the vocabulary".into(),
        ));
    }
    let mut corrupted = ids.to_vec();
    let mut positions = Vec::new();
    let mut targets = Vec::new();
    for (i, &id) in ids.iter().enumerate() {
        if id == PAD_ID || id == CLS_ID {
            continue;
        }
        if rng.gen_range(0.0..1.0) >= scheme.mask_rate {
            continue;
        }
        positions.push(i);
        targets.push(id);
        let branch: f64 = rng.gen_range(0.0..1.0);
        if branch < scheme.mask_frac {
            corrupted[i] = MASK_ID;
        } else if branch < scheme.mask_frac + scheme.random_frac {
            corrupted[i] = rng.gen_range(RESERVED as u32..vocab_size);
        }
    }
    Ok((corrupted, positions, targets))
}

/// Pre-training statistics. `init_loss` is the mean masked loss of the
/// untrained model over a corpus sample, the reference point for how far
/// training moved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainStats {
    pub init_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub wall_ms: u64,
    pub masked_tokens: u64,
}

/// Pre-trains a transformer on masked-token prediction over a raw text
/// corpus. The returned bundle carries the encoder plus the masked-token
/// output head; feed its parameters to classifier training as a warm
/// start. Deterministic per `(config, corpus, hyper)`.
pub fn pretrain_mlm<I, S>(
    config: &ModelConfig,
    corpus: I,
    vocab: &Vocabulary,
    scheme: &MaskScheme,
    hyper: &TrainHyper,
) -> Result<(ModelBundle, PretrainStats)>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    hyper.validate()?;
    if config.architecture != Architecture::Transformer {
        return Err(Error::InvalidConfig("masked-LM pre-training requires the transformer".into()));
    }
    let mut config = config.clone();
    config.mlm_head = true;
    config.validate()?;

    let max_tokens = config.text_max_len();
    let sequences: Vec<Vec<u32>> = corpus
        .into_iter()
        .filter_map(|line| {
            let ids: Vec<u32> = tokenize(line.as_ref(), vocab.granularity())
                .into_iter()
                .take(max_tokens)
                .map(|t| vocab.id(&t))
                .collect();
            if ids.is_empty() {
                None
            } else {
                Some(ids)
            }
        })
        .collect();
    if sequences.is_empty() {
        return Err(Error::Training("empty pre-training corpus".into()));
    }

    let started = Instant::now();
    let mut params = Parameters::init(&config, hyper.seed)?;
    let init_loss = mlm_corpus_loss(&config, &params, &sequences, vocab, scheme, hyper.seed)?;
    let mut state = OptState::default();
    let mut epoch_losses = Vec::new();
    let mut masked_total = 0u64;

    for epoch in 1..=hyper.epochs {
        let mut order: Vec<usize> = (0..sequences.len()).collect();
        order.shuffle(&mut stream_rng(hyper.seed, Stream::Shuffle { epoch: epoch as u64 }));
        let mut mask_rng = stream_rng(hyper.seed, Stream::Mask { epoch: epoch as u64 });
        let mut loss_sum = 0.0;
        let mut loss_weight = 0u64;
        for chunk in order.chunks(hyper.batch_size) {
            let mut g = Graph::new();
            let gp = GraphParams::insert(&mut g, &params);
            let mut weighted: Vec<(crate::tensor::NodeRef, usize)> = Vec::new();
            for &si in chunk {
                let (corrupted, positions, targets) = mask_tokens_with(
                    &sequences[si],
                    scheme,
                    vocab.size() as u32,
                    &mut mask_rng,
                )?;
                if positions.is_empty() {
                    continue;
                }
                let seq = encode_transformer_sequence(&mut g, &config, &gp, &corrupted)?;
                // CLS occupies row 0, so corpus position i sits at row i+1.
                let rows: Vec<usize> = positions.iter().map(|p| p + 1).collect();
                let hidden = g.select_rows(seq, &rows)?;
                let w = gp.node("mlm.w")?;
                let b = gp.node("mlm.b")?;
                let proj = g.matmul(hidden, w)?;
                let logits = g.add_row(proj, b)?;
                let loss = g.softmax_xent_batch(logits, &targets)?;
                weighted.push((loss, targets.len()));
            }
            if weighted.is_empty() {
                continue;
            }
            let total: usize = weighted.iter().map(|(_, k)| k).sum();
            let mut combined = None;
            for (loss, k) in &weighted {
                let scaled = g.scale(*loss, *k as f64 / total as f64)?;
                combined = Some(match combined {
                    None => scaled,
                    Some(acc) => g.add(acc, scaled)?,
                });
            }
            let root = combined.expect("non-empty batch");
            g.backward(root)?;
            let mut grads = BTreeMap::new();
            for (name, _) in params.iter() {
                if let Some(grad) = g.grad(gp.node(name)?) {
                    grads.insert(name.to_string(), grad.to_vec());
                }
            }
            let loss_val = g.value(root)[0];
            drop(g);
            optimizer_step(&mut params, &grads, &mut state, hyper)?;
            loss_sum += loss_val * total as f64;
            loss_weight += total as u64;
            masked_total += total as u64;
        }
        epoch_losses.push(loss_sum / loss_weight.max(1) as f64);
    }

    params.check_manifest(&config)?;
    let bundle = ModelBundle {
        config,
        params,
        vocab: vocab.clone(),
        labels: IntentLabelSet::default(),
        locales: None,
        format_version: BUNDLE_FORMAT_VERSION,
    };
    Ok((
        bundle,
        PretrainStats {
            init_loss,
            epoch_losses,
            wall_ms: started.elapsed().as_millis() as u64,
            masked_tokens: masked_total,
        },
    ))
}

/// Forward-only mean masked loss over (a sample of) the corpus.
fn mlm_corpus_loss(
    config: &ModelConfig,
    params: &Parameters,
    sequences: &[Vec<u32>],
    vocab: &Vocabulary,
    scheme: &MaskScheme,
    seed: u64,
) -> Result<f64> {
    const SAMPLE: usize = 4096;
    let mut rng = stream_rng(seed, Stream::Mask { epoch: 0 });
    let mut loss_sum = 0.0;
    let mut weight = 0usize;
    for seq in sequences.iter().take(SAMPLE) {
        let (corrupted, positions, targets) =
            mask_tokens_with(seq, scheme, vocab.size() as u32, &mut rng)?;
        if positions.is_empty() {
            continue;
        }
        let mut g = Graph::new();
        let gp = GraphParams::insert(&mut g, params);
        let out = encode_transformer_sequence(&mut g, config, &gp, &corrupted)?;
        let rows: Vec<usize> = positions.iter().map(|p| p + 1).collect();
        let hidden = g.select_rows(out, &rows)?;
        let w = gp.node("mlm.w")?;
        let b = gp.node("mlm.b")?;
        let proj = g.matmul(hidden, w)?;
        let logits = g.add_row(proj, b)?;
        let loss = g.softmax_xent_batch(logits, &targets)?;
        loss_sum += g.value(loss)[0] * targets.len() as f64;
        weight += targets.len();
    }
    if weight == 0 {
        return Err(Error::Training("masking selected no positions in the corpus".into()));
    }
    Ok(loss_sum / weight as f64)
}
