//! Supervised classifier training for every architecture.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{
    bow_with_trad, chars_from_ids, encode_deep_batch, featurize_triletter, fuse_wide_deep,
    linear_logits, Architecture, Batch, GraphParams, ModelBundle, ModelConfig, Parameters,
    BUNDLE_FORMAT_VERSION,
};
use crate::tensor::Graph;
use crate::text::{Dataset, IntentLabelSet, LocaleRegistry, Vocabulary};
use crate::{Error, Result};

use super::batch::epoch_batches;
use super::optimizer::{optimizer_step, sgd_sparse_rows, OptState, TrainHyper};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CompletedAllEpochs,
    EarlyStopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub final_epoch: usize,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    /// Equality of everything a deterministic rerun must reproduce; wall
    /// times are measurements, not results, and are excluded.
    pub fn same_trajectory(&self, other: &TrainHistory) -> bool {
        self.final_epoch == other.final_epoch
            && self.best_epoch == other.best_epoch
            && self.stop_reason == other.stop_reason
            && self.epochs.len() == other.epochs.len()
            && self
                .epochs
                .iter()
                .zip(&other.epochs)
                .all(|(a, b)| {
                    a.epoch == b.epoch
                        && a.train_loss == b.train_loss
                        && a.dev_accuracy == b.dev_accuracy
                })
    }
}

/// Trains a classifier: seeded per-epoch shuffle, mini-batch cross-entropy,
/// dev evaluation after every epoch, best-dev checkpoint returned.
/// Deterministic for fixed `(config, data, hyper)` — the seed lives in
/// `hyper.seed`. `init_from` warm-starts any tensors whose name and shape
/// match the new manifest (used to fine-tune from a pre-trained encoder).
pub fn train_classifier(
    config: &ModelConfig,
    vocab: &Vocabulary,
    labels: &IntentLabelSet,
    locales: Option<&LocaleRegistry>,
    train: &Dataset,
    dev: &Dataset,
    init_from: Option<&Parameters>,
    hyper: &TrainHyper,
) -> Result<(ModelBundle, TrainHistory)> {
    hyper.validate()?;
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Training("empty training split".into()));
    }
    if train.header.granularity != config.granularity {
        return Err(Error::Training(format!(
            "dataset granularity {:?} != model granularity {:?}",
            train.header.granularity, config.granularity
        )));
    }
    for e in train.examples.iter().chain(&dev.examples) {
        if e.label as usize >= config.label_count {
            return Err(Error::LabelOutOfRange {
                label: e.label as usize,
                classes: config.label_count,
            });
        }
        if config.trad_width > 0 && e.features.len() != config.trad_width {
            return Err(Error::Training(format!(
                "example feature width {} != configured {}",
                e.features.len(),
                config.trad_width
            )));
        }
    }

    let mut params = Parameters::init(config, hyper.seed)?;
    if let Some(src) = init_from {
        let mut adopted = 0;
        for (name, shape) in config.manifest() {
            if let Ok(t) = src.get(&name) {
                if t.shape() == shape.as_slice() {
                    params.insert(name, (**t).clone());
                    adopted += 1;
                }
            }
        }
        if adopted == 0 {
            return Err(Error::Training(
                "warm start shares no tensors with the new model".into(),
            ));
        }
    }

    match config.architecture {
        Architecture::TriletterLr | Architecture::BowLr => {
            train_linear(config, vocab, labels, locales, train, dev, params, hyper)
        }
        _ => train_deep(config, vocab, labels, locales, train, dev, params, hyper),
    }
}

#[allow(clippy::too_many_arguments)]
fn train_deep(
    config: &ModelConfig,
    vocab: &Vocabulary,
    labels: &IntentLabelSet,
    locales: Option<&LocaleRegistry>,
    train: &Dataset,
    dev: &Dataset,
    mut params: Parameters,
    hyper: &TrainHyper,
) -> Result<(ModelBundle, TrainHistory)> {
    let lens: Vec<usize> = train.examples.iter().map(|e| e.valid_len()).collect();
    let mut state = OptState::default();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Parameters)> = None;
    let mut stop_reason = StopReason::CompletedAllEpochs;

    for epoch in 1..=hyper.epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for batch_idx in epoch_batches(&lens, hyper.batch_size, hyper.seed, epoch as u64) {
            let loss = {
                let mut g = Graph::new();
                let gp = GraphParams::insert(&mut g, &params);
                let loss = forward_batch(&mut g, &gp, config, train, &batch_idx)?;
                g.backward(loss)?;
                let mut grads = BTreeMap::new();
                for (name, _) in params.iter() {
                    if let Some(grad) = g.grad(gp.node(name)?) {
                        grads.insert(name.to_string(), grad.to_vec());
                    }
                }
                let loss_val = g.value(loss)[0];
                drop(g);
                optimizer_step(&mut params, &grads, &mut state, hyper)?;
                loss_val
            };
            loss_sum += loss * batch_idx.len() as f64;
            seen += batch_idx.len();
        }
        let dev_accuracy = deep_accuracy(config, &params, dev, hyper.batch_size)?;
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / seen.max(1) as f64,
            dev_accuracy,
            wall_ms: started.elapsed().as_millis() as u64,
        });
        let improved = best.as_ref().map_or(true, |(acc, _, _)| dev_accuracy > *acc);
        if improved {
            best = Some((dev_accuracy, epoch, params.deep_clone()));
        } else if let Some(patience) = hyper.patience {
            let best_epoch = best.as_ref().map(|(_, e, _)| *e).unwrap_or(0);
            if epoch - best_epoch >= patience {
                stop_reason = StopReason::EarlyStopped;
                break;
            }
        }
    }

    let (_, best_epoch, best_params) =
        best.ok_or_else(|| Error::Training("no epochs completed".into()))?;
    finish(
        config, vocab, labels, locales, best_params, best_epoch, history, stop_reason,
    )
}

/// Forward pass for one batch; returns the scalar mean-loss node.
fn forward_batch(
    g: &mut Graph,
    gp: &GraphParams,
    config: &ModelConfig,
    ds: &Dataset,
    batch_idx: &[usize],
) -> Result<crate::tensor::NodeRef> {
    let mut ids: Vec<&[u32]> = Vec::with_capacity(batch_idx.len());
    let mut locales_v: Vec<u32> = Vec::with_capacity(batch_idx.len());
    let mut labels_v: Vec<u32> = Vec::with_capacity(batch_idx.len());
    let mut trad: Vec<f64> = Vec::with_capacity(batch_idx.len() * config.trad_width);
    for &i in batch_idx {
        let e = &ds.examples[i];
        ids.push(&e.ids[..e.valid_len()]);
        locales_v.push(e.locale);
        labels_v.push(e.label);
        trad.extend_from_slice(&e.features);
    }
    let emb = encode_deep_batch(g, config, gp, &Batch { ids, locales: locales_v })?;
    let trad_node = if config.trad_width > 0 {
        Some(g.constant(trad, vec![batch_idx.len(), config.trad_width]))
    } else {
        None
    };
    let logits = fuse_wide_deep(g, emb, trad_node, gp)?;
    g.softmax_xent_batch(logits, &labels_v)
}

/// Batched argmax accuracy for deep models.
pub(crate) fn deep_accuracy(
    config: &ModelConfig,
    params: &Parameters,
    ds: &Dataset,
    batch_size: usize,
) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let lens: Vec<usize> = ds.examples.iter().map(|e| e.valid_len()).collect();
    // Group by length without shuffling: evaluation order is irrelevant.
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in lens.iter().enumerate() {
        buckets.entry(l).or_default().push(i);
    }
    let mut correct = 0usize;
    for (_, bucket) in buckets {
        for chunk in bucket.chunks(batch_size) {
            let mut g = Graph::new();
            let gp = GraphParams::insert(&mut g, params);
            let mut ids: Vec<&[u32]> = Vec::with_capacity(chunk.len());
            let mut locales_v = Vec::with_capacity(chunk.len());
            let mut trad = Vec::with_capacity(chunk.len() * config.trad_width);
            for &i in chunk {
                let e = &ds.examples[i];
                ids.push(&e.ids[..e.valid_len()]);
                locales_v.push(e.locale);
                trad.extend_from_slice(&e.features);
            }
            let emb = encode_deep_batch(&mut g, config, &gp, &Batch { ids, locales: locales_v })?;
            let trad_node = if config.trad_width > 0 {
                Some(g.constant(trad, vec![chunk.len(), config.trad_width]))
            } else {
                None
            };
            let logits = fuse_wide_deep(&mut g, emb, trad_node, &gp)?;
            let values = g.value(logits);
            let c = config.label_count;
            for (row, &i) in chunk.iter().enumerate() {
                let slice = &values[row * c..(row + 1) * c];
                if argmax(slice) == ds.examples[i].label {
                    correct += 1;
                }
            }
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}

#[allow(clippy::too_many_arguments)]
fn train_linear(
    config: &ModelConfig,
    vocab: &Vocabulary,
    labels: &IntentLabelSet,
    locales: Option<&LocaleRegistry>,
    train: &Dataset,
    dev: &Dataset,
    mut params: Parameters,
    hyper: &TrainHyper,
) -> Result<(ModelBundle, TrainHistory)> {
    let featurize = |ds: &Dataset| -> Vec<Vec<(u32, f64)>> {
        ds.examples
            .iter()
            .map(|e| match config.architecture {
                Architecture::TriletterLr => {
                    let text = chars_from_ids(&e.ids, vocab);
                    featurize_triletter(&text, config.triletter_buckets)
                }
                _ => bow_with_trad(&e.ids[..e.valid_len()], vocab.size(), &e.features),
            })
            .collect()
    };
    let train_feats = featurize(train);
    let dev_feats = featurize(dev);
    let c = config.label_count;

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Parameters)> = None;
    let mut stop_reason = StopReason::CompletedAllEpochs;
    let lens = vec![0usize; train.len()];

    for epoch in 1..=hyper.epochs {
        let started = Instant::now();
        let mut loss_sum = 0.0;
        for batch_idx in epoch_batches(&lens, hyper.batch_size, hyper.seed, epoch as u64) {
            let scale = 1.0 / batch_idx.len() as f64;
            let mut row_grads: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            let mut bias_grad = vec![0.0; c];
            for &i in &batch_idx {
                let w = params.get("linear.w")?;
                let b = params.get("linear.b")?;
                let logits = linear_logits(&train_feats[i], w, b)?;
                let probs = softmax(&logits);
                let label = train.examples[i].label as usize;
                loss_sum -= probs[label].max(1e-300).ln();
                for (j, p) in probs.iter().enumerate() {
                    let delta = (p - if j == label { 1.0 } else { 0.0 }) * scale;
                    bias_grad[j] += delta;
                    for &(idx, value) in &train_feats[i] {
                        row_grads.entry(idx).or_insert_with(|| vec![0.0; c])[j] += value * delta;
                    }
                }
            }
            // Two tensors are updated; split borrows via remove/insert.
            let mut w = (**params.get("linear.w")?).clone();
            let mut b = (**params.get("linear.b")?).clone();
            sgd_sparse_rows(&mut w, &row_grads, &mut b, &bias_grad, hyper.learning_rate)?;
            params.insert("linear.w".into(), w);
            params.insert("linear.b".into(), b);
        }
        let dev_accuracy = linear_accuracy(&params, &dev_feats, dev)?;
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            dev_accuracy,
            wall_ms: started.elapsed().as_millis() as u64,
        });
        let improved = best.as_ref().map_or(true, |(acc, _, _)| dev_accuracy > *acc);
        if improved {
            best = Some((dev_accuracy, epoch, params.deep_clone()));
        } else if let Some(patience) = hyper.patience {
            let best_epoch = best.as_ref().map(|(_, e, _)| *e).unwrap_or(0);
            if epoch - best_epoch >= patience {
                stop_reason = StopReason::EarlyStopped;
                break;
            }
        }
    }

    let (_, best_epoch, best_params) =
        best.ok_or_else(|| Error::Training("no epochs completed".into()))?;
    finish(
        config, vocab, labels, locales, best_params, best_epoch, history, stop_reason,
    )
}

pub(crate) fn linear_accuracy(
    params: &Parameters,
    feats: &[Vec<(u32, f64)>],
    ds: &Dataset,
) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let w = params.get("linear.w")?;
    let b = params.get("linear.b")?;
    let mut correct = 0usize;
    for (f, e) in feats.iter().zip(&ds.examples) {
        let logits = linear_logits(f, w, b)?;
        if argmax(&logits) == e.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    config: &ModelConfig,
    vocab: &Vocabulary,
    labels: &IntentLabelSet,
    locales: Option<&LocaleRegistry>,
    params: Parameters,
    best_epoch: usize,
    history: Vec<EpochStats>,
    stop_reason: StopReason,
) -> Result<(ModelBundle, TrainHistory)> {
    params.check_manifest(config)?;
    let bundle = ModelBundle {
        config: config.clone(),
        params,
        vocab: vocab.clone(),
        labels: labels.clone(),
        locales: locales.cloned(),
        format_version: BUNDLE_FORMAT_VERSION,
    };
    let final_epoch = history.len();
    Ok((
        bundle,
        TrainHistory { epochs: history, final_epoch, best_epoch, stop_reason },
    ))
}

pub(crate) fn argmax(values: &[f64]) -> u32 {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0u32;
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            arg = i as u32;
        }
    }
    arg
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
    let denom: f64 = exps.iter().sum();
    exps.iter().map(|e| e / denom).collect()
}
