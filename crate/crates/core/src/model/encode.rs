//! Graph builders for every encoder architecture.
//!
//! These functions append one model's forward pass to a [`Graph`]. They are
//! shared by prediction (batch of one, no gradients) and training (shared
//! parameter leaves with gradients).

use std::collections::BTreeMap;

use crate::tensor::{AttentionParams, Graph, NodeRef};
use crate::text::{CLS_ID, PAD_ID};
use crate::{Error, Result};

use super::config::{Architecture, ModelConfig, Multilingual};
use super::params::Parameters;

/// Node handles for all parameters inserted into one graph.
pub struct GraphParams {
    map: BTreeMap<String, NodeRef>,
}

impl GraphParams {
    pub fn insert(g: &mut Graph, params: &Parameters) -> Self {
        let map = params
            .iter()
            .map(|(name, tensor)| (name.to_string(), g.shared(tensor)))
            .collect();
        GraphParams { map }
    }

    pub fn node(&self, name: &str) -> Result<NodeRef> {
        self.map
            .get(name)
            .copied()
            .ok_or_else(|| Error::ManifestMismatch(format!("missing tensor {name:?}")))
    }
}

/// Embedding lookup for one id sequence. PAD positions come out as exact
/// zero rows with `mask = false`, and the PAD table row never receives
/// gradient, keeping it frozen at zero.
pub fn embed_sequence(
    g: &mut Graph,
    table: NodeRef,
    ids: &[u32],
) -> Result<(NodeRef, Vec<bool>)> {
    if ids.is_empty() {
        return Err(Error::EmptySequence("embed_sequence"));
    }
    let seq = g.gather_rows(table, ids, Some(PAD_ID))?;
    let mask = ids.iter().map(|&id| id != PAD_ID).collect();
    Ok((seq, mask))
}

/// Appends the locale row to every non-PAD position's embedding; PAD rows
/// stay fully zero. `None` for the table means a zero-width locale
/// embedding and the sequence passes through unchanged.
pub fn inject_locale_embed(
    g: &mut Graph,
    seq: NodeRef,
    mask: &[bool],
    locale: u32,
    locale_table: Option<NodeRef>,
    locale_count: usize,
) -> Result<NodeRef> {
    let Some(table) = locale_table else {
        return Ok(seq);
    };
    if locale as usize >= locale_count {
        return Err(Error::LocaleIdOutOfRange { id: locale, size: locale_count });
    }
    const GAP: u32 = u32::MAX;
    let ids: Vec<u32> = mask.iter().map(|&m| if m { locale } else { GAP }).collect();
    let rows = g.gather_rows(table, &ids, Some(GAP))?;
    g.concat_cols(seq, rows)
}

/// Appends the locale row once, to the encoder's output state. Works on a
/// batch: one locale per row of `query_emb`.
pub fn inject_locale_concat(
    g: &mut Graph,
    query_emb: NodeRef,
    locales: &[u32],
    locale_table: Option<NodeRef>,
    locale_count: usize,
) -> Result<NodeRef> {
    let Some(table) = locale_table else {
        return Ok(query_emb);
    };
    for &l in locales {
        if l as usize >= locale_count {
            return Err(Error::LocaleIdOutOfRange { id: l, size: locale_count });
        }
    }
    let rows = g.gather_rows(table, locales, None)?;
    g.concat_cols(query_emb, rows)
}

/// Convolution + max-over-time encoder for one sequence. Only windows
/// fully inside `valid_len` join the max; inputs shorter than the filter
/// height run against one zero-padded window.
pub fn encode_cnn(
    g: &mut Graph,
    seq: NodeRef,
    valid_len: usize,
    filters: NodeRef,
    bias: NodeRef,
) -> Result<NodeRef> {
    g.conv1d_maxpool(seq, filters, bias, valid_len)
}

/// Bidirectional LSTM over the non-PAD prefix of one embedded sequence:
/// the final forward state and final backward state, concatenated.
/// An all-PAD sequence is an error at this level; serving defines the
/// empty-input convention separately.
pub fn encode_bilstm(
    g: &mut Graph,
    seq: NodeRef,
    valid_len: usize,
    weights: &BilstmWeights,
    hidden: usize,
) -> Result<NodeRef> {
    if valid_len == 0 {
        return Err(Error::EmptySequence("encode_bilstm: all-PAD sequence"));
    }
    let steps: Vec<NodeRef> = (0..valid_len)
        .map(|t| g.select_rows(seq, &[t]))
        .collect::<Result<_>>()?;
    let fwd = run_direction(g, &steps, &weights.fwd, hidden, false)?;
    let bwd = run_direction(g, &steps, &weights.bwd, hidden, true)?;
    g.concat_cols(fwd, bwd)
}

pub struct DirectionWeights {
    pub w_x: NodeRef,
    pub w_h: NodeRef,
    pub bias: NodeRef,
}

pub struct BilstmWeights {
    pub fwd: DirectionWeights,
    pub bwd: DirectionWeights,
}

impl BilstmWeights {
    pub fn from_graph(gp: &GraphParams) -> Result<Self> {
        Ok(BilstmWeights {
            fwd: DirectionWeights {
                w_x: gp.node("lstm.fwd.w_x")?,
                w_h: gp.node("lstm.fwd.w_h")?,
                bias: gp.node("lstm.fwd.bias")?,
            },
            bwd: DirectionWeights {
                w_x: gp.node("lstm.bwd.w_x")?,
                w_h: gp.node("lstm.bwd.w_h")?,
                bias: gp.node("lstm.bwd.bias")?,
            },
        })
    }
}

/// Runs one direction over per-step `[b, din]` nodes and returns the final
/// hidden state `[b, k]`.
pub fn run_direction(
    g: &mut Graph,
    steps: &[NodeRef],
    w: &DirectionWeights,
    hidden: usize,
    reverse: bool,
) -> Result<NodeRef> {
    let b = g.shape(steps[0])[0];
    let mut h = g.constant(vec![0.0; b * hidden], vec![b, hidden]);
    let mut c = g.constant(vec![0.0; b * hidden], vec![b, hidden]);
    let order: Vec<usize> = if reverse {
        (0..steps.len()).rev().collect()
    } else {
        (0..steps.len()).collect()
    };
    for t in order {
        let hc = g.lstm_step(steps[t], h, c, w.w_x, w.w_h, w.bias)?;
        h = g.narrow_cols(hc, 0, hidden)?;
        c = g.narrow_cols(hc, hidden, hidden)?;
    }
    Ok(h)
}

/// Transformer encoder returning contextual vectors for `[CLS] ++ ids`,
/// shape `[len+1, hidden]`. Errors when the sequence would exceed the
/// model's position capacity.
pub fn encode_transformer_sequence(
    g: &mut Graph,
    config: &ModelConfig,
    gp: &GraphParams,
    ids: &[u32],
) -> Result<NodeRef> {
    let t = &config.transformer;
    if ids.len() + 1 > config.max_len {
        return Err(Error::InvalidInput(format!(
            "sequence of {} tokens exceeds position capacity {}",
            ids.len() + 1,
            config.max_len
        )));
    }
    let mut with_cls = Vec::with_capacity(ids.len() + 1);
    with_cls.push(CLS_ID);
    with_cls.extend_from_slice(ids);
    let table = gp.node("embedding.table")?;
    let emb = g.gather_rows(table, &with_cls, Some(PAD_ID))?;
    let positions: Vec<usize> = (0..with_cls.len()).collect();
    let pos_table = gp.node("transformer.position")?;
    let pos = g.select_rows(pos_table, &positions)?;
    let summed = g.add(emb, pos)?;
    let gamma = gp.node("transformer.emb_norm.gamma")?;
    let beta = gp.node("transformer.emb_norm.beta")?;
    let mut x = g.layer_norm(summed, gamma, beta)?;
    let mask: Vec<bool> = with_cls.iter().map(|&id| id != PAD_ID).collect();
    for i in 0..t.layers {
        let p = format!("transformer.layer{i}");
        let params = AttentionParams {
            wq: gp.node(&format!("{p}.attn.w_q"))?,
            bq: gp.node(&format!("{p}.attn.b_q"))?,
            wk: gp.node(&format!("{p}.attn.w_k"))?,
            bk: gp.node(&format!("{p}.attn.b_k"))?,
            wv: gp.node(&format!("{p}.attn.w_v"))?,
            bv: gp.node(&format!("{p}.attn.b_v"))?,
            wo: gp.node(&format!("{p}.attn.w_o"))?,
            bo: gp.node(&format!("{p}.attn.b_o"))?,
            w1: gp.node(&format!("{p}.ffn.w1"))?,
            b1: gp.node(&format!("{p}.ffn.b1"))?,
            w2: gp.node(&format!("{p}.ffn.w2"))?,
            b2: gp.node(&format!("{p}.ffn.b2"))?,
            norm1_gamma: gp.node(&format!("{p}.norm1.gamma"))?,
            norm1_beta: gp.node(&format!("{p}.norm1.beta"))?,
            norm2_gamma: gp.node(&format!("{p}.norm2.gamma"))?,
            norm2_beta: gp.node(&format!("{p}.norm2.beta"))?,
        };
        x = g.attention_block(x, &params, t.heads, &mask)?;
    }
    Ok(x)
}

/// CLS-position summary of the sequence, through the pooler dense + tanh.
pub fn encode_transformer(
    g: &mut Graph,
    config: &ModelConfig,
    gp: &GraphParams,
    ids: &[u32],
) -> Result<NodeRef> {
    let seq = encode_transformer_sequence(g, config, gp, ids)?;
    let cls = g.select_rows(seq, &[0])?;
    let w = gp.node("transformer.pooler.w")?;
    let b = gp.node("transformer.pooler.b")?;
    let lin = g.matmul(cls, w)?;
    let biased = g.add_row(lin, b)?;
    g.tanh(biased)
}

/// Wide-and-deep head: concat the query embedding with traditional
/// features, one hidden ReLU layer, then class logits.
pub fn fuse_wide_deep(
    g: &mut Graph,
    query_emb: NodeRef,
    trad: Option<NodeRef>,
    gp: &GraphParams,
) -> Result<NodeRef> {
    let fused = match trad {
        Some(t) => g.concat_cols(query_emb, t)?,
        None => query_emb,
    };
    let w1 = gp.node("fusion.w1")?;
    let b1 = gp.node("fusion.b1")?;
    let h0 = g.matmul(fused, w1)?;
    let h1 = g.add_row(h0, b1)?;
    let act = g.relu(h1)?;
    let w2 = gp.node("fusion.w2")?;
    let b2 = gp.node("fusion.b2")?;
    let out = g.matmul(act, w2)?;
    g.add_row(out, b2)
}

/// One batch of sequences for the deep encoders; `ids` hold no padding.
pub struct Batch<'a> {
    pub ids: Vec<&'a [u32]>,
    pub locales: Vec<u32>,
}

/// Builds the query embedding `[b, query_dim]` for a batch, dispatching on
/// the architecture. BiLSTM batches must be length-homogeneous (the
/// trainer buckets by length); empty sequences use each encoder's
/// degenerate path: a zero-padded window for the CNN, the zero initial
/// state for the BiLSTM, bare `[CLS]` for the transformer.
pub fn encode_deep_batch(
    g: &mut Graph,
    config: &ModelConfig,
    gp: &GraphParams,
    batch: &Batch,
) -> Result<NodeRef> {
    if batch.ids.is_empty() {
        return Err(Error::EmptySequence("encode_deep_batch"));
    }
    let locale_table = match config.multilingual {
        Multilingual::None => None,
        _ => Some(gp.node("locale.table")?),
    };
    let embed_table_needed = config.architecture != Architecture::Transformer;
    let table = if embed_table_needed {
        Some(gp.node("embedding.table")?)
    } else {
        None
    };
    let embed_mode = matches!(config.multilingual, Multilingual::Embed(_));

    let query = match config.architecture {
        Architecture::Cnn => {
            let filters = gp.node("cnn.filters")?;
            let bias = gp.node("cnn.bias")?;
            let din = config.encoder_input_dim();
            let mut parts = Vec::with_capacity(batch.ids.len());
            for (ids, &locale) in batch.ids.iter().zip(&batch.locales) {
                let seq = if ids.is_empty() {
                    g.constant(vec![0.0; din], vec![1, din])
                } else {
                    let (emb, mask) = embed_sequence(g, table.unwrap(), ids)?;
                    if embed_mode {
                        inject_locale_embed(g, emb, &mask, locale, locale_table, config.locale_count)?
                    } else {
                        emb
                    }
                };
                let len = ids.len().max(1);
                parts.push(encode_cnn(g, seq, len, filters, bias)?);
            }
            g.stack_rows(&parts)?
        }
        Architecture::Bilstm => {
            let b = batch.ids.len();
            let l = batch.ids[0].len();
            if batch.ids.iter().any(|ids| ids.len() != l) {
                return Err(Error::InvalidInput(
                    "BiLSTM batches must share one sequence length".into(),
                ));
            }
            let k = config.lstm.hidden;
            if l == 0 {
                g.constant(vec![0.0; b * 2 * k], vec![b, 2 * k])
            } else {
                let weights = BilstmWeights::from_graph(gp)?;
                let locale_rows = if embed_mode {
                    Some(g.gather_rows(locale_table.unwrap(), &batch.locales, None)?)
                } else {
                    None
                };
                let mut steps = Vec::with_capacity(l);
                for t in 0..l {
                    let ids_t: Vec<u32> = batch.ids.iter().map(|ids| ids[t]).collect();
                    let x = g.gather_rows(table.unwrap(), &ids_t, Some(PAD_ID))?;
                    let x = match locale_rows {
                        Some(rows) => g.concat_cols(x, rows)?,
                        None => x,
                    };
                    steps.push(x);
                }
                let fwd = run_direction(g, &steps, &weights.fwd, k, false)?;
                let bwd = run_direction(g, &steps, &weights.bwd, k, true)?;
                g.concat_cols(fwd, bwd)?
            }
        }
        Architecture::Transformer => {
            let mut parts = Vec::with_capacity(batch.ids.len());
            for ids in &batch.ids {
                parts.push(encode_transformer(g, config, gp, ids)?);
            }
            g.stack_rows(&parts)?
        }
        Architecture::TriletterLr | Architecture::BowLr => {
            return Err(Error::InvalidConfig(
                "linear baselines have no deep encoder".into(),
            ));
        }
    };

    if matches!(config.multilingual, Multilingual::Concat(_)) {
        inject_locale_concat(g, query, &batch.locales, locale_table, config.locale_count)
    } else {
        Ok(query)
    }
}
