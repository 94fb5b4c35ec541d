//! Acceptance suite: one test per release criterion.
//!
//! Each test prints a `criterion N ... PASS` line (visible with
//! `--nocapture`) and fails loudly otherwise. Several criteria train real
//! models on synthetic click logs; the whole suite is sized for a laptop
//! CPU core.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use qintent::eval::{evaluate, measure_latency, percentile};
use qintent::model::{Architecture, ModelBundle, ModelConfig, Multilingual, Parameters};
use qintent::serving::{
    bundle_checksum, bundle_from_bytes, bundle_to_bytes, handle_line, serve_lines, Edit,
    ServiceBundles, TypeaheadSession,
};
use qintent::tensor::{grad_check, Graph, Tensor};
use qintent::text::{
    build_vocab, ingest_click_log, prefix_expand, split_dataset, synth_click_log, ClickRecord,
    Dataset, GeneratorSpec, Granularity, IntentLabelSet, LocaleRegistry, Query, TypeIntentMap,
    UserContext, UserFeaturizer, Vocabulary, PAD_ID,
};
use qintent::train::{pretrain_mlm, train_classifier, MaskScheme, OptimizerKind, TrainHyper};
use qintent::Error;

// ── shared fixtures ─────────────────────────────────────────────────────

struct Fixture {
    vocab: Vocabulary,
    labels: IntentLabelSet,
    registry: LocaleRegistry,
    train: Dataset,
    dev: Dataset,
    test: Dataset,
}

/// Synthesizes, ingests and splits one dataset. `expand` turns complete
/// queries into per-keystroke prefixes; `take` caps the example count
/// after expansion.
fn make_dataset_with_ratios(
    spec: &GeneratorSpec,
    base_records: usize,
    seed: u64,
    max_len: usize,
    vocab_cap: usize,
    locale_onehot_cap: usize,
    expand: Option<usize>,
    ratios: (f64, f64, f64),
) -> Fixture {
    let records: Vec<ClickRecord> = synth_click_log(spec, base_records, seed)
        .expect("generator")
        .collect();
    let labels = IntentLabelSet::new(spec.labels.iter().map(String::as_str)).unwrap();
    let registry = LocaleRegistry::new(spec.locales.iter().map(String::as_str)).unwrap();
    let vocab = build_vocab(
        records.iter().map(|r| r.query.as_str()),
        if expand.is_some() { Granularity::Char } else { Granularity::Word },
        vocab_cap,
    )
    .unwrap();
    let mut featurizer = UserFeaturizer::new(16, labels.len(), locale_onehot_cap).unwrap();
    let (mut ds, report) = ingest_click_log(
        records.into_iter().map(Ok),
        &labels,
        &TypeIntentMap::default(),
        &vocab,
        &registry,
        &mut featurizer,
        max_len,
    )
    .unwrap();
    assert_eq!(report.total() as usize, base_records);
    if let Some(take) = expand {
        ds = prefix_expand(&ds).unwrap();
        assert!(ds.len() >= take, "need {take} prefix examples, got {}", ds.len());
        ds.examples.truncate(take);
    }
    let (train, dev, test) = split_dataset(&ds, ratios, seed).unwrap();
    Fixture { vocab, labels, registry, train, dev, test }
}

#[allow(clippy::too_many_arguments)]
fn make_dataset(
    spec: &GeneratorSpec,
    base_records: usize,
    seed: u64,
    max_len: usize,
    vocab_cap: usize,
    locale_onehot_cap: usize,
    expand: Option<usize>,
) -> Fixture {
    make_dataset_with_ratios(
        spec,
        base_records,
        seed,
        max_len,
        vocab_cap,
        locale_onehot_cap,
        expand,
        (0.8, 0.1, 0.1),
    )
}

fn char_bilstm_small(vocab: &Vocabulary, locales: usize, mode: Multilingual) -> ModelConfig {
    let mut c = ModelConfig::char_bilstm().with_vocab_size(vocab.size());
    c.embedding_dim = 32;
    c.lstm.hidden = 64;
    c.fusion_hidden = 64;
    c.multilingual = mode;
    c.locale_count = if matches!(mode, Multilingual::None) { 0 } else { locales };
    c
}

fn char_cnn_small(vocab: &Vocabulary) -> ModelConfig {
    let mut c = ModelConfig::char_cnn().with_vocab_size(vocab.size());
    c.embedding_dim = 32;
    c.cnn.filters = 64;
    c.fusion_hidden = 64;
    c
}

fn word_config(arch: Architecture, vocab: &Vocabulary, trad: usize) -> ModelConfig {
    let mut c = match arch {
        Architecture::Cnn => ModelConfig::word_cnn(),
        Architecture::Bilstm => ModelConfig::word_bilstm(),
        Architecture::BowLr => ModelConfig::word_bow_lr(),
        Architecture::Transformer => mini_transformer(),
        _ => unreachable!(),
    };
    c.vocab_size = vocab.size();
    if c.is_deep() && arch != Architecture::Transformer {
        c.embedding_dim = 32;
        c.cnn.filters = 64;
        c.lstm.hidden = 48;
        c.fusion_hidden = 64;
    }
    c.trad_width = trad;
    c
}

fn mini_transformer() -> ModelConfig {
    let mut c = ModelConfig::libert();
    c.embedding_dim = 32;
    c.transformer.layers = 2;
    c.transformer.hidden = 32;
    c.transformer.heads = 2;
    c.max_len = 20;
    c.fusion_hidden = 64;
    c
}

fn run_training(
    fixture: &Fixture,
    config: &ModelConfig,
    hyper: &TrainHyper,
    init: Option<&Parameters>,
) -> (ModelBundle, f64) {
    let (bundle, _history) = train_classifier(
        config,
        &fixture.vocab,
        &fixture.labels,
        Some(&fixture.registry),
        &fixture.train,
        &fixture.dev,
        init,
        hyper,
    )
    .expect("training");
    let report = evaluate(&bundle, &fixture.test).expect("evaluation");
    (bundle, report.accuracy)
}

fn rnd_tensor(rng: &mut impl rand::Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect())
        .unwrap()
        .with_grad()
}

// ── criterion 1: gradient suite ─────────────────────────────────────────

#[test]
fn criterion_01_gradient_suite() {
    use qintent::rng::{stream_rng, Stream};
    let started = Instant::now();
    let tol = 1e-4;
    for seed in 0..20u64 {
        let mut rng = stream_rng(seed, Stream::GradCheck);

        // matmul chain
        let a = rnd_tensor(&mut rng, vec![3, 4], -1.0, 1.0);
        let b = rnd_tensor(&mut rng, vec![4, 2], -1.0, 1.0);
        let err = grad_check(&[a, b], |g, l| {
            let m = g.matmul(l[0], l[1])?;
            let t = g.tanh(m)?;
            g.sum(t)
        })
        .unwrap();
        assert!(err < tol, "matmul seed {seed}: {err}");

        // conv + maxpool, retrying draws whose window maxima sit too close
        // for central differences to stay on one side of the argmax.
        let (seq, filters, bias) = loop {
            let seq = rnd_tensor(&mut rng, vec![5, 3], -1.0, 1.0);
            let filters = rnd_tensor(&mut rng, vec![2, 3, 3], -1.0, 1.0);
            let bias = rnd_tensor(&mut rng, vec![2], -0.5, 0.5);
            if conv_window_margin(&seq, &filters, &bias) > 1e-3 {
                break (seq, filters, bias);
            }
        };
        let err = grad_check(&[seq, filters, bias], |g, l| {
            let c = g.conv1d_maxpool(l[0], l[1], l[2], 5)?;
            let t = g.tanh(c)?;
            g.sum(t)
        })
        .unwrap();
        assert!(err < tol, "conv seed {seed}: {err}");

        // lstm step through both outputs
        let (e, k, bsz) = (3usize, 2usize, 2usize);
        let inputs = vec![
            rnd_tensor(&mut rng, vec![bsz, e], -1.0, 1.0),
            rnd_tensor(&mut rng, vec![bsz, k], -1.0, 1.0),
            rnd_tensor(&mut rng, vec![bsz, k], -1.0, 1.0),
            rnd_tensor(&mut rng, vec![e, 4 * k], -0.7, 0.7),
            rnd_tensor(&mut rng, vec![k, 4 * k], -0.7, 0.7),
            rnd_tensor(&mut rng, vec![4 * k], -0.5, 0.5),
        ];
        let err = grad_check(&inputs, |g, l| {
            let hc = g.lstm_step(l[0], l[1], l[2], l[3], l[4], l[5])?;
            let t = g.tanh(hc)?;
            g.sum(t)
        })
        .unwrap();
        assert!(err < tol, "lstm seed {seed}: {err}");

        // full attention block: x, projections, FFN, norms
        let d = 4usize;
        let mut rng2 = stream_rng(seed ^ 0xa77, Stream::GradCheck);
        let x = rnd_tensor(&mut rng2, vec![3, d], -0.8, 0.8);
        let mk = |r: &mut rand_chacha::ChaCha12Rng, s: Vec<usize>| rnd_tensor(r, s, -0.6, 0.6);
        let params = vec![
            x,
            mk(&mut rng2, vec![d, d]),
            mk(&mut rng2, vec![d]),
            mk(&mut rng2, vec![d, d]),
            mk(&mut rng2, vec![d]),
            mk(&mut rng2, vec![d, d]),
            mk(&mut rng2, vec![d]),
            mk(&mut rng2, vec![d, d]),
            mk(&mut rng2, vec![d]),
            mk(&mut rng2, vec![d, 4 * d]),
            mk(&mut rng2, vec![4 * d]),
            mk(&mut rng2, vec![4 * d, d]),
            mk(&mut rng2, vec![d]),
            rnd_tensor(&mut rng2, vec![d], 0.5, 1.5),
            mk(&mut rng2, vec![d]),
            rnd_tensor(&mut rng2, vec![d], 0.5, 1.5),
            mk(&mut rng2, vec![d]),
        ];
        let err = grad_check(&params, |g, l| {
            let p = qintent::tensor::AttentionParams {
                wq: l[1], bq: l[2], wk: l[3], bk: l[4], wv: l[5], bv: l[6], wo: l[7], bo: l[8],
                w1: l[9], b1: l[10], w2: l[11], b2: l[12],
                norm1_gamma: l[13], norm1_beta: l[14], norm2_gamma: l[15], norm2_beta: l[16],
            };
            let out = g.attention_block(l[0], &p, 2, &[true, true, true])?;
            let t = g.tanh(out)?;
            g.sum(t)
        })
        .unwrap();
        assert!(err < tol, "attention seed {seed}: {err}");

        // softmax + cross-entropy loss
        let logits = rnd_tensor(&mut rng, vec![5], -2.0, 2.0);
        let err = grad_check(&[logits], |g, l| {
            let (_probs, loss) = g.softmax_xent(l[0], 2)?;
            Ok(loss)
        })
        .unwrap();
        assert!(err < tol, "xent seed {seed}: {err}");

        // softmax probabilities as a differentiable output
        let logits = rnd_tensor(&mut rng, vec![4], -2.0, 2.0);
        let weights = Tensor::new(vec![4], vec![0.3, -0.7, 1.1, 0.2]).unwrap();
        let err = grad_check(&[logits, weights], |g, l| {
            let p = g.softmax_vec(l[0])?;
            let w = g.mul(p, l[1])?;
            g.sum(w)
        })
        .unwrap();
        assert!(err < tol, "softmax seed {seed}: {err}");

        // embedding gather with a frozen PAD row
        let table = rnd_tensor(&mut rng, vec![6, 3], -1.0, 1.0);
        let err = grad_check(&[table], |g, l| {
            let rows = g.gather_rows(l[0], &[1, 4, 4, 0], Some(0))?;
            let t = g.tanh(rows)?;
            g.sum(t)
        })
        .unwrap();
        assert!(err < tol, "gather seed {seed}: {err}");

        // layer norm
        let x = rnd_tensor(&mut rng, vec![2, 5], -1.0, 1.0);
        let gamma = rnd_tensor(&mut rng, vec![5], 0.5, 1.5);
        let beta = rnd_tensor(&mut rng, vec![5], -0.5, 0.5);
        let err = grad_check(&[x, gamma, beta], |g, l| {
            let n = g.layer_norm(l[0], l[1], l[2])?;
            let t = g.tanh(n)?;
            g.sum(t)
        })
        .unwrap();
        assert!(err < tol, "layer_norm seed {seed}: {err}");

        // gelu and relu away from the kink
        let x = {
            let mut v = rnd_tensor(&mut rng, vec![6], 0.1, 1.0);
            for (i, val) in v.values_mut().iter_mut().enumerate() {
                if i % 2 == 0 {
                    *val = -*val;
                }
            }
            v
        };
        let err = grad_check(&[x.clone()], |g, l| {
            let a = g.gelu(l[0])?;
            g.sum(a)
        })
        .unwrap();
        assert!(err < tol, "gelu seed {seed}: {err}");
        let err = grad_check(&[x], |g, l| {
            let a = g.relu(l[0])?;
            let t = g.tanh(a)?;
            g.sum(t)
        })
        .unwrap();
        assert!(err < tol, "relu seed {seed}: {err}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 120, "gradient suite took {elapsed:?}");
    println!("criterion 1 gradient suite: PASS in {elapsed:?} (20 seeds, tol 1e-4)");
}

/// Smallest gap between the best and second-best window activation over
/// all filters, used to reject finite-difference-unsafe conv draws.
fn conv_window_margin(seq: &Tensor, filters: &Tensor, bias: &Tensor) -> f64 {
    let (l, d) = (seq.shape()[0], seq.shape()[1]);
    let (f, h) = (filters.shape()[0], filters.shape()[1]);
    let mut margin = f64::INFINITY;
    for j in 0..f {
        let mut sums = Vec::new();
        for w in 0..=(l.saturating_sub(h)) {
            let mut acc = bias.values()[j];
            for i in 0..h {
                for c in 0..d {
                    acc += seq.values()[(w + i) * d + c] * filters.values()[j * h * d + i * d + c];
                }
            }
            sums.push(acc);
        }
        sums.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if sums.len() > 1 {
            margin = margin.min(sums[0] - sums[1]);
        }
    }
    margin
}

// ── criterion 2: oracle equivalence ─────────────────────────────────────

#[test]
fn criterion_02_oracle_equivalence() {
    use qintent::rng::{stream_rng, Stream};
    use rand::Rng;
    let tol = 1e-10;
    let mut rng = stream_rng(2024, Stream::Sample);

    for case in 0..100 {
        // matmul vs naive triple loop
        let (m, k, n) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..6));
        let av: Vec<f64> = (0..m * k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let bv: Vec<f64> = (0..k * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut expect = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    expect[i * n + j] += av[i * k + p] * bv[p * n + j];
                }
            }
        }
        let mut g = Graph::new();
        let a = g.constant(av, vec![m, k]);
        let b = g.constant(bv, vec![k, n]);
        let c = g.matmul(a, b).unwrap();
        assert_close(g.value(c), &expect, tol, &format!("matmul case {case}"));

        // conv1d_maxpool vs naive window loop with zero padding
        let (l, h, d, f) = (
            rng.gen_range(1..7usize),
            rng.gen_range(1..5usize),
            rng.gen_range(1..4usize),
            rng.gen_range(1..4usize),
        );
        let seqv: Vec<f64> = (0..l * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fv: Vec<f64> = (0..f * h * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let biasv: Vec<f64> = (0..f).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let windows = if l >= h { l - h + 1 } else { 1 };
        let mut expect = vec![f64::NEG_INFINITY; f];
        for w in 0..windows {
            for j in 0..f {
                let mut acc = biasv[j];
                for i in 0..h {
                    if w + i >= l {
                        continue;
                    }
                    for cx in 0..d {
                        acc += seqv[(w + i) * d + cx] * fv[j * h * d + i * d + cx];
                    }
                }
                expect[j] = expect[j].max(acc);
            }
        }
        let mut g = Graph::new();
        let seq = g.constant(seqv, vec![l, d]);
        let filters = g.constant(fv, vec![f, h, d]);
        let bias = g.constant(biasv, vec![f]);
        let out = g.conv1d_maxpool(seq, filters, bias, l).unwrap();
        assert_close(g.value(out), &expect, tol, &format!("conv case {case}"));

        // unrolled lstm vs scalar step oracle
        let (e, k, steps) = (rng.gen_range(1..4usize), rng.gen_range(1..4usize), rng.gen_range(1..5usize));
        let xs: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..e).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let wx: Vec<f64> = (0..e * 4 * k).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let wh: Vec<f64> = (0..k * 4 * k).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let bv: Vec<f64> = (0..4 * k).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (mut oh, mut oc) = (vec![0.0; k], vec![0.0; k]);
        for x in &xs {
            let (nh, nc) = lstm_oracle(x, &oh, &oc, &wx, &wh, &bv, k);
            oh = nh;
            oc = nc;
        }
        let mut g = Graph::new();
        let wxn = g.constant(wx, vec![e, 4 * k]);
        let whn = g.constant(wh, vec![k, 4 * k]);
        let bn = g.constant(bv, vec![4 * k]);
        let mut h = g.constant(vec![0.0; k], vec![1, k]);
        let mut c = g.constant(vec![0.0; k], vec![1, k]);
        for x in &xs {
            let xn = g.constant(x.clone(), vec![1, e]);
            let hc = g.lstm_step(xn, h, c, wxn, whn, bn).unwrap();
            h = g.narrow_cols(hc, 0, k).unwrap();
            c = g.narrow_cols(hc, k, k).unwrap();
        }
        assert_close(g.value(h), &oh, tol, &format!("lstm-h case {case}"));
        assert_close(g.value(c), &oc, tol, &format!("lstm-c case {case}"));

        // softmax + xent vs naive exp-normalize
        let nclasses = rng.gen_range(2..6);
        let logits: Vec<f64> = (0..nclasses).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let label = rng.gen_range(0..nclasses);
        let exps: Vec<f64> = logits.iter().map(|v| v.exp()).collect();
        let denom: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|e| e / denom).collect();
        let mut g = Graph::new();
        let ln = g.constant(logits, vec![nclasses]);
        let (pn, lossn) = g.softmax_xent(ln, label).unwrap();
        assert_close(g.value(pn), &probs, tol, &format!("softmax case {case}"));
        let expect_loss = -probs[label].ln();
        assert!(
            (g.value(lossn)[0] - expect_loss).abs() < tol,
            "xent case {case}"
        );

        // F1 vs independent formula on random predictions
        let classes = rng.gen_range(2..5u32);
        let count = rng.gen_range(1..50usize);
        let preds: Vec<u32> = (0..count).map(|_| rng.gen_range(0..classes)).collect();
        let truths: Vec<u32> = (0..count).map(|_| rng.gen_range(0..classes)).collect();
        let names: Vec<String> = (0..classes).map(|i| format!("c{i}")).collect();
        let report =
            qintent::eval::EvalReport::from_predictions(&preds, &truths, &names).unwrap();
        for cls in 0..classes {
            let tp = preds
                .iter()
                .zip(&truths)
                .filter(|(p, t)| **p == cls && **t == cls)
                .count() as f64;
            let fp = preds
                .iter()
                .zip(&truths)
                .filter(|(p, t)| **p == cls && **t != cls)
                .count() as f64;
            let fnn = preds
                .iter()
                .zip(&truths)
                .filter(|(p, t)| **p != cls && **t == cls)
                .count() as f64;
            let prec = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
            let rec = if tp + fnn == 0.0 { 0.0 } else { tp / (tp + fnn) };
            let f1 = if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
            let got = report.f1(&format!("c{cls}")).unwrap();
            assert!((got - f1).abs() <= tol, "f1 case {case} class {cls}: {got} vs {f1}");
        }

        // percentile vs naive index
        let sn = rng.gen_range(1..300usize);
        let mut samples: Vec<u64> = (0..sn).map(|_| rng.gen_range(0..100_000u64)).collect();
        samples.sort_unstable();
        for &p in &[0.5, 0.9, 0.99] {
            let naive = samples[((p * sn as f64).ceil() as usize).max(1) - 1];
            assert_eq!(percentile(&samples, p), naive, "percentile case {case}");
        }
    }
    println!("criterion 2 oracle equivalence: PASS (100 cases per op at 1e-10)");
}

fn lstm_oracle(
    x: &[f64],
    h: &[f64],
    c: &[f64],
    wx: &[f64],
    wh: &[f64],
    b: &[f64],
    k: usize,
) -> (Vec<f64>, Vec<f64>) {
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let mut nh = vec![0.0; k];
    let mut nc = vec![0.0; k];
    for j in 0..k {
        let mut z = [0.0; 4];
        for (gate, zj) in z.iter_mut().enumerate() {
            let col = gate * k + j;
            let mut acc = b[col];
            for (p, xv) in x.iter().enumerate() {
                acc += xv * wx[p * 4 * k + col];
            }
            for (p, hv) in h.iter().enumerate() {
                acc += hv * wh[p * 4 * k + col];
            }
            *zj = acc;
        }
        let (i, f, gg, o) = (sig(z[0]), sig(z[1]), z[2].tanh(), sig(z[3]));
        nc[j] = f * c[j] + i * gg;
        nh[j] = o * nc[j].tanh();
    }
    (nh, nc)
}

fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length");
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{what}: {x} vs {y}");
    }
}

// ── criterion 3: parameter-count audit ──────────────────────────────────

#[test]
fn criterion_03_parameter_count_audit() {
    let sum_named = |config: &ModelConfig, prefixes: &[&str]| -> usize {
        config
            .manifest()
            .iter()
            .filter(|(n, _)| prefixes.iter().any(|p| n.starts_with(p)))
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    };
    let total = |config: &ModelConfig| -> usize {
        config.manifest().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    };

    let cnn = ModelConfig::char_cnn();
    let cnn_core = sum_named(&cnn, &["embedding", "cnn"]);
    assert_eq!(cnn_core, 113_280, "char CNN core");

    let lstm = ModelConfig::char_bilstm();
    let lstm_core = sum_named(&lstm, &["embedding", "lstm"]);
    assert_eq!(lstm_core, 327_168, "char BiLSTM core");

    let cnn_total = total(&cnn);
    let lstm_total = total(&lstm);
    let cnn_gap = (cnn_total as f64 - 123_000.0).abs() / 123_000.0;
    let lstm_gap = (lstm_total as f64 - 379_000.0).abs() / 379_000.0;
    assert!(cnn_gap < 0.15, "char CNN total {cnn_total} vs 123k ({cnn_gap:.3})");
    assert!(lstm_gap < 0.15, "char BiLSTM total {lstm_total} vs 379k ({lstm_gap:.3})");

    let trf_total = total(&ModelConfig::libert());
    assert!(
        (9_000_000..=11_000_000).contains(&trf_total),
        "compact transformer with 25k vocab: {trf_total}"
    );
    println!(
        "criterion 3 parameter audit: PASS (cores 113280/327168 exact; totals {cnn_total}/{lstm_total}; transformer {trf_total})"
    );
}

// ── criterion 4: incomplete-query end-to-end ────────────────────────────

#[test]
fn criterion_04_incomplete_query_end_to_end() {
    let started = Instant::now();
    let mut spec = GeneratorSpec::char_preset();
    spec.noise_rate = 0.05;
    assert_eq!(spec.labels.len(), 5);

    let mut all = Vec::new();
    for seed in [1u64, 2, 3] {
        let fixture = make_dataset(&spec, 16_000, seed, 32, 500, 1, Some(200_000));
        assert_eq!(
            fixture.train.len() + fixture.dev.len() + fixture.test.len(),
            200_000
        );

        let lr_hyper = TrainHyper {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.5,
            epochs: 3,
            batch_size: 64,
            seed,
            clip_norm: None,
            patience: None,
        };
        let mut lr_config = ModelConfig::char_triletter_lr().with_vocab_size(fixture.vocab.size());
        lr_config.trad_width = 0;
        let (_b, lr_acc) = run_training(&fixture, &lr_config, &lr_hyper, None);

        let deep_hyper = TrainHyper {
            learning_rate: 2e-3,
            epochs: 1,
            batch_size: 64,
            seed,
            patience: None,
            ..TrainHyper::default()
        };
        let (_b, cnn_acc) = run_training(&fixture, &char_cnn_small(&fixture.vocab), &deep_hyper, None);
        let (_b, lstm_acc) = run_training(
            &fixture,
            &char_bilstm_small(&fixture.vocab, 1, Multilingual::None),
            &deep_hyper,
            None,
        );

        println!(
            "criterion 4 seed {seed}: triletter {lr_acc:.4} <= cnn {cnn_acc:.4} <= bilstm {lstm_acc:.4}"
        );
        assert!(lstm_acc >= 0.90, "seed {seed}: BiLSTM accuracy {lstm_acc:.4} < 0.90");
        assert!(lr_acc <= cnn_acc, "seed {seed}: tri-letter {lr_acc:.4} > CNN {cnn_acc:.4}");
        assert!(cnn_acc <= lstm_acc, "seed {seed}: CNN {cnn_acc:.4} > BiLSTM {lstm_acc:.4}");
        all.push((lr_acc, cnn_acc, lstm_acc));
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 900, "criterion 4 took {elapsed:?}, budget 15 min");
    println!("criterion 4 incomplete end-to-end: PASS in {elapsed:?} {all:?}");
}

// ── criterion 5: multilingual direction ─────────────────────────────────

#[test]
fn criterion_05_multilingual_direction() {
    let mut spec = GeneratorSpec::multilingual_preset();
    spec.noise_rate = 0.05;
    let tie = 0.002; // 0.2 accuracy points

    // The embed-vs-concat margin in the source experiments is a fraction
    // of a point, so that comparison runs on the 3-seed mean over a large
    // test split; the directional gains over the locale-agnostic model
    // are big enough to assert per seed.
    let mut embed_mean = 0.0;
    let mut concat_mean = 0.0;
    for seed in [1u64, 2, 3] {
        // Locale one-hot capped at a single shared slot so the wide
        // features cannot leak the locale; only the injection strategies
        // under test carry it.
        let fixture = make_dataset_with_ratios(
            &spec,
            9_000,
            seed,
            32,
            10_000,
            1,
            Some(90_000),
            (0.6, 0.1, 0.3),
        );
        let hyper = TrainHyper {
            learning_rate: 2e-3,
            epochs: 2,
            batch_size: 64,
            seed,
            patience: None,
            ..TrainHyper::default()
        };
        let locales = fixture.registry.len();
        let (_b, none_acc) = run_training(
            &fixture,
            &char_bilstm_small(&fixture.vocab, locales, Multilingual::None),
            &hyper,
            None,
        );
        let (_b, embed_acc) = run_training(
            &fixture,
            &char_bilstm_small(&fixture.vocab, locales, Multilingual::Embed(8)),
            &hyper,
            None,
        );
        let (_b, concat_acc) = run_training(
            &fixture,
            &char_bilstm_small(&fixture.vocab, locales, Multilingual::Concat(8)),
            &hyper,
            None,
        );
        println!(
            "criterion 5 seed {seed}: none {none_acc:.4}, embed {embed_acc:.4}, concat {concat_acc:.4}"
        );
        assert!(
            embed_acc >= none_acc - tie,
            "seed {seed}: embed {embed_acc:.4} below locale-agnostic {none_acc:.4}"
        );
        assert!(
            concat_acc >= none_acc - tie,
            "seed {seed}: concat {concat_acc:.4} below locale-agnostic {none_acc:.4}"
        );
        embed_mean += embed_acc / 3.0;
        concat_mean += concat_acc / 3.0;
    }
    assert!(
        embed_mean >= concat_mean - tie,
        "mean embed {embed_mean:.4} below mean concat {concat_mean:.4}"
    );
    println!(
        "criterion 5 multilingual direction: PASS (mean embed {embed_mean:.4} vs concat {concat_mean:.4})"
    );
}

// ── criterion 6: complete-query direction ───────────────────────────────

#[test]
fn criterion_06_complete_query_direction() {
    let mut spec = GeneratorSpec::word_preset();
    spec.noise_rate = 0.05;
    // Moderate user bias: behavioral features stay decisive for the
    // user-bound tokens (where text is silent) without becoming a
    // shortcut that outpredicts the text on ordinary queries.
    spec.user_bias = 0.45;

    // Shared pre-training: a corpus of at least 1e5 tokens from the same
    // query distribution, 5 epochs, loss must drop below 0.7x the first
    // epoch's mean.
    let corpus: Vec<String> = synth_click_log(&spec, 55_000, 900)
        .unwrap()
        .map(|r| r.query)
        .collect();
    let token_count: usize = corpus
        .iter()
        .map(|q| q.split_whitespace().count())
        .sum();
    assert!(token_count >= 100_000, "corpus has only {token_count} tokens");
    let pretrain_vocab =
        build_vocab(corpus.iter(), Granularity::Word, 100_000).unwrap();
    let mlm_hyper = TrainHyper {
        learning_rate: 5e-4,
        epochs: 5,
        batch_size: 16,
        seed: 0,
        patience: None,
        ..TrainHyper::default()
    };
    let (pretrained, stats) = pretrain_mlm(
        &mini_transformer().with_vocab_size(pretrain_vocab.size()),
        corpus.iter(),
        &pretrain_vocab,
        &MaskScheme::default(),
        &mlm_hyper,
    )
    .unwrap();
    let init = stats.init_loss;
    let last = *stats.epoch_losses.last().unwrap();
    assert!(
        last < 0.7 * init,
        "masked-LM loss {last:.4} did not drop below 0.7x initial {init:.4}"
    );
    println!(
        "criterion 6 pre-training: {token_count} tokens, init loss {:.4}, losses {:?}",
        stats.init_loss, stats.epoch_losses
    );

    let mut means = (0.0f64, 0.0f64);
    for seed in [1u64, 2, 3] {
        let mut fixture =
            make_dataset_with_ratios(&spec, 16_000, seed, 16, 100_000, 8, None, (0.6, 0.1, 0.3));
        // The transformer experiments reuse the pre-training vocabulary so
        // warm-started embeddings line up.
        let hyper = TrainHyper {
            learning_rate: 2e-3,
            epochs: 5,
            batch_size: 64,
            seed,
            patience: None,
            ..TrainHyper::default()
        };
        let lr_hyper = TrainHyper {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.5,
            epochs: 6,
            batch_size: 64,
            seed,
            clip_norm: None,
            patience: None,
        };

        let (_b, bow_acc) = run_training(
            &fixture,
            &word_config(Architecture::BowLr, &fixture.vocab, 16),
            &lr_hyper,
            None,
        );
        let (_b, cnn_acc) = run_training(
            &fixture,
            &word_config(Architecture::Cnn, &fixture.vocab, 16),
            &hyper,
            None,
        );
        let (_b, lstm_acc) = run_training(
            &fixture,
            &word_config(Architecture::Bilstm, &fixture.vocab, 16),
            &hyper,
            None,
        );
        assert!(cnn_acc > bow_acc, "seed {seed}: CNN {cnn_acc:.4} <= LR-BOW {bow_acc:.4}");
        assert!(lstm_acc > bow_acc, "seed {seed}: BiLSTM {lstm_acc:.4} <= LR-BOW {bow_acc:.4}");

        // Traditional-feature ablation direction for every deep model.
        // The small transformer converges slower than the convolutional
        // and recurrent encoders and gets a longer schedule.
        let trf_hyper = TrainHyper { epochs: 10, ..hyper.clone() };
        let no_trad = fixture.clone_without_features();
        for (name, arch_hyper, config_with, config_without) in [
            (
                "cnn",
                &hyper,
                word_config(Architecture::Cnn, &fixture.vocab, 16),
                word_config(Architecture::Cnn, &fixture.vocab, 0),
            ),
            (
                "bilstm",
                &hyper,
                word_config(Architecture::Bilstm, &fixture.vocab, 16),
                word_config(Architecture::Bilstm, &fixture.vocab, 0),
            ),
            (
                "transformer",
                &trf_hyper,
                word_config(Architecture::Transformer, &fixture.vocab, 16),
                word_config(Architecture::Transformer, &fixture.vocab, 0),
            ),
        ] {
            let (_b, with_acc) = run_training(&fixture, &config_with, arch_hyper, None);
            let (_b, without_acc) = run_training(&no_trad, &config_without, arch_hyper, None);
            println!(
                "criterion 6 seed {seed} {name}: with trad {with_acc:.4}, without {without_acc:.4}"
            );
            assert!(
                with_acc > without_acc,
                "seed {seed}: {name} did not lose accuracy without traditional features"
            );
        }

        // Pre-training benefit on a 500-example labeled subset.
        reencode(&mut fixture, &pretrain_vocab);
        let small = Dataset {
            header: fixture.train.header.clone(),
            examples: fixture.train.examples[..500].to_vec(),
        };
        let small_fixture = Fixture {
            vocab: fixture.vocab.clone(),
            labels: fixture.labels.clone(),
            registry: fixture.registry.clone(),
            train: small,
            dev: fixture.dev.clone(),
            test: fixture.test.clone(),
        };
        let ft_hyper = TrainHyper {
            learning_rate: 1e-3,
            epochs: 8,
            batch_size: 32,
            seed,
            patience: None,
            ..TrainHyper::default()
        };
        let trf_config = word_config(Architecture::Transformer, &pretrain_vocab, 16);
        let (_b, warm_acc) =
            run_training(&small_fixture, &trf_config, &ft_hyper, Some(&pretrained.params));
        let (_b, cold_acc) = run_training(&small_fixture, &trf_config, &ft_hyper, None);
        println!(
            "criterion 6 seed {seed} 500-example transformer: pretrained {warm_acc:.4} vs random {cold_acc:.4}"
        );
        assert!(
            warm_acc >= cold_acc,
            "seed {seed}: pre-trained transformer below random init"
        );
        means.0 += warm_acc;
        means.1 += cold_acc;
        println!(
            "criterion 6 seed {seed}: bow {bow_acc:.4}, cnn {cnn_acc:.4}, bilstm {lstm_acc:.4}"
        );
    }
    assert!(
        means.0 > means.1,
        "pre-training produced no mean improvement: {means:?}"
    );
    println!("criterion 6 complete-query direction: PASS");
}

impl Fixture {
    /// Copy with all traditional features removed (for ablations).
    fn clone_without_features(&self) -> Fixture {
        let strip = |ds: &Dataset| {
            let mut out = ds.clone();
            out.header.feature_width = 0;
            for e in out.examples.iter_mut() {
                e.features.clear();
            }
            out
        };
        Fixture {
            vocab: self.vocab.clone(),
            labels: self.labels.clone(),
            registry: self.registry.clone(),
            train: strip(&self.train),
            dev: strip(&self.dev),
            test: strip(&self.test),
        }
    }
}

/// Re-encodes a word fixture against another vocabulary by mapping token
/// ids through their surface forms.
fn reencode(fixture: &mut Fixture, new_vocab: &Vocabulary) {
    let old_vocab = fixture.vocab.clone();
    for ds in [&mut fixture.train, &mut fixture.dev, &mut fixture.test] {
        ds.header.vocab_hash = new_vocab.content_hash();
        for e in ds.examples.iter_mut() {
            let mut ids: Vec<u32> = e.ids[..e.valid_len()]
                .iter()
                .map(|&id| new_vocab.id(old_vocab.token(id).unwrap_or("<unk>")))
                .collect();
            ids.resize(e.ids.len(), PAD_ID);
            e.ids = ids;
        }
    }
    fixture.vocab = new_vocab.clone();
}

// ── criterion 7: latency ordering ───────────────────────────────────────

#[test]
fn criterion_07_latency_ordering() {
    // Default complete-query configurations over a realistic word
    // vocabulary; weights are untrained because latency is shape-bound.
    let spec = GeneratorSpec::word_preset();
    let corpus: Vec<String> = synth_click_log(&spec, 4_000, 77)
        .unwrap()
        .map(|r| r.query)
        .collect();
    let vocab = build_vocab(corpus.iter(), Granularity::Word, 100_000).unwrap();
    let labels = IntentLabelSet::default();
    let user = UserContext::fresh("bench", 0, 16, labels.len(), 8).unwrap();
    let queries: Vec<Query> = corpus[..64].iter().map(|q| Query::complete(q.clone(), 0)).collect();

    let mut reports = BTreeMap::new();
    for (name, config) in [
        ("cnn-word", ModelConfig::word_cnn().with_vocab_size(vocab.size())),
        ("bilstm-word", ModelConfig::word_bilstm().with_vocab_size(vocab.size())),
        ("transformer", {
            let mut c = ModelConfig::libert().with_vocab_size(vocab.size());
            c.fusion_hidden = 200;
            c
        }),
    ] {
        let bundle = ModelBundle::new(config, vocab.clone(), labels.clone(), None, 7).unwrap();
        let report = measure_latency(&bundle, name, &queries, &user, 200, 10_000).unwrap();
        assert!(report.is_monotone());
        println!("criterion 7 {}", report.render());
        reports.insert(name, report);
    }
    let cnn = reports["cnn-word"].p99_us;
    let lstm = reports["bilstm-word"].p99_us;
    let trf = reports["transformer"].p99_us;
    assert!(cnn < lstm, "CNN p99 {cnn}us not below BiLSTM p99 {lstm}us");
    assert!(lstm < trf, "BiLSTM p99 {lstm}us not below transformer p99 {trf}us");
    println!(
        "criterion 7 latency ordering: PASS (p99 cnn {cnn}us < bilstm {lstm}us < transformer {trf}us; absolute values reported, not asserted)"
    );
}

// ── criterion 8: serialization and serving ──────────────────────────────

#[test]
fn criterion_08_serialization_and_serving() {
    use qintent::rng::{stream_rng, Stream};
    use rand::Rng;

    // Round trip: bit-identical predictions on 100 random queries.
    let spec = GeneratorSpec::char_preset();
    let corpus: Vec<String> = synth_click_log(&spec, 2_000, 5)
        .unwrap()
        .map(|r| r.query)
        .collect();
    let vocab = build_vocab(corpus.iter(), Granularity::Char, 500).unwrap();
    let mut config = ModelConfig::char_cnn().with_vocab_size(vocab.size());
    config.embedding_dim = 32;
    config.cnn.filters = 64;
    config.fusion_hidden = 64;
    let bundle = ModelBundle::new(config, vocab, IntentLabelSet::default(), None, 3).unwrap();
    let bytes = bundle_to_bytes(&bundle).unwrap();
    let loaded = bundle_from_bytes(&bytes).unwrap();
    let user = UserContext::fresh("u", 0, 16, 5, 8).unwrap();
    let mut rng = stream_rng(8, Stream::Sample);
    for _ in 0..100 {
        let q = &corpus[rng.gen_range(0..corpus.len())];
        let cut = rng.gen_range(1..=q.chars().count());
        let prefix: String = q.chars().take(cut).collect();
        let query = Query::incomplete(prefix, 0);
        assert_eq!(
            bundle.predict(&query, &user).unwrap(),
            loaded.predict(&query, &user).unwrap()
        );
    }

    // Corruption and version gates.
    let mut corrupt = bytes.clone();
    let mid = corrupt.len() / 2;
    corrupt[mid] ^= 1;
    assert!(matches!(bundle_from_bytes(&corrupt), Err(Error::ChecksumMismatch { .. })));
    let mut future = bytes.clone();
    future[8..12].copy_from_slice(&9u32.to_le_bytes());
    assert!(matches!(bundle_from_bytes(&future), Err(Error::UnsupportedVersion { .. })));

    // The 500-character default model serializes under 5 MB. A synthetic
    // corpus with several hundred distinct characters fills the table.
    let wide_corpus: Vec<String> = (0..3000u32)
        .filter_map(char::from_u32)
        .filter(|c| c.is_alphanumeric())
        .map(String::from)
        .collect();
    let wide_vocab = build_vocab(wide_corpus.iter().cycle().take(9000), Granularity::Char, 500).unwrap();
    assert_eq!(wide_vocab.size(), 500, "synthetic corpus should fill the 500-char vocabulary");
    let default_bundle = ModelBundle::new(
        ModelConfig::char_bilstm(),
        wide_vocab,
        IntentLabelSet::default(),
        None,
        1,
    )
    .unwrap();
    let size = bundle_to_bytes(&default_bundle).unwrap().len();
    assert!(size < 5 * 1024 * 1024, "500-char bundle is {size} bytes");

    // Service: survives malformed input, and 1000-way concurrency returns
    // answers identical to the sequential run.
    let service = ServiceBundles::new(Some(Arc::new(bundle)), None).unwrap();
    let request = |i: usize| {
        format!("{{\"id\":{i},\"mode\":\"incomplete\",\"query\":\"maria gon\",\"locale\":\"en\"}}")
    };
    let sequential: serde_json::Value =
        serde_json::from_str(&handle_line(&request(0), &service)).unwrap();
    let garbage = handle_line("{{{", &service);
    assert!(garbage.contains("bad_request"));

    let mut input = String::new();
    for i in 0..1000 {
        if i == 500 {
            input.push_str("not json at all\n");
        }
        input.push_str(&request(i));
        input.push('\n');
    }
    let mut out = Vec::new();
    serve_lines(std::io::Cursor::new(input), &mut out, &service, 16).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut ok = 0;
    let mut errs = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if v.get("error").is_some() {
            errs += 1;
        } else {
            assert_eq!(v["probabilities"], sequential["probabilities"]);
            assert_eq!(v["argmax"], sequential["argmax"]);
            ok += 1;
        }
    }
    assert_eq!((ok, errs), (1000, 1));
    println!(
        "criterion 8 serialization and serving: PASS (bundle {size} bytes; 1000 concurrent answers identical)"
    );
}

// ── criterion 9: typeahead statelessness ────────────────────────────────

#[test]
fn criterion_09_typeahead_statelessness() {
    let spec = GeneratorSpec::char_preset();
    let queries: Vec<String> = synth_click_log(&spec, 1_000, 21)
        .unwrap()
        .map(|r| r.query)
        .collect();
    let vocab = build_vocab(queries.iter(), Granularity::Char, 500).unwrap();
    let mut config = ModelConfig::char_cnn().with_vocab_size(vocab.size());
    config.embedding_dim = 16;
    config.cnn.filters = 32;
    config.fusion_hidden = 32;
    let bundle =
        Arc::new(ModelBundle::new(config, vocab, IntentLabelSet::default(), None, 9).unwrap());
    let user = UserContext::fresh("u", 0, 16, 5, 8).unwrap();

    let mut checked = 0usize;
    for q in &queries {
        let mut session = TypeaheadSession::new(bundle.clone(), 0, user.clone()).unwrap();
        let mut prefix = String::new();
        for c in q.chars() {
            prefix.push(c);
            let streamed = session.apply(Edit::Append(c)).unwrap();
            let oneshot = bundle
                .predict(&Query::incomplete(prefix.clone(), 0), &user)
                .unwrap();
            assert_eq!(streamed, oneshot, "query {q:?} prefix {prefix:?}");
            checked += 1;
        }
    }
    println!("criterion 9 typeahead statelessness: PASS ({checked} prefixes bit-identical)");
}

// ── criterion 10: training determinism ──────────────────────────────────

#[test]
fn criterion_10_training_determinism() {
    let mut spec = GeneratorSpec::char_preset();
    spec.noise_rate = 0.05;
    let fixture = make_dataset(&spec, 600, 4, 32, 500, 1, Some(6_000));

    let hyper = TrainHyper {
        epochs: 2,
        batch_size: 64,
        seed: 31,
        patience: None,
        ..TrainHyper::default()
    };
    let mut config = ModelConfig::char_cnn().with_vocab_size(fixture.vocab.size());
    config.embedding_dim = 16;
    config.cnn.filters = 32;
    config.fusion_hidden = 32;

    let run = |hyper: &TrainHyper| {
        train_classifier(
            &config,
            &fixture.vocab,
            &fixture.labels,
            Some(&fixture.registry),
            &fixture.train,
            &fixture.dev,
            None,
            hyper,
        )
        .unwrap()
    };
    let (b1, h1) = run(&hyper);
    let (b2, h2) = run(&hyper);
    assert_eq!(bundle_checksum(&b1).unwrap(), bundle_checksum(&b2).unwrap());
    assert!(h1.same_trajectory(&h2), "histories diverged: {h1:?} vs {h2:?}");

    let (b3, h3) = run(&TrainHyper { seed: 32, ..hyper.clone() });
    assert_ne!(
        bundle_checksum(&b1).unwrap(),
        bundle_checksum(&b3).unwrap(),
        "different seeds should not collide"
    );
    assert!(!h1.same_trajectory(&h3));

    // Linear path and pre-training determinism.
    let mut lr_config = ModelConfig::char_triletter_lr().with_vocab_size(fixture.vocab.size());
    lr_config.trad_width = 0;
    lr_config.triletter_buckets = 1 << 14;
    let lr_hyper = TrainHyper {
        optimizer: OptimizerKind::Sgd,
        learning_rate: 0.5,
        epochs: 2,
        batch_size: 64,
        seed: 5,
        clip_norm: None,
        patience: None,
    };
    let run_lr = || {
        train_classifier(
            &lr_config,
            &fixture.vocab,
            &fixture.labels,
            Some(&fixture.registry),
            &fixture.train,
            &fixture.dev,
            None,
            &lr_hyper,
        )
        .unwrap()
    };
    let (l1, lh1) = run_lr();
    let (l2, lh2) = run_lr();
    assert_eq!(bundle_checksum(&l1).unwrap(), bundle_checksum(&l2).unwrap());
    assert!(lh1.same_trajectory(&lh2));

    let corpus: Vec<String> = synth_click_log(&GeneratorSpec::word_preset(), 500, 17)
        .unwrap()
        .map(|r| r.query)
        .collect();
    let vocab = build_vocab(corpus.iter(), Granularity::Word, 10_000).unwrap();
    let mlm_hyper = TrainHyper {
        learning_rate: 5e-4,
        epochs: 1,
        batch_size: 16,
        seed: 3,
        patience: None,
        ..TrainHyper::default()
    };
    let trf = mini_transformer().with_vocab_size(vocab.size());
    let (p1, s1) =
        pretrain_mlm(&trf, corpus.iter(), &vocab, &MaskScheme::default(), &mlm_hyper).unwrap();
    let (p2, s2) =
        pretrain_mlm(&trf, corpus.iter(), &vocab, &MaskScheme::default(), &mlm_hyper).unwrap();
    assert_eq!(bundle_checksum(&p1).unwrap(), bundle_checksum(&p2).unwrap());
    assert_eq!(s1.epoch_losses, s2.epoch_losses);

    println!("criterion 10 training determinism: PASS");
}
