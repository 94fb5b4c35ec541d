//! Subcommand definitions and dispatch.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qintent::eval::{compare_models, evaluate, measure_latency, EvalReport, LatencyReport};
use qintent::model::{Architecture, ModelBundle, ModelConfig, Multilingual};
use qintent::serving::{
    load_bundle, save_bundle, serve_lines, Edit, ServiceBundles, TypeaheadSession,
};
use qintent::text::{
    build_vocab, ingest_click_log, prefix_expand, read_click_log, split_dataset, synth_click_log,
    Dataset, GeneratorSpec, Granularity, IntentLabelSet, LocaleRegistry, Query, TypeIntentMap,
    UserContext, UserFeaturizer, Vocabulary,
};
use qintent::train::{
    pretrain_mlm, train_classifier, MaskScheme, OptimizerKind, TrainHistory, TrainHyper,
};

#[derive(Parser)]
#[command(name = "qintent", version, about = "Query intent models: data, training, evaluation, serving")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Build a vocabulary from a click log or raw text lines.
    BuildVocab(BuildVocabArgs),
    /// Generate a synthetic click log.
    SynthData(SynthDataArgs),
    /// Turn a click log into a labeled dataset.
    Ingest(IngestArgs),
    /// Split a dataset into train/dev/test.
    Split(SplitArgs),
    /// Train a classifier and write a model bundle.
    Train(TrainArgs),
    /// Pre-train a transformer on masked-token prediction.
    PretrainMlm(PretrainArgs),
    /// Score a bundle on a dataset.
    Evaluate(EvaluateArgs),
    /// Render a relative-delta table of saved evaluation reports.
    Compare(CompareArgs),
    /// Measure batch-1 prediction latency percentiles.
    BenchLatency(BenchLatencyArgs),
    /// Print per-tensor parameter counts.
    ParamCount(ParamCountArgs),
    /// One-shot prediction.
    Predict(PredictArgs),
    /// Interactive per-keystroke prediction stream.
    Typeahead(TypeaheadArgs),
    /// Serve newline-delimited JSON requests.
    Serve(ServeArgs),
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildVocab(a) => build_vocab_cmd(a),
        Command::SynthData(a) => synth_data_cmd(a),
        Command::Ingest(a) => ingest_cmd(a),
        Command::Split(a) => split_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::PretrainMlm(a) => pretrain_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::BenchLatency(a) => bench_latency_cmd(a),
        Command::ParamCount(a) => param_count_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Typeahead(a) => typeahead_cmd(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

// ── build-vocab ─────────────────────────────────────────────────────────

#[derive(Args)]
pub struct BuildVocabArgs {
    /// Click log (JSON Lines) or, with --raw, plain text lines.
    #[arg(long)]
    input: PathBuf,
    /// Treat the input as raw text lines instead of click records.
    #[arg(long)]
    raw: bool,
    #[arg(long, value_parser = parse_granularity, default_value = "char")]
    granularity: Granularity,
    /// Total size cap including the 4 reserved ids.
    #[arg(long, default_value_t = 500)]
    max_size: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_granularity(s: &str) -> std::result::Result<Granularity, String> {
    match s {
        "char" => Ok(Granularity::Char),
        "word" => Ok(Granularity::Word),
        "triletter" => Ok(Granularity::Triletter),
        other => Err(format!("unknown granularity {other:?} (char|word|triletter)")),
    }
}

fn build_vocab_cmd(a: BuildVocabArgs) -> Result<()> {
    let reader = BufReader::new(File::open(&a.input).context("open input")?);
    let vocab = if a.raw {
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        build_vocab(lines.iter(), a.granularity, a.max_size)?
    } else {
        let mut queries = Vec::new();
        for record in read_click_log(reader) {
            queries.push(record?.query);
        }
        build_vocab(queries.iter(), a.granularity, a.max_size)?
    };
    write_json(&a.out, &vocab)?;
    eprintln!("vocabulary of {} ids -> {}", vocab.size(), a.out.display());
    Ok(())
}

// ── synth-data ──────────────────────────────────────────────────────────

#[derive(Args)]
pub struct SynthDataArgs {
    /// Built-in generator preset: char, multilingual or word.
    #[arg(long, default_value = "char")]
    preset: String,
    /// Generator spec JSON overriding the preset entirely.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clicked-type flip probability.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn preset_spec(name: &str) -> Result<GeneratorSpec> {
    Ok(match name {
        "char" => GeneratorSpec::char_preset(),
        "multilingual" => GeneratorSpec::multilingual_preset(),
        "word" => GeneratorSpec::word_preset(),
        other => bail!("unknown preset {other:?} (char|multilingual|word)"),
    })
}

fn synth_data_cmd(a: SynthDataArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => serde_json::from_reader(BufReader::new(File::open(path)?))?,
        None => preset_spec(&a.preset)?,
    };
    if let Some(noise) = a.noise {
        spec.noise_rate = noise;
    }
    let mut w = BufWriter::new(File::create(&a.out)?);
    let mut n = 0usize;
    for record in synth_click_log(&spec, a.count, a.seed)? {
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n")?;
        n += 1;
    }
    w.flush()?;
    eprintln!("{n} records -> {}", a.out.display());
    Ok(())
}

// ── ingest ──────────────────────────────────────────────────────────────

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Comma-separated locale codes, in registry order.
    #[arg(long, default_value = "en")]
    locales: String,
    /// Comma-separated intent names; defaults to the standard five.
    #[arg(long)]
    labels: Option<String>,
    #[arg(long, default_value_t = 32)]
    max_len: usize,
    #[arg(long, default_value_t = 16)]
    feature_width: usize,
    /// Expand every accepted query into all its character prefixes.
    #[arg(long)]
    expand_prefixes: bool,
    #[arg(long)]
    out: PathBuf,
}

fn ingest_cmd(a: IngestArgs) -> Result<()> {
    let vocab: Vocabulary = read_json(&a.vocab)?;
    let registry = LocaleRegistry::new(a.locales.split(','))?;
    let labels = match &a.labels {
        Some(s) => IntentLabelSet::new(s.split(','))?,
        None => IntentLabelSet::default(),
    };
    let mut featurizer = UserFeaturizer::new(a.feature_width, labels.len(), 8)?;
    let reader = BufReader::new(File::open(&a.log)?);
    let (mut ds, report) = ingest_click_log(
        read_click_log(reader),
        &labels,
        &TypeIntentMap::default(),
        &vocab,
        &registry,
        &mut featurizer,
        a.max_len,
    )?;
    if a.expand_prefixes {
        ds = prefix_expand(&ds)?;
    }
    ds.write_jsonl(BufWriter::new(File::create(&a.out)?))?;
    println!("{}", serde_json::to_string(&report)?);
    eprintln!("{} examples -> {}", ds.len(), a.out.display());
    Ok(())
}

// ── split ───────────────────────────────────────────────────────────────

#[derive(Args)]
pub struct SplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Comma-separated train,dev,test ratios summing to 1.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    ratios: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes <prefix>.train.jsonl, <prefix>.dev.jsonl, <prefix>.test.jsonl.
    #[arg(long)]
    out_prefix: String,
}

fn split_cmd(a: SplitArgs) -> Result<()> {
    let ds = read_dataset(&a.dataset)?;
    let parts: Vec<f64> = a
        .ratios
        .split(',')
        .map(|p| p.trim().parse::<f64>().context("ratio"))
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        bail!("--ratios wants three comma-separated numbers");
    }
    let (train, dev, test) = split_dataset(&ds, (parts[0], parts[1], parts[2]), a.seed)?;
    for (name, part) in [("train", &train), ("dev", &dev), ("test", &test)] {
        let path = PathBuf::from(format!("{}.{name}.jsonl", a.out_prefix));
        part.write_jsonl(BufWriter::new(File::create(&path)?))?;
        eprintln!("{} examples -> {}", part.len(), path.display());
    }
    Ok(())
}

// ── train ───────────────────────────────────────────────────────────────

#[derive(Args)]
pub struct TrainArgs {
    /// Architecture preset: char-cnn, char-bilstm, char-triletter,
    /// word-cnn, word-bilstm, word-bow, libert.
    #[arg(long)]
    arch: Option<String>,
    /// Full model config JSON; overrides --arch.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Locale injection: none, embed:<dim> or concat:<dim>.
    #[arg(long)]
    multilingual: Option<String>,
    /// Warm-start from a compatible bundle (e.g. a pre-trained encoder).
    #[arg(long)]
    init_from: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch JSON Lines metrics log.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

/// Flag overrides for the training hyperparameters; unset flags fall back
/// to the config file, then to the defaults.
#[derive(Args)]
pub struct HyperArgs {
    /// Hyperparameter JSON (TrainHyper keys).
    #[arg(long)]
    hyper_config: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    patience: Option<usize>,
    /// sgd or adam
    #[arg(long)]
    optimizer: Option<String>,
}

impl HyperArgs {
    fn resolve(&self) -> Result<TrainHyper> {
        let mut hyper: TrainHyper = match &self.hyper_config {
            Some(path) => read_json(path)?,
            None => TrainHyper::default(),
        };
        if let Some(lr) = self.lr {
            hyper.learning_rate = lr;
        }
        if let Some(e) = self.epochs {
            hyper.epochs = e;
        }
        if let Some(b) = self.batch_size {
            hyper.batch_size = b;
        }
        if let Some(s) = self.seed {
            hyper.seed = s;
        }
        if let Some(p) = self.patience {
            hyper.patience = Some(p);
        }
        match self.optimizer.as_deref() {
            Some("sgd") => hyper.optimizer = OptimizerKind::Sgd,
            Some("adam") => hyper.optimizer = OptimizerKind::adam(),
            Some(other) => bail!("unknown optimizer {other:?} (sgd|adam)"),
            None => {}
        }
        Ok(hyper)
    }
}

fn arch_preset(name: &str) -> Result<ModelConfig> {
    Ok(match name {
        "char-cnn" => ModelConfig::char_cnn(),
        "char-bilstm" => ModelConfig::char_bilstm(),
        "char-triletter" => ModelConfig::char_triletter_lr(),
        "word-cnn" => ModelConfig::word_cnn(),
        "word-bilstm" => ModelConfig::word_bilstm(),
        "word-bow" => ModelConfig::word_bow_lr(),
        "libert" => ModelConfig::libert(),
        other => bail!("unknown architecture {other:?}"),
    })
}

fn parse_multilingual(s: &str) -> Result<Multilingual> {
    if s == "none" {
        return Ok(Multilingual::None);
    }
    let (mode, dim) = s
        .split_once(':')
        .context("--multilingual wants none, embed:<dim> or concat:<dim>")?;
    let dim: usize = dim.parse()?;
    Ok(match mode {
        "embed" => Multilingual::Embed(dim),
        "concat" => Multilingual::Concat(dim),
        other => bail!("unknown locale mode {other:?}"),
    })
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let vocab: Vocabulary = read_json(&a.vocab)?;
    let train = read_dataset(&a.train)?;
    let dev = read_dataset(&a.dev)?;
    let labels = IntentLabelSet::new(train.header.labels.iter().map(String::as_str))?;
    let registry = LocaleRegistry::new(train.header.locales.iter().map(String::as_str))?;

    let mut config = match (&a.config, &a.arch) {
        (Some(path), _) => read_json(path)?,
        (None, Some(name)) => arch_preset(name)?,
        (None, None) => bail!("one of --config or --arch is required"),
    };
    if let Some(m) = &a.multilingual {
        config.multilingual = parse_multilingual(m)?;
    }
    config.vocab_size = vocab.size();
    config.label_count = labels.len();
    config.trad_width = if config.architecture == Architecture::TriletterLr {
        0
    } else {
        train.header.feature_width
    };
    config.locale_count = match config.multilingual {
        Multilingual::None => 0,
        _ => registry.len(),
    };

    let hyper = a.hyper.resolve()?;
    let init = match &a.init_from {
        Some(path) => Some(load_bundle(path)?),
        None => None,
    };
    let (bundle, history) = train_classifier(
        &config,
        &vocab,
        &labels,
        Some(&registry),
        &train,
        &dev,
        init.as_ref().map(|b| &b.params),
        &hyper,
    )?;
    save_bundle(&bundle, &a.out)?;
    if let Some(path) = &a.metrics {
        write_metrics(path, &history)?;
    }
    let best = &history.epochs[history.best_epoch - 1];
    eprintln!(
        "trained {} epochs, best dev accuracy {:.4} at epoch {} -> {}",
        history.final_epoch,
        best.dev_accuracy,
        history.best_epoch,
        a.out.display()
    );
    Ok(())
}

fn write_metrics(path: &Path, history: &TrainHistory) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in &history.epochs {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

// ── pretrain-mlm ────────────────────────────────────────────────────────

#[derive(Args)]
pub struct PretrainArgs {
    /// Text corpus, one document per line; or a click log with --from-log.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    from_log: bool,
    #[arg(long)]
    vocab: PathBuf,
    /// Transformer config JSON; defaults to the compact 3x256x8 shape.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.15)]
    mask_rate: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
}

fn pretrain_cmd(a: PretrainArgs) -> Result<()> {
    let vocab: Vocabulary = read_json(&a.vocab)?;
    let mut config: ModelConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => ModelConfig::libert(),
    };
    config.vocab_size = vocab.size();
    let reader = BufReader::new(File::open(&a.corpus)?);
    let lines: Vec<String> = if a.from_log {
        read_click_log(reader)
            .map(|r| r.map(|rec| rec.query))
            .collect::<qintent::Result<_>>()?
    } else {
        reader.lines().collect::<std::io::Result<_>>()?
    };
    let mut hyper = a.hyper.resolve()?;
    if a.hyper.lr.is_none() && a.hyper.hyper_config.is_none() {
        hyper.learning_rate = 5e-4;
    }
    let scheme = MaskScheme { mask_rate: a.mask_rate, ..MaskScheme::default() };
    let (bundle, stats) = pretrain_mlm(&config, lines.iter(), &vocab, &scheme, &hyper)?;
    save_bundle(&bundle, &a.out)?;
    eprintln!(
        "pre-trained {} epochs over {} masked tokens, loss {:?} -> {}",
        stats.epoch_losses.len(),
        stats.masked_tokens,
        stats.epoch_losses,
        a.out.display()
    );
    Ok(())
}

// ── evaluate / compare ──────────────────────────────────────────────────

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Also write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let bundle = load_bundle(&a.bundle)?;
    let ds = read_dataset(&a.dataset)?;
    let report = evaluate(&bundle, &ds)?;
    println!("accuracy {:.4} over {} examples", report.accuracy, report.examples);
    for s in &report.per_class {
        println!(
            "  {:<10} precision {:.4}  recall {:.4}  f1 {:.4}  support {}",
            s.label, s.precision, s.recall, s.f1, s.support
        );
    }
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct CompareArgs {
    /// Baseline model name (must be among the reports).
    #[arg(long)]
    baseline: String,
    /// name=report.json, repeatable.
    #[arg(long = "report", required = true)]
    reports: Vec<String>,
    #[arg(long)]
    json: Option<PathBuf>,
}

fn compare_cmd(a: CompareArgs) -> Result<()> {
    let mut reports: Vec<(String, EvalReport)> = Vec::new();
    for spec in &a.reports {
        let (name, path) = spec
            .split_once('=')
            .context("--report wants name=path")?;
        reports.push((name.to_string(), read_json(Path::new(path))?));
    }
    let table = compare_models(&reports, &a.baseline)?;
    print!("{}", table.render());
    if let Some(path) = &a.json {
        write_json(path, &table)?;
    }
    Ok(())
}

// ── bench-latency / param-count ─────────────────────────────────────────

#[derive(Args)]
pub struct BenchLatencyArgs {
    /// name=bundle.qib, repeatable.
    #[arg(long = "bundle", required = true)]
    bundles: Vec<String>,
    /// Workload file with one query per line; a built-in sample otherwise.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, default_value = "en")]
    locale: String,
    #[arg(long, default_value_t = 200)]
    warmup: usize,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
}

fn bench_latency_cmd(a: BenchLatencyArgs) -> Result<()> {
    let texts: Vec<String> = match &a.queries {
        Some(path) => BufReader::new(File::open(path)?)
            .lines()
            .collect::<std::io::Result<_>>()?,
        None => ["maria gonzalez", "nursing jobs", "bluefjord inc", "chess group", "how to welding"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let mut reports: Vec<LatencyReport> = Vec::new();
    for spec in &a.bundles {
        let (name, path) = spec.split_once('=').context("--bundle wants name=path")?;
        let bundle = load_bundle(Path::new(path))?;
        let locale = match &bundle.locales {
            Some(reg) => reg.id(&a.locale)?,
            None => 0,
        };
        let queries: Vec<Query> = texts.iter().map(|t| Query::complete(t.clone(), locale)).collect();
        let user = UserContext::fresh("bench", locale, bundle.config.trad_width.max(16), bundle.config.label_count, 8)?;
        let user = UserContext {
            user_id: user.user_id,
            features: user.features[..bundle.config.trad_width].to_vec(),
        };
        let report = measure_latency(&bundle, name, &queries, &user, a.warmup, a.samples)?;
        println!("{}", report.render());
        reports.push(report);
    }
    if let Some(first) = reports.first() {
        eprintln!("machine: {}", first.machine);
    }
    Ok(())
}

#[derive(Args)]
pub struct ParamCountArgs {
    #[arg(long)]
    bundle: PathBuf,
}

fn param_count_cmd(a: ParamCountArgs) -> Result<()> {
    let bundle = load_bundle(&a.bundle)?;
    print!("{}", bundle.param_count().render());
    Ok(())
}

// ── predict / typeahead / serve ─────────────────────────────────────────

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long, default_value = "en")]
    locale: String,
    /// incomplete or complete
    #[arg(long, default_value = "complete")]
    mode: String,
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let bundle = load_bundle(&a.bundle)?;
    let locale = match &bundle.locales {
        Some(reg) => reg.id(&a.locale)?,
        None => 0,
    };
    let q = match a.mode.as_str() {
        "complete" => Query::complete(a.query.clone(), locale),
        "incomplete" => Query::incomplete(a.query.clone(), locale),
        other => bail!("unknown mode {other:?}"),
    };
    let user = UserContext::fresh("cli", locale, bundle.config.trad_width.max(16), bundle.config.label_count, 8)?;
    let user = UserContext {
        user_id: user.user_id,
        features: user.features[..bundle.config.trad_width].to_vec(),
    };
    let dist = bundle.predict(&q, &user)?;
    println!("{}", render_distribution(&bundle, &dist)?);
    Ok(())
}

fn render_distribution(
    bundle: &ModelBundle,
    dist: &qintent::IntentDistribution,
) -> Result<String> {
    let probabilities: std::collections::BTreeMap<&str, f64> = bundle
        .labels
        .names()
        .iter()
        .map(String::as_str)
        .zip(dist.probabilities.iter().copied())
        .collect();
    Ok(serde_json::to_string(&serde_json::json!({
        "probabilities": probabilities,
        "argmax": bundle.labels.name(dist.argmax),
    }))?)
}

#[derive(Args)]
pub struct TypeaheadArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, default_value = "en")]
    locale: String,
}

/// Streams one JSON distribution line per input character. Backspace
/// (0x08 or 0x7f) deletes the last character; a newline resets the buffer
/// without emitting.
fn typeahead_cmd(a: TypeaheadArgs) -> Result<()> {
    let bundle = Arc::new(load_bundle(&a.bundle)?);
    let locale = match &bundle.locales {
        Some(reg) => reg.id(&a.locale)?,
        None => 0,
    };
    let user = UserContext::fresh("typeahead", locale, bundle.config.trad_width.max(16), bundle.config.label_count, 8)?;
    let user = UserContext {
        user_id: user.user_id,
        features: user.features[..bundle.config.trad_width].to_vec(),
    };
    let mut session = TypeaheadSession::new(bundle.clone(), locale, user)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut buf = String::new();
    let mut reader = stdin.lock();
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        for c in buf.trim_end_matches('\n').chars() {
            let dist = match c {
                '\u{8}' | '\u{7f}' => session.apply(Edit::DeleteLast)?,
                _ => session.apply(Edit::Append(c))?,
            };
            writeln!(out, "{}", render_distribution(&bundle, &dist)?)?;
            out.flush()?;
        }
        session.apply(Edit::Reset)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct ServeArgs {
    /// Bundle answering mode=incomplete requests.
    #[arg(long)]
    incomplete: Option<PathBuf>,
    /// Bundle answering mode=complete requests.
    #[arg(long)]
    complete: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Listen on a Unix stream socket instead of stdin/stdout.
    #[arg(long)]
    socket: Option<PathBuf>,
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    let load = |p: &Option<PathBuf>| -> Result<Option<Arc<ModelBundle>>> {
        Ok(match p {
            Some(path) => Some(Arc::new(load_bundle(path)?)),
            None => None,
        })
    };
    let bundles = ServiceBundles::new(load(&a.incomplete)?, load(&a.complete)?)?;
    match &a.socket {
        None => {
            let stdin = std::io::stdin();
            serve_lines(stdin.lock(), std::io::stdout(), &bundles, a.workers)?;
        }
        Some(path) => {
            use std::os::unix::net::UnixListener;
            let _ = std::fs::remove_file(path);
            let listener = UnixListener::bind(path)?;
            eprintln!("listening on {}", path.display());
            std::thread::scope(|scope| {
                for conn in listener.incoming() {
                    match conn {
                        Ok(stream) => {
                            let bundles = &bundles;
                            let workers = a.workers;
                            scope.spawn(move || {
                                let reader = BufReader::new(match stream.try_clone() {
                                    Ok(s) => s,
                                    Err(_) => return,
                                });
                                let _ = serve_lines(reader, stream, bundles, workers);
                            });
                        }
                        Err(e) => {
                            eprintln!("accept failed: {e}");
                            break;
                        }
                    }
                }
            });
        }
    }
    Ok(())
}

// ── helpers ─────────────────────────────────────────────────────────────

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let mut s = String::new();
    BufReader::new(File::open(path).with_context(|| format!("open {}", path.display()))?)
        .read_to_string(&mut s)?;
    Ok(serde_json::from_str(&s).with_context(|| format!("parse {}", path.display()))?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, value)?;
    w.flush()?;
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Ok(Dataset::read_jsonl(BufReader::new(
        File::open(path).with_context(|| format!("open {}", path.display()))?,
    ))?)
}
