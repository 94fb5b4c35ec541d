//! Synthetic click-log generation.
//!
//! Stands in for production click-through logs: every record is drawn from
//! intent-indicative templates ("<first> <last>" clicks a profile,
//! "<skill> jobs" clicks a job posting, ...) with a configurable class
//! mixture, locale mixture, user pool and label noise. On top of the plain
//! templates a spec may carry *slices*: engineered sub-distributions whose
//! label is carried by word order, by a cross-word combination, by the
//! locale, or by the user's own habits rather than by any single token.
//! Streams are deterministic functions of `(spec, seed)`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

use super::click::ClickRecord;

/// One piece of a query template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Part {
    Lit(String),
    /// Filled from the named pool; `"name@fr"` is tried before `"name"`
    /// so presets can localize surface forms.
    Slot(String),
}

pub fn lit(s: &str) -> Part {
    Part::Lit(s.to_string())
}

pub fn slot(s: &str) -> Part {
    Part::Slot(s.to_string())
}

/// An engineered sub-distribution mixed into the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    /// Share of the whole stream this slice occupies.
    pub rate: f64,
    pub kind: SliceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SliceKind {
    /// "x y" carries one intent, "y x" the other. Pairs share their first
    /// two and last two characters, so bags of letter trigrams (and
    /// position-free pooling) cannot tell the orders apart.
    OrderPair {
        intent_ab: String,
        intent_ba: String,
        pairs: Vec<(String, String)>,
    },
    /// Two-word queries "a b" where the label is the parity of the chosen
    /// variants: matching picks one intent, crossed picks the other. Every
    /// individual token appears in both classes equally, so no linear
    /// evidence sum can separate them.
    XorPair {
        intent_same: String,
        intent_cross: String,
        /// Variant pairs for the first word, index-matched with `pairs_b`.
        pairs_a: Vec<(String, String)>,
        pairs_b: Vec<(String, String)>,
    },
    /// Token pool whose intent depends on the interface locale.
    LocaleBound {
        pool: Vec<String>,
        per_locale_intent: BTreeMap<String, String>,
        /// Probability the locale rule fires; otherwise uniform label.
        strength: f64,
    },
    /// Ambiguous single tokens resolved only by the user's own dominant
    /// intent (their behavioral features carry the signal).
    UserBound { pool: Vec<String>, intents: Vec<String> },
}

/// Full generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub labels: Vec<String>,
    /// Class mixture for plain template records.
    pub mixture: Vec<f64>,
    pub locales: Vec<String>,
    pub locale_mixture: Vec<f64>,
    /// Probability the clicked type is flipped to another intent's type.
    pub noise_rate: f64,
    pub user_pool: usize,
    /// Probability a plain record follows its user's dominant intent
    /// instead of an independent mixture draw.
    pub user_bias: f64,
    pub pools: BTreeMap<String, Vec<String>>,
    pub templates: BTreeMap<String, Vec<Vec<Part>>>,
    pub slices: Vec<Slice>,
    /// Intent name to clicked document type.
    pub clicked_types: BTreeMap<String, String>,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::InvalidConfig("generator needs at least one label".into()));
        }
        if self.mixture.len() != self.labels.len() {
            return Err(Error::InvalidConfig("mixture length != label count".into()));
        }
        if (self.mixture.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("class mixture must sum to 1".into()));
        }
        if self.locales.is_empty() || self.locale_mixture.len() != self.locales.len() {
            return Err(Error::InvalidConfig("locale mixture length != locale count".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::InvalidConfig("noise rate must be in [0,1]".into()));
        }
        if self.user_pool == 0 {
            return Err(Error::InvalidConfig("user pool must be non-empty".into()));
        }
        let slice_total: f64 = self.slices.iter().map(|s| s.rate).sum();
        if !(0.0..1.0).contains(&slice_total) {
            return Err(Error::InvalidConfig("slice rates must sum below 1".into()));
        }
        for (i, label) in self.labels.iter().enumerate() {
            if self.mixture[i] > 0.0
                && self.templates.get(label).map_or(true, |t| t.is_empty())
            {
                return Err(Error::InvalidConfig(format!(
                    "intent {label} has positive mixture but no templates"
                )));
            }
            if !self.clicked_types.contains_key(label) {
                return Err(Error::InvalidConfig(format!(
                    "intent {label} has no clicked document type"
                )));
            }
        }
        Ok(())
    }

    fn label_id(&self, name: &str) -> usize {
        self.labels.iter().position(|l| l == name).unwrap_or(0)
    }
}

/// Deterministic click-record stream for `(spec, seed)`.
pub struct ClickLogStream {
    spec: GeneratorSpec,
    rng: ChaCha12Rng,
    /// Dominant intent per user, fixed for the whole stream.
    dominant: Vec<usize>,
    produced: usize,
    n: usize,
}

/// Builds the stream; see [`GeneratorSpec`] for what it emits.
pub fn synth_click_log(spec: &GeneratorSpec, n: usize, seed: u64) -> Result<ClickLogStream> {
    spec.validate()?;
    let mut setup = stream_rng(seed, Stream::Init);
    let dominant = (0..spec.user_pool)
        .map(|_| sample_weighted(&mut setup, &spec.mixture))
        .collect();
    Ok(ClickLogStream {
        spec: spec.clone(),
        rng: stream_rng(seed, Stream::DataGen),
        dominant,
        produced: 0,
        n,
    })
}

impl Iterator for ClickLogStream {
    type Item = ClickRecord;

    fn next(&mut self) -> Option<ClickRecord> {
        if self.produced >= self.n {
            return None;
        }
        let spec = &self.spec;
        let rng = &mut self.rng;

        let locale_idx = sample_weighted(rng, &spec.locale_mixture);
        let locale = spec.locales[locale_idx].clone();
        let user = rng.gen_range(0..spec.user_pool);

        let slice_total: f64 = spec.slices.iter().map(|s| s.rate).sum();
        let (text, intent_id) = if rng.gen_range(0.0..1.0) < slice_total {
            // Pick a slice proportionally to its rate.
            let mut target = rng.gen_range(0.0..slice_total);
            let mut chosen = &spec.slices[0];
            for s in &spec.slices {
                if target < s.rate {
                    chosen = s;
                    break;
                }
                target -= s.rate;
            }
            emit_slice(spec, chosen, &locale, self.dominant[user], rng)
        } else {
            let intent = if rng.gen_range(0.0..1.0) < spec.user_bias {
                self.dominant[user]
            } else {
                sample_weighted(rng, &spec.mixture)
            };
            let label = &spec.labels[intent];
            let templates = &spec.templates[label];
            let tpl = &templates[rng.gen_range(0..templates.len())];
            (fill_template(spec, tpl, &locale, rng), intent)
        };

        let mut clicked_intent = intent_id;
        if spec.noise_rate > 0.0 && rng.gen_range(0.0..1.0) < spec.noise_rate {
            let shift = rng.gen_range(1..spec.labels.len());
            clicked_intent = (intent_id + shift) % spec.labels.len();
        }
        let clicked_type = spec.clicked_types[&spec.labels[clicked_intent]].clone();

        let record = ClickRecord {
            query: text,
            locale,
            user_id: format!("u{user:05}"),
            clicked_type,
            ts: 1_700_000_000 + self.produced as i64,
        };
        self.produced += 1;
        Some(record)
    }
}

fn emit_slice(
    spec: &GeneratorSpec,
    slice: &Slice,
    locale: &str,
    dominant: usize,
    rng: &mut ChaCha12Rng,
) -> (String, usize) {
    match &slice.kind {
        SliceKind::OrderPair { intent_ab, intent_ba, pairs } => {
            let (a, b) = &pairs[rng.gen_range(0..pairs.len())];
            if rng.gen_range(0.0..1.0) < 0.5 {
                (format!("{a} {b}"), spec.label_id(intent_ab))
            } else {
                (format!("{b} {a}"), spec.label_id(intent_ba))
            }
        }
        SliceKind::XorPair { intent_same, intent_cross, pairs_a, pairs_b } => {
            let q = rng.gen_range(0..pairs_a.len().min(pairs_b.len()));
            let x = rng.gen_range(0..2usize);
            let y = rng.gen_range(0..2usize);
            let a = if x == 0 { &pairs_a[q].0 } else { &pairs_a[q].1 };
            let b = if y == 0 { &pairs_b[q].0 } else { &pairs_b[q].1 };
            let intent = if x == y { intent_same } else { intent_cross };
            (format!("{a} {b}"), spec.label_id(intent))
        }
        SliceKind::LocaleBound { pool, per_locale_intent, strength } => {
            let token = pool[rng.gen_range(0..pool.len())].clone();
            let intent = if rng.gen_range(0.0..1.0) < *strength {
                per_locale_intent
                    .get(locale)
                    .map(|i| spec.label_id(i))
                    .unwrap_or_else(|| rng.gen_range(0..spec.labels.len()))
            } else {
                rng.gen_range(0..spec.labels.len())
            };
            (token, intent)
        }
        SliceKind::UserBound { pool, intents } => {
            let token = pool[rng.gen_range(0..pool.len())].clone();
            let dom_name = &spec.labels[dominant];
            let intent = if intents.iter().any(|i| i == dom_name) {
                dominant
            } else {
                spec.label_id(&intents[dominant % intents.len()])
            };
            (token, intent)
        }
    }
}

fn fill_template(
    spec: &GeneratorSpec,
    tpl: &[Part],
    locale: &str,
    rng: &mut ChaCha12Rng,
) -> String {
    let mut words: Vec<String> = Vec::with_capacity(tpl.len());
    for part in tpl {
        match part {
            Part::Lit(s) => words.push(s.clone()),
            Part::Slot(name) => {
                let localized = format!("{name}@{locale}");
                let pool = spec
                    .pools
                    .get(&localized)
                    .or_else(|| spec.pools.get(name))
                    .unwrap_or_else(|| panic!("unknown pool {name:?}"));
                words.push(pool[rng.gen_range(0..pool.len())].clone());
            }
        }
    }
    words.join(" ")
}

fn sample_weighted(rng: &mut ChaCha12Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.gen_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return i;
        }
        target -= w;
    }
    weights.len() - 1
}

fn pool(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn default_clicked_types() -> BTreeMap<String, String> {
    [
        ("PEOPLE", "profile_page"),
        ("JOB", "job_posting"),
        ("COMPANY", "company_page"),
        ("GROUP", "group_page"),
        ("CONTENT", "content_article"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

const LABELS: [&str; 5] = ["PEOPLE", "JOB", "COMPANY", "GROUP", "CONTENT"];

impl GeneratorSpec {
    /// English character-level preset for typeahead experiments.
    ///
    /// First letters are mostly class-indicative so that very short
    /// prefixes stay predictable; two slices carry order and cross-word
    /// structure that a bag of trigrams cannot express.
    pub fn char_preset() -> GeneratorSpec {
        let mut pools = BTreeMap::new();
        pools.insert(
            "first".to_string(),
            pool(&[
                "anita", "amara", "alma", "aron", "elena", "emil", "elias", "erik", "maria",
                "marcus", "mira", "mateo", "marta", "james", "jonas", "julia", "janne", "lucas",
                "laila", "lena", "liv", "leo",
            ]),
        );
        pools.insert(
            "last".to_string(),
            pool(&[
                "gonzalez", "smith", "okafor", "lindqvist", "tanaka", "muller", "rossi", "dubois",
                "ivanov", "kim", "patel", "costa", "nilsson", "weber", "moreau", "silva", "novak",
                "berg", "adeyemi", "fischer",
            ]),
        );
        pools.insert(
            "skill".to_string(),
            pool(&[
                "nursing", "networking", "negotiation", "roofing", "recruiting", "research",
                "welding", "warehousing", "wiring", "plumbing", "painting", "packaging",
                "teaching", "translation", "testing",
            ]),
        );
        pools.insert(
            "company".to_string(),
            pool(&[
                "bluefjord", "brightcore", "bytefield", "kromatek", "krokusbank", "kernelworks",
                "vertexware", "vantagon", "voltaray", "zephyrsoft", "zincline", "zenitech",
            ]),
        );
        pools.insert(
            "grouptopic".to_string(),
            pool(&[
                "chess", "cycling", "calligraphy", "climbing", "gardening", "genealogy",
                "geocaching", "fishing", "foraging", "filmmaking",
            ]),
        );
        pools.insert(
            "contenttopic".to_string(),
            pool(&[
                "sourdough", "sketching", "soldering", "drones", "databases", "origami",
                "orienteering", "oceanography",
            ]),
        );

        let mut templates = BTreeMap::new();
        templates.insert(
            "PEOPLE".to_string(),
            vec![vec![slot("first"), slot("last")]],
        );
        templates.insert(
            "JOB".to_string(),
            vec![
                vec![slot("skill"), lit("jobs")],
                vec![slot("skill"), lit("openings")],
                vec![lit("trainee"), slot("skill"), lit("jobs")],
            ],
        );
        templates.insert(
            "COMPANY".to_string(),
            vec![
                vec![slot("company")],
                vec![slot("company"), lit("inc")],
                vec![slot("company"), lit("technologies")],
            ],
        );
        templates.insert(
            "GROUP".to_string(),
            vec![
                vec![slot("grouptopic"), lit("group")],
                vec![slot("grouptopic"), lit("network")],
            ],
        );
        templates.insert(
            "CONTENT".to_string(),
            vec![
                vec![lit("how"), lit("to"), slot("skill")],
                vec![slot("contenttopic"), lit("tutorial")],
                vec![slot("contenttopic"), lit("articles")],
            ],
        );

        let slices = vec![
            Slice {
                rate: 0.06,
                kind: SliceKind::OrderPair {
                    intent_ab: "PEOPLE".into(),
                    intent_ba: "GROUP".into(),
                    pairs: vec![
                        ("alina".into(), "alena".into()),
                        ("marcus".into(), "marius".into()),
                        ("jorin".into(), "jomin".into()),
                        ("elvin".into(), "eldin".into()),
                    ],
                },
            },
            Slice {
                rate: 0.08,
                kind: SliceKind::XorPair {
                    intent_same: "COMPANY".into(),
                    intent_cross: "JOB".into(),
                    pairs_a: vec![
                        ("venta".into(), "vorda".into()),
                        ("kanti".into(), "kolda".into()),
                        ("balti".into(), "borna".into()),
                    ],
                    pairs_b: vec![
                        ("metals".into(), "motors".into()),
                        ("krafts".into(), "kormus".into()),
                        ("brands".into(), "brinks".into()),
                    ],
                },
            },
        ];

        GeneratorSpec {
            labels: LABELS.iter().map(|s| s.to_string()).collect(),
            mixture: vec![0.2; 5],
            locales: vec!["en".into()],
            locale_mixture: vec![1.0],
            noise_rate: 0.0,
            user_pool: 400,
            user_bias: 0.6,
            pools,
            templates,
            slices,
            clicked_types: default_clicked_types(),
        }
    }

    /// Three-locale character-level preset. A quarter of the stream is a
    /// token pool whose intent is carried by the interface locale alone.
    pub fn multilingual_preset() -> GeneratorSpec {
        let mut spec = GeneratorSpec::char_preset();
        spec.locales = vec!["en".into(), "fr".into(), "de".into()];
        spec.locale_mixture = vec![0.4, 0.3, 0.3];
        spec.pools.insert(
            "first@fr".to_string(),
            pool(&[
                "amélie", "aurélien", "élodie", "éloïse", "maëlle", "mathéo", "jérôme",
                "joséphine", "léa", "lucie",
            ]),
        );
        spec.pools.insert(
            "last@fr".to_string(),
            pool(&["lefèvre", "müller", "garnier", "chevalier", "bernard", "renard", "bonnet"]),
        );
        spec.pools.insert(
            "first@de".to_string(),
            pool(&[
                "jürgen", "jörg", "änne", "matthias", "lieselotte", "egon", "mariele", "anneliese",
            ]),
        );
        spec.pools.insert(
            "last@de".to_string(),
            pool(&["müller", "schröder", "könig", "größler", "bauer", "jäger", "hofmann"]),
        );
        spec.pools.insert(
            "skill@fr".to_string(),
            pool(&["pâtisserie", "plomberie", "traduction", "rédaction", "tôlerie", "peinture"]),
        );
        spec.pools.insert(
            "skill@de".to_string(),
            pool(&["pflege", "täfelung", "tischlerei", "werkzeugbau", "näherei", "rohrbau"]),
        );
        let mut per_locale = BTreeMap::new();
        per_locale.insert("en".to_string(), "PEOPLE".to_string());
        per_locale.insert("fr".to_string(), "COMPANY".to_string());
        per_locale.insert("de".to_string(), "JOB".to_string());
        spec.slices = vec![Slice {
            rate: 0.25,
            kind: SliceKind::LocaleBound {
                pool: pool(&[
                    "tandera", "melvik", "sorana", "quilla", "brenta", "volos", "kirme", "talva",
                    "dorne", "vesper", "almet", "rontu",
                ]),
                per_locale_intent: per_locale,
                strength: 0.9,
            },
        }];
        spec
    }

    /// Word-level preset for complete-query experiments. Large name pools
    /// leave most tokens rare, a 10% order slice defeats bag-of-words
    /// features, and a 10% user slice is resolvable only through the
    /// searcher's behavioral features.
    pub fn word_preset() -> GeneratorSpec {
        let mut pools = BTreeMap::new();
        let onsets = [
            "al", "be", "ca", "da", "el", "fa", "ga", "ha", "is", "jo", "ka", "le", "mi", "no",
            "pa", "ra", "sa", "ta", "ve", "wi",
        ];
        let first_tails = ["ron", "mina", "los", "dra", "vik", "sha", "nor", "bel", "tor", "lin"];
        let last_tails = ["berg", "ster", "wall", "holm", "field", "gard", "mark", "stone", "wick", "dale"];
        let firsts: Vec<String> = onsets
            .iter()
            .flat_map(|o| first_tails.iter().map(move |t| format!("{o}{t}")))
            .collect();
        let lasts: Vec<String> = onsets
            .iter()
            .flat_map(|o| last_tails.iter().map(move |t| format!("{o}{t}")))
            .collect();
        pools.insert("first".to_string(), firsts);
        pools.insert("last".to_string(), lasts);
        pools.insert(
            "skill".to_string(),
            pool(&[
                "nursing", "marketing", "logistics", "accounting", "welding", "plumbing",
                "design", "teaching", "recruiting", "analytics", "security", "catering",
                "roofing", "carpentry", "editing", "consulting", "forestry", "surveying",
                "bartending", "translation", "masonry", "tutoring", "auditing", "brewing",
                "farming", "landscaping", "modeling", "publishing", "retail", "sales",
            ]),
        );
        let comp_heads = [
            "vertex", "nova", "quantum", "silver", "iron", "lumen", "copper", "dyna", "omni",
            "peak", "cobalt", "green", "maple", "arc", "zephyr",
        ];
        let comp_tails = ["ware", "tech", "works", "corp", "labs", "soft", "core", "forge", "grid", "sys"];
        let companies: Vec<String> = comp_heads
            .iter()
            .flat_map(|h| comp_tails.iter().map(move |t| format!("{h}{t}")))
            .collect();
        pools.insert("company".to_string(), companies);
        pools.insert(
            "topic".to_string(),
            pool(&[
                "photography", "hiking", "chess", "robotics", "gardening", "cycling", "pottery",
                "astronomy", "baking", "calligraphy", "kayaking", "birdwatching", "origami",
                "genealogy", "meteorology", "quilting", "woodworking", "beekeeping", "archery",
                "caving",
            ]),
        );

        let mut templates = BTreeMap::new();
        templates.insert("PEOPLE".to_string(), vec![vec![slot("first"), slot("last")]]);
        templates.insert(
            "JOB".to_string(),
            vec![
                vec![slot("skill"), lit("jobs")],
                vec![slot("skill"), lit("openings")],
                vec![lit("junior"), slot("skill"), lit("jobs")],
            ],
        );
        templates.insert(
            "COMPANY".to_string(),
            vec![vec![slot("company")], vec![slot("company"), lit("inc")]],
        );
        templates.insert(
            "GROUP".to_string(),
            vec![
                vec![slot("topic"), lit("group")],
                vec![slot("topic"), lit("community")],
            ],
        );
        templates.insert(
            "CONTENT".to_string(),
            vec![
                vec![lit("how"), lit("to"), slot("skill")],
                vec![slot("topic"), lit("tutorial")],
                vec![slot("topic"), lit("tips")],
            ],
        );

        let slices = vec![
            Slice {
                rate: 0.10,
                kind: SliceKind::OrderPair {
                    intent_ab: "JOB".into(),
                    intent_ba: "CONTENT".into(),
                    pairs: vec![
                        ("staffing".into(), "manual".into()),
                        ("apprentice".into(), "guide".into()),
                        ("contractor".into(), "handbook".into()),
                        ("internship".into(), "review".into()),
                        ("vacancy".into(), "digest".into()),
                    ],
                },
            },
            Slice {
                rate: 0.10,
                kind: SliceKind::UserBound {
                    pool: pool(&[
                        "tesora", "jordanis", "novara", "kestrel", "amberg", "soltis", "ravena",
                        "brixton", "calloway", "meridian", "orion", "sterling",
                    ]),
                    intents: vec!["PEOPLE".into(), "COMPANY".into()],
                },
            },
        ];

        GeneratorSpec {
            labels: LABELS.iter().map(|s| s.to_string()).collect(),
            mixture: vec![0.2; 5],
            locales: vec!["en".into()],
            locale_mixture: vec![1.0],
            noise_rate: 0.0,
            user_pool: 500,
            user_bias: 0.75,
            pools,
            templates,
            slices,
            clicked_types: default_clicked_types(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_clicked_types_match_templates() {
        let mut spec = GeneratorSpec::char_preset();
        spec.noise_rate = 0.0;
        spec.slices.clear();
        let records: Vec<ClickRecord> = synth_click_log(&spec, 1000, 7).unwrap().collect();
        assert_eq!(records.len(), 1000);
        let types: std::collections::BTreeSet<&str> =
            records.iter().map(|r| r.clicked_type.as_str()).collect();
        for t in types {
            assert!(spec.clicked_types.values().any(|v| v == t), "unknown type {t}");
        }
        // With zero noise a job-template query must carry the job type.
        for r in &records {
            if r.query.ends_with(" jobs") || r.query.ends_with(" openings") {
                assert_eq!(r.clicked_type, "job_posting", "query {:?}", r.query);
            }
        }
    }

    #[test]
    fn identical_spec_and_seed_are_byte_identical() {
        let spec = GeneratorSpec::word_preset();
        let a: Vec<String> = synth_click_log(&spec, 200, 9)
            .unwrap()
            .map(|r| serde_json::to_string(&r).unwrap())
            .collect();
        let b: Vec<String> = synth_click_log(&spec, 200, 9)
            .unwrap()
            .map(|r| serde_json::to_string(&r).unwrap())
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn two_class_mixture_within_one_percent() {
        let mut spec = GeneratorSpec::char_preset();
        spec.slices.clear();
        spec.user_bias = 0.0;
        spec.mixture = vec![0.0, 0.5, 0.0, 0.0, 0.5];
        let n = 100_000;
        let jobs = synth_click_log(&spec, n, 3)
            .unwrap()
            .filter(|r| r.clicked_type == "job_posting")
            .count();
        let share = jobs as f64 / n as f64;
        assert!((share - 0.5).abs() < 0.01, "JOB share {share}");
    }

    #[test]
    fn empty_template_set_is_rejected() {
        let mut spec = GeneratorSpec::char_preset();
        spec.templates.remove("JOB");
        assert!(synth_click_log(&spec, 10, 1).is_err());
    }

    #[test]
    fn noise_flips_to_a_different_type() {
        let mut spec = GeneratorSpec::char_preset();
        spec.slices.clear();
        spec.noise_rate = 1.0;
        for r in synth_click_log(&spec, 500, 11).unwrap() {
            if r.query.ends_with(" jobs") || r.query.ends_with(" openings") {
                assert_ne!(r.clicked_type, "job_posting");
            }
        }
    }

    #[test]
    fn presets_validate() {
        GeneratorSpec::char_preset().validate().unwrap();
        GeneratorSpec::multilingual_preset().validate().unwrap();
        GeneratorSpec::word_preset().validate().unwrap();
    }

    #[test]
    fn order_pairs_share_boundary_trigram_bags() {
        // The anti-bag-of-trigrams property the order slice relies on:
        // both orders of a pair produce identical trigram multisets.
        use super::super::vocab::triletters;
        let spec = GeneratorSpec::char_preset();
        for s in &spec.slices {
            if let SliceKind::OrderPair { pairs, .. } = &s.kind {
                for (a, b) in pairs {
                    let mut ab = triletters(&format!("{a} {b}"));
                    let mut ba = triletters(&format!("{b} {a}"));
                    ab.sort();
                    ba.sort();
                    assert_eq!(ab, ba, "pair ({a}, {b})");
                }
            }
        }
    }
}
