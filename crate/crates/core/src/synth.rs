//! Synthetic timestamped news corpora with planted relation instances and
//! oracle labels.
//!
//! Each planted instance gets an establishment day. Its true mentions per day
//! are Poisson with intensity `peak * leak` before that day, `peak` on it and
//! `peak * decay^d` `d` days after. Every true mention independently picks
//! connector `k` with probability `p_k`, or with the leftover mass a paraphrase
//! no rule matches, so pattern choice never depends on the date. Distractor
//! sentences put the same pair in a non-expressing template on uniformly random
//! days until they make up the configured fraction of the pair's sentences.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use chrono::{Duration, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::align::{LabelMap, MentionKey, Polarity, WeightedMention};
use crate::corpus::{document_to_record, CasePolicy, Document, Gazetteer, SentenceRef, TypeSet};
use crate::error::{Error, Result};
use crate::knowledge::RelationInstance;
use crate::popularity::{oracle_inspo, OracleSeries, TimeGrid, WindowSpec};
use crate::rules::RelationSet;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq)]
pub struct RelationSpec {
    pub name: String,
    pub head_type: String,
    pub tail_type: String,
    pub directed: bool,
    /// Connectors written to the rules file; true mentions read `head connector tail`.
    pub connectors: Vec<String>,
    /// Expressing templates with `{h}` and `{t}` that no rule matches.
    pub paraphrases: Vec<String>,
    /// Topical templates with `{a}` and `{b}` that do not express the relation.
    pub distractors: Vec<String>,
}

impl RelationSpec {
    fn new(
        name: &str,
        head: &str,
        tail: &str,
        directed: bool,
        connectors: &[&str],
        paraphrases: &[&str],
        distractors: &[&str],
    ) -> Self {
        RelationSpec {
            name: name.into(),
            head_type: head.into(),
            tail_type: tail.into(),
            directed,
            connectors: connectors.iter().map(|s| s.to_string()).collect(),
            paraphrases: paraphrases.iter().map(|s| s.to_string()).collect(),
            distractors: distractors.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// The five news relations with five connectors, three paraphrases and three
    /// topical distractors each.
    pub fn news_default() -> Vec<RelationSpec> {
        vec![
            RelationSpec::new(
                "Acquisition",
                "ORG",
                "ORG",
                true,
                &["has acquired", "completed the acquisition of", "agreed to buy", "announced it will acquire", "is buying"],
                &["{t} was bought by {h}", "{h} snapped up rival {t}", "{h} closed its takeover of {t}"],
                &["{a} denied rumors of a merger with {b}", "{a} and {b} ended merger talks", "{a} will give {b} an even greater foothold in the market"],
            ),
            RelationSpec::new(
                "Investing",
                "ORG",
                "ORG",
                true,
                &["invested in", "boosted its position in shares of", "raised its stake in", "bought a stake in", "poured money into"],
                &["{h} took a minority position in {t}", "{t} received fresh funding from {h}", "{h} added to its holdings of {t}"],
                &["{a} sold its remaining shares of {b}", "{a} was rumored to eye shares of {b}", "{a} ranked {b} among its top picks"],
            ),
            RelationSpec::new(
                "JobChange",
                "PER",
                "ORG",
                true,
                &["has joined", "has left", "was appointed manager of", "signed with", "was named chief executive of"],
                &["{h} took a senior post at {t}", "{t} hired {h}", "{h} moved to {t} as director"],
                &["{a} criticized the board of {b}", "{a} denied plans to move to {b}", "{a} attended a dinner hosted by {b}"],
            ),
            RelationSpec::new(
                "Lawsuit",
                "ORG",
                "ORG",
                true,
                &["sued", "filed a lawsuit against", "sues", "took legal action against", "filed a complaint against"],
                &["{t} was taken to court by {h}", "{h} brought charges against {t}", "{h} is suing {t}"],
                &["{a} settled its dispute with {b}", "{a} dropped its complaint about {b}", "{a} and {b} traded accusations in the press"],
            ),
            RelationSpec::new(
                "Partnership",
                "ORG",
                "ORG",
                false,
                &[
                    "has formed a partnership with",
                    "announced a partnership with",
                    "teamed up with",
                    "signed a partnership agreement with",
                    "entered into an alliance with",
                ],
                &["{h} and {t} agreed to cooperate", "{h} will work together with {t}", "{t} joined forces with {h}"],
                &["{a} ended its partnership with {b}", "{a} and {b} competed for the same contract", "{a} declined to cooperate with {b}"],
            ),
        ]
    }
}

/// Distractor templates shared by every relation.
const DISTRACTORS: [&str; 3] = [
    "{a} and {b} both reported quarterly earnings",
    "Analysts compared {a} with {b}",
    "Reporters asked {a} about {b}",
];

const PREFIXES: [&str; 2] = ["According to {ORG}, ", "In {LOC}, "];
const SUFFIXES: [&str; 2] = [", which is based in {LOC}", " as {ORG} looked on"];

const CLAUSES: [&str; 5] = [
    ", and {H} and {ORG} both reported quarterly earnings",
    ", while analysts compared {H} with {ORG}",
    " after reporters asked {H} about {ORG}",
    ", and {H} also met with {ORG}",
    ", while {H} denied rumors about {ORG}",
];

const FILLER: [&str; 8] = [
    "{ORG} shares rose {n} percent",
    "{ORG} shares fell {n} percent",
    "Markets in {LOC} closed higher",
    "{PER} spoke at a conference in {LOC}",
    "Trading volume was light across the sector",
    "{ORG} reported revenue of {n} million dollars",
    "Weather delays hit shipping near {LOC}",
    "{PER} gave an interview about the economy",
];

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "ven", "mar", "ti", "sel", "dra", "no", "quin", "bel", "ror", "fa", "zen", "lu", "pra", "del", "mo",
    "ris", "tan", "gor", "vi", "sha", "ber", "lin",
];
const ORG_SUFFIXES: [&str; 7] = ["Industries", "Holdings", "Labs", "Group", "Systems", "Partners", "Capital"];

/// Sentences per generated document: a title and two body sentences.
pub const SENTENCES_PER_DOC: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub start: NaiveDate,
    pub days: usize,
    pub relations: Vec<RelationSpec>,
    /// `p_k` for connector `k`, shared by every relation.
    pub pattern_probs: Vec<f64>,
    pub planted: usize,
    /// Expected true mentions on the establishment day.
    pub peak: f64,
    /// Per-instance peak multiplier is uniform in `[1 - jitter, 1 + jitter]`.
    pub peak_jitter: f64,
    pub leak: f64,
    pub decay: f64,
    /// Per-relation decay overriding `decay`.
    pub relation_decay: BTreeMap<String, f64>,
    /// Fraction of a planted pair's sentences that do not express the relation.
    pub distractor_rate: f64,
    /// Chance that a pair sentence carries an extra background entity.
    pub decoration_rate: f64,
    /// One-off pairs matched by a single rule once.
    pub rumors: usize,
    pub background_orgs: usize,
    pub background_pers: usize,
    pub background_locs: usize,
    /// Filler documents per day on top of the pair sentences.
    pub docs_per_day: usize,
}

impl SynthConfig {
    /// Distractor rate 0.3, decay 0.5, 20 planted instances, about 50k sentences.
    /// Investing decays at 0.75, so its bursts are flatter than the rest.
    pub fn standard(seed: u64) -> Self {
        let mut cfg = SynthConfig {
            seed,
            start: NaiveDate::from_ymd_opt(2016, 3, 1).expect("valid date"),
            days: 120,
            relations: RelationSpec::news_default(),
            pattern_probs: vec![0.12; 5],
            planted: 20,
            peak: 200.0,
            peak_jitter: 0.2,
            leak: 0.002,
            decay: 0.5,
            relation_decay: [("Investing".to_string(), 0.75)].into_iter().collect(),
            distractor_rate: 0.3,
            decoration_rate: 0.5,
            rumors: 10,
            background_orgs: 60,
            background_pers: 30,
            background_locs: 30,
            docs_per_day: 0,
        };
        cfg.scale_to_sentences(50_000);
        cfg
    }

    /// Expected number of pair sentences (true mentions, distractors, rumors).
    pub fn expected_pair_sentences(&self) -> f64 {
        let (lo, hi) = self.establishment_range();
        let mean_before = (lo + hi) as f64 / 2.0;
        let mean_after = self.days as f64 - 1.0 - mean_before;
        let total: f64 = (0..self.planted)
            .map(|i| {
                let decay = self.decay_for(&self.relations[i % self.relations.len()].name);
                let tail: f64 = (1..=mean_after as i32).map(|d| decay.powi(d)).sum();
                self.peak * (1.0 + tail + self.leak * mean_before)
            })
            .sum();
        total / (1.0 - self.distractor_rate) + self.rumors as f64
    }

    /// Sets `docs_per_day` so the corpus holds about `n` sentences, shrinking
    /// the planted count first when pair sentences alone would exceed `n`.
    pub fn scale_to_sentences(&mut self, n: usize) {
        let event = SENTENCES_PER_DOC as f64 * self.expected_pair_sentences();
        if event > n as f64 {
            let shrink = n as f64 / event;
            self.planted = ((self.planted as f64 * shrink).floor() as usize).max(1);
            self.docs_per_day = 0;
            return;
        }
        let filler = (n as f64 - event) / (SENTENCES_PER_DOC * self.days) as f64;
        self.docs_per_day = filler.round() as usize;
    }

    pub fn decay_for(&self, relation: &str) -> f64 {
        self.relation_decay.get(relation).copied().unwrap_or(self.decay)
    }

    fn establishment_range(&self) -> (usize, usize) {
        (self.days / 5, (self.days * 4 / 5).max(self.days / 5))
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.start, self.start + Duration::days(self.days as i64 - 1)).expect("days >= 1")
    }

    pub fn relation_set(&self) -> RelationSet {
        RelationSet::new(self.relations.iter().map(|r| (r.name.clone(), r.directed)))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::SynthConfig(msg));
        if self.planted == 0 {
            return bad("at least one planted instance is required".into());
        }
        if self.relations.is_empty() {
            return bad("no relations configured".into());
        }
        if self.days < 3 {
            return bad(format!("span of {} days is shorter than 3", self.days));
        }
        let sum: f64 = self.pattern_probs.iter().sum();
        if self.pattern_probs.iter().any(|p| !(0.0..=1.0).contains(p)) || sum > 1.0 + 1e-12 {
            return bad(format!("pattern probabilities {:?} must lie in [0, 1] and sum to at most 1", self.pattern_probs));
        }
        for r in &self.relations {
            if r.connectors.len() != self.pattern_probs.len() {
                return bad(format!(
                    "relation {} has {} connectors but {} pattern probabilities",
                    r.name,
                    r.connectors.len(),
                    self.pattern_probs.len()
                ));
            }
            if sum < 1.0 && r.paraphrases.is_empty() {
                return bad(format!("relation {} needs paraphrases for the residual mass", r.name));
            }
        }
        for (name, v) in [("leak", self.leak), ("decoration_rate", self.decoration_rate), ("peak_jitter", self.peak_jitter)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} not in [0, 1]"));
            }
        }
        let decays = self.relation_decay.values().map(|&d| ("decay", d));
        for (name, v) in [("decay", self.decay), ("distractor_rate", self.distractor_rate)].into_iter().chain(decays) {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} = {v} not in [0, 1)"));
            }
        }
        if !(self.peak > 0.0) {
            return bad(format!("peak = {} must be positive", self.peak));
        }
        Ok(())
    }
}

/// Whether a pair sentence expresses the instance it was generated for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OracleLabel {
    pub sentence_ref: SentenceRef,
    pub instance: RelationInstance,
    pub expresses: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueMention {
    pub sentence_ref: SentenceRef,
    pub date: NaiveDate,
    /// Connector index, or `None` for a paraphrase.
    pub pattern: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub instance: RelationInstance,
    pub establishment: NaiveDate,
    pub true_mentions: Vec<TrueMention>,
}

impl PlantedInstance {
    pub fn true_mention_dates(&self) -> Vec<NaiveDate> {
        self.true_mentions.iter().map(|m| m.date).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub labels: Vec<OracleLabel>,
    pub gazetteer: Gazetteer,
    pub rules_text: String,
    pub relations: RelationSet,
    pub types: TypeSet,
    pub grid: TimeGrid,
    pub planted: Vec<PlantedInstance>,
}

impl SynthCorpus {
    pub fn corpus_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.documents {
            out.push_str(&document_to_record(d));
            out.push('\n');
        }
        out
    }

    pub fn oracle_tsv(&self) -> String {
        oracle_to_tsv(&self.labels)
    }

    pub fn label_map(&self) -> LabelMap {
        label_map(&self.labels)
    }

    pub fn oracle_series(&self, planted: &PlantedInstance, w: &WindowSpec) -> Result<OracleSeries> {
        oracle_inspo(planted.instance.clone(), &planted.true_mention_dates(), &self.grid, w)
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.len() * SENTENCES_PER_DOC
    }
}

pub fn label_map(labels: &[OracleLabel]) -> LabelMap {
    labels
        .iter()
        .map(|l| {
            let key = MentionKey {
                instance: l.instance.clone(),
                sentence_ref: l.sentence_ref.clone(),
            };
            let p = if l.expresses { Polarity::Positive } else { Polarity::Negative };
            (key, p)
        })
        .collect()
}

/// `doc_id, index, relation, head_id, tail_id, expresses` per line.
pub fn oracle_to_tsv(labels: &[OracleLabel]) -> String {
    let mut out = String::from("# doc_id\tindex\trelation\thead_id\ttail_id\texpresses\n");
    for l in labels {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            l.sentence_ref.doc_id,
            l.sentence_ref.index,
            l.instance.relation_type,
            l.instance.head_id,
            l.instance.tail_id,
            l.expresses
        );
    }
    out
}

pub fn parse_oracle(text: &str, relations: &RelationSet) -> Result<Vec<OracleLabel>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        let index = f[1].parse().map_err(|_| err(format!("bad sentence index `{}`", f[1])))?;
        let directed = relations
            .is_directed(f[2])
            .ok_or_else(|| err(format!("unknown relation `{}`", f[2])))?;
        let expresses = f[5].parse().map_err(|_| err(format!("bad flag `{}`", f[5])))?;
        out.push(OracleLabel {
            sentence_ref: SentenceRef::new(f[0], index),
            instance: RelationInstance::new(f[2], f[3], f[4], directed),
            expresses,
        });
    }
    Ok(out)
}

/// Share of positive mentions whose oracle label says the sentence does not
/// express the instance. Negative mentions are not counted.
pub fn noise_ratio(manifest: &[WeightedMention], labels: &LabelMap) -> Result<f64> {
    let mut positives = 0usize;
    let mut noisy = 0usize;
    for m in manifest.iter().filter(|m| m.polarity == Polarity::Positive) {
        let key = m.key();
        match labels.get(&key) {
            Some(Polarity::Positive) => {}
            Some(Polarity::Negative) => noisy += 1,
            None => return Err(Error::Unlabeled(key.to_string())),
        }
        positives += 1;
    }
    Ok(if positives == 0 { 0.0 } else { noisy as f64 / positives as f64 })
}

struct Entity {
    surface: String,
    id: String,
}

struct Names {
    used: BTreeSet<String>,
    reserved: BTreeSet<String>,
    counters: BTreeMap<String, usize>,
}

impl Names {
    fn new() -> Self {
        let reserved = DISTRACTORS
            .iter()
            .chain(&FILLER)
            .chain(&PREFIXES)
            .chain(&CLAUSES)
            .chain(&SUFFIXES)
            .flat_map(|t| t.split(|c: char| !c.is_alphanumeric()))
            .filter(|w| !w.is_empty())
            .map(str::to_string)
            .collect();
        Names {
            used: BTreeSet::new(),
            reserved,
            counters: BTreeMap::new(),
        }
    }

    fn word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
        let raw: String = (0..syllables).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect();
        let mut c = raw.chars();
        let first = c.next().expect("non-empty").to_ascii_uppercase();
        std::iter::once(first).chain(c).collect()
    }

    fn fresh(&mut self, ty: &str, rng: &mut ChaCha8Rng) -> Entity {
        loop {
            let surface = match ty {
                "ORG" => format!("{} {}", Self::word(rng, 2), ORG_SUFFIXES.choose(rng).expect("non-empty")),
                "PER" => format!("{} {}", Self::word(rng, 2), Self::word(rng, 3)),
                _ => Self::word(rng, 3),
            };
            if surface.split(' ').any(|w| self.reserved.contains(w)) || !self.used.insert(surface.clone()) {
                continue;
            }
            let n = self.counters.entry(ty.to_string()).or_insert(0);
            let id = format!("{}_{:03}", ty.to_lowercase(), n);
            *n += 1;
            return Entity { surface, id };
        }
    }
}

struct Pools {
    org: Vec<Entity>,
    per: Vec<Entity>,
    loc: Vec<Entity>,
}

impl Pools {
    fn pick<'a>(&'a self, ty: &str, rng: &mut ChaCha8Rng) -> &'a Entity {
        let pool = match ty {
            "ORG" => &self.org,
            "PER" => &self.per,
            _ => &self.loc,
        };
        pool.choose(rng).expect("background pools are non-empty")
    }

    fn fill(&self, template: &str, rng: &mut ChaCha8Rng) -> String {
        let mut s = template.to_string();
        for ty in ["ORG", "PER", "LOC"] {
            let slot = format!("{{{ty}}}");
            if s.contains(&slot) {
                s = s.replace(&slot, &self.pick(ty, rng).surface);
            }
        }
        if s.contains("{n}") {
            s = s.replace("{n}", &rng.random_range(2..40).to_string());
        }
        s
    }
}

struct PairSentence {
    day: usize,
    text: String,
    label: (RelationInstance, bool),
    /// `(planted index, pattern)` for true mentions of planted instances.
    source: Option<(usize, Option<usize>)>,
}

/// Adds a background entity around `core`. Clauses repeat `first`, the
/// entity that opens the pair, next to the newcomer.
fn decorate(core: String, first: &str, rate: f64, pools: &Pools, rng: &mut ChaCha8Rng) -> String {
    if rng.random::<f64>() >= rate {
        return core;
    }
    match rng.random_range(0..5) {
        0 => {
            let p = pools.fill(PREFIXES.choose(rng).expect("non-empty"), rng);
            format!("{p}{core}")
        }
        1 => {
            let s = pools.fill(SUFFIXES.choose(rng).expect("non-empty"), rng);
            format!("{core}{s}")
        }
        _ => {
            let c = CLAUSES.choose(rng).expect("non-empty").replace("{H}", first);
            format!("{core}{}", pools.fill(&c, rng))
        }
    }
}

fn poisson(lambda: f64, rng: &mut ChaCha8Rng) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as usize
}

fn intensity(leak: f64, decay: f64, peak: f64, day: usize, est: usize) -> f64 {
    match day.cmp(&est) {
        std::cmp::Ordering::Less => peak * leak,
        std::cmp::Ordering::Equal => peak,
        std::cmp::Ordering::Greater => peak * decay.powi((day - est) as i32),
    }
}

fn planted_sentences(
    cfg: &SynthConfig,
    idx: usize,
    spec: &RelationSpec,
    head: &Entity,
    tail: &Entity,
    instance: &RelationInstance,
    est: usize,
    pools: &Pools,
) -> Vec<PairSentence> {
    let tag = idx.to_string();
    let mut rng = rng_for(cfg.seed, &["planted", tag.as_str()]);
    let peak = cfg.peak * rng.random_range(1.0 - cfg.peak_jitter..=1.0 + cfg.peak_jitter);
    let decay = cfg.decay_for(&spec.name);
    let kept = if instance.head_id == head.id { &head.surface } else { &tail.surface };
    let mut out = Vec::new();
    for day in 0..cfg.days {
        for _ in 0..poisson(intensity(cfg.leak, decay, peak, day, est), &mut rng) {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pattern = None;
            for (k, p) in cfg.pattern_probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pattern = Some(k);
                    break;
                }
            }
            let core = match pattern {
                Some(k) => format!("{} {} {}", head.surface, spec.connectors[k], tail.surface),
                None => spec
                    .paraphrases
                    .choose(&mut rng)
                    .expect("validated")
                    .replace("{h}", &head.surface)
                    .replace("{t}", &tail.surface),
            };
            out.push(PairSentence {
                day,
                text: decorate(core, kept, cfg.decoration_rate, pools, &mut rng),
                label: (instance.clone(), true),
                source: Some((idx, pattern)),
            });
        }
    }
    let trues = out.len();
    let mut seen = 0;
    while seen < trues {
        if rng.random::<f64>() < cfg.distractor_rate {
            let (a, b) = if rng.random::<bool>() { (head, tail) } else { (tail, head) };
            let pick = rng.random_range(0..spec.distractors.len() + DISTRACTORS.len());
            let template = spec.distractors.get(pick).map(String::as_str).unwrap_or_else(|| DISTRACTORS[pick - spec.distractors.len()]);
            let core = template
                .replace("{a}", &a.surface)
                .replace("{b}", &b.surface);
            out.push(PairSentence {
                day: rng.random_range(0..cfg.days),
                text: decorate(core, kept, cfg.decoration_rate, pools, &mut rng),
                label: (instance.clone(), false),
                source: None,
            });
        } else {
            seen += 1;
        }
    }
    out
}

enum Body {
    Pair(usize),
    Filler,
}

/// Generates the corpus, gazetteer, rules file and oracle labels. Identical
/// configs give identical output.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, &["entities"]);
    let mut names = Names::new();
    let mut gazetteer = Gazetteer::new(CasePolicy::Sensitive);
    let mut fresh = |ty: &str, rng: &mut ChaCha8Rng, gaz: &mut Gazetteer| {
        let e = names.fresh(ty, rng);
        gaz.insert(&e.surface, ty, &e.id).expect("generated names are unique");
        e
    };

    let mut planted_entities = Vec::new();
    let (lo, hi) = cfg.establishment_range();
    for i in 0..cfg.planted {
        let spec = &cfg.relations[i % cfg.relations.len()];
        let head = fresh(&spec.head_type, &mut rng, &mut gazetteer);
        let tail = fresh(&spec.tail_type, &mut rng, &mut gazetteer);
        let est = rng.random_range(lo..=hi);
        planted_entities.push((spec, head, tail, est));
    }
    let pools = Pools {
        org: (0..cfg.background_orgs.max(2)).map(|_| fresh("ORG", &mut rng, &mut gazetteer)).collect(),
        per: (0..cfg.background_pers.max(1)).map(|_| fresh("PER", &mut rng, &mut gazetteer)).collect(),
        loc: (0..cfg.background_locs.max(1)).map(|_| fresh("LOC", &mut rng, &mut gazetteer)).collect(),
    };

    let mut planted = Vec::new();
    let per_instance: Vec<Vec<PairSentence>> = planted_entities
        .par_iter()
        .enumerate()
        .map(|(i, (spec, head, tail, est))| {
            let inst = RelationInstance::new(&spec.name, &head.id, &tail.id, spec.directed);
            planted_sentences(cfg, i, spec, head, tail, &inst, *est, &pools)
        })
        .collect();
    for (spec, head, tail, est) in &planted_entities {
        planted.push(PlantedInstance {
            instance: RelationInstance::new(&spec.name, &head.id, &tail.id, spec.directed),
            establishment: cfg.start + Duration::days(*est as i64),
            true_mentions: Vec::new(),
        });
    }
    let mut pairs: Vec<PairSentence> = per_instance.into_iter().flatten().collect();

    let mut rumor_rng = rng_for(cfg.seed, &["rumors"]);
    let mut rumor_pairs = BTreeSet::new();
    for i in 0..cfg.rumors {
        let spec = &cfg.relations[i % cfg.relations.len()];
        let head = pools.pick(&spec.head_type, &mut rumor_rng);
        let tail = pools.pick(&spec.tail_type, &mut rumor_rng);
        if head.id == tail.id || !rumor_pairs.insert((head.id.clone(), tail.id.clone())) {
            continue;
        }
        let k = rumor_rng.random_range(0..spec.connectors.len());
        pairs.push(PairSentence {
            day: rumor_rng.random_range(0..cfg.days),
            text: format!("{} {} {}", head.surface, spec.connectors[k], tail.surface),
            label: (RelationInstance::new(&spec.name, &head.id, &tail.id, spec.directed), true),
            source: None,
        });
    }

    let mut by_day: Vec<Vec<usize>> = vec![Vec::new(); cfg.days];
    for (i, p) in pairs.iter().enumerate() {
        by_day[p.day].push(i);
    }
    let days: Vec<(Vec<Document>, Vec<(usize, SentenceRef)>)> = by_day
        .into_par_iter()
        .enumerate()
        .map(|(day, idx)| {
            let tag = day.to_string();
            let mut rng = rng_for(cfg.seed, &["day", tag.as_str()]);
            let mut bodies: Vec<Body> = idx.into_iter().map(Body::Pair).collect();
            bodies.extend((0..cfg.docs_per_day).map(|_| Body::Filler));
            bodies.shuffle(&mut rng);
            let date = cfg.start + Duration::days(day as i64);
            let mut docs = Vec::with_capacity(bodies.len());
            let mut refs = Vec::new();
            for (k, b) in bodies.into_iter().enumerate() {
                let id = format!("d{day:03}-{k:05}");
                let title = pools.fill(FILLER.choose(&mut rng).expect("non-empty"), &mut rng);
                let first = match b {
                    Body::Pair(p) => {
                        refs.push((p, SentenceRef::new(&id, 1)));
                        pairs[p].text.clone()
                    }
                    Body::Filler => pools.fill(FILLER.choose(&mut rng).expect("non-empty"), &mut rng),
                };
                let second = pools.fill(FILLER.choose(&mut rng).expect("non-empty"), &mut rng);
                docs.push(Document {
                    id,
                    source: "synthetic".into(),
                    title,
                    body: format!("{first}. {second}."),
                    date,
                });
            }
            (docs, refs)
        })
        .collect();

    let mut documents = Vec::new();
    let mut labels = Vec::new();
    let mut where_is: HashMap<usize, SentenceRef> = HashMap::new();
    for (docs, refs) in days {
        documents.extend(docs);
        where_is.extend(refs);
    }
    for (i, p) in pairs.iter().enumerate() {
        let sentence_ref = where_is[&i].clone();
        if let Some((pi, pattern)) = p.source {
            planted[pi].true_mentions.push(TrueMention {
                sentence_ref: sentence_ref.clone(),
                date: cfg.start + Duration::days(p.day as i64),
                pattern,
            });
        }
        labels.push(OracleLabel {
            sentence_ref,
            instance: p.label.0.clone(),
            expresses: p.label.1,
        });
    }
    labels.sort();

    let mut rules_text = String::from("# relation: [entity1:TYPE] connector [entity2:TYPE]\n");
    for r in &cfg.relations {
        for c in &r.connectors {
            let _ = writeln!(rules_text, "{}: [entity1:{}] {} [entity2:{}]", r.name, r.head_type, c, r.tail_type);
        }
    }
    Ok(SynthCorpus {
        documents,
        labels,
        gazetteer,
        rules_text,
        relations: cfg.relation_set(),
        types: TypeSet::default(),
        grid: cfg.grid(),
        planted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::Provenance;
    use crate::corpus::annotate_corpus;

    fn small(seed: u64) -> SynthConfig {
        let mut cfg = SynthConfig::standard(seed);
        cfg.planted = 5;
        cfg.peak = 30.0;
        cfg.docs_per_day = 2;
        cfg.days = 40;
        cfg
    }

    #[test]
    fn deterministic() {
        let a = generate_corpus(&small(3)).unwrap();
        let b = generate_corpus(&small(3)).unwrap();
        assert_eq!(a.corpus_jsonl(), b.corpus_jsonl());
        assert_eq!(a.oracle_tsv(), b.oracle_tsv());
        assert_eq!(a.gazetteer.to_tsv(), b.gazetteer.to_tsv());
        assert_ne!(a.corpus_jsonl(), generate_corpus(&small(4)).unwrap().corpus_jsonl());
    }

    #[test]
    fn zero_planted_is_an_error() {
        let mut cfg = small(1);
        cfg.planted = 0;
        assert!(matches!(generate_corpus(&cfg), Err(Error::SynthConfig(_))));
        let mut cfg = small(1);
        cfg.pattern_probs = vec![0.3; 5];
        assert!(generate_corpus(&cfg).is_err());
    }

    #[test]
    fn labels_point_at_pair_sentences() {
        let c = generate_corpus(&small(5)).unwrap();
        let sentences = annotate_corpus(&c.documents, &c.gazetteer);
        assert_eq!(sentences.len(), c.sentence_count());
        let lookup: HashMap<SentenceRef, _> = sentences.iter().map(|s| (s.sentence_ref(), s)).collect();
        for l in &c.labels {
            let s = lookup[&l.sentence_ref];
            assert!(s.mentions_of(&l.instance.head_id).next().is_some(), "{}", s.text);
            assert!(s.mentions_of(&l.instance.tail_id).next().is_some(), "{}", s.text);
        }
        let keys: BTreeSet<_> = c.labels.iter().map(|l| (&l.sentence_ref, &l.instance)).collect();
        assert_eq!(keys.len(), c.labels.len());
    }

    #[test]
    fn oracle_round_trip() {
        let c = generate_corpus(&small(6)).unwrap();
        assert_eq!(parse_oracle(&c.oracle_tsv(), &c.relations).unwrap(), c.labels);
        assert!(parse_oracle("d\t1\tNope\ta\tb\ttrue\n", &c.relations).is_err());
    }

    #[test]
    fn concentrated_burst() {
        let mut cfg = small(7);
        cfg.decay = 0.0;
        cfg.relation_decay.clear();
        cfg.leak = 0.0;
        let c = generate_corpus(&cfg).unwrap();
        let w = WindowSpec::default();
        for p in &c.planted {
            assert!(p.true_mentions.iter().all(|m| m.date == p.establishment));
            let s = c.oracle_series(p, &w).unwrap();
            let e = c.grid.index_of(p.establishment).unwrap();
            for (t, v) in s.inspo.iter().enumerate() {
                let expected = if t + 1 >= e && t <= e + 1 { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-12, "day {t}: {v}");
            }
        }
    }

    #[test]
    fn noise_ratio_counts() {
        let inst = RelationInstance::new("Lawsuit", "a", "b", true);
        let ms: Vec<WeightedMention> = (0..6)
            .map(|i| WeightedMention {
                instance: inst.clone(),
                sentence_ref: SentenceRef::new(format!("d{i}"), 0),
                date: NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
                weight: 1.0,
                polarity: Polarity::Positive,
                provenance: Provenance::Aligned,
            })
            .collect();
        let mut labels: LabelMap = ms.iter().map(|m| (m.key(), Polarity::Positive)).collect();
        assert_eq!(noise_ratio(&ms, &labels).unwrap(), 0.0);
        for m in &ms[..3] {
            labels.insert(m.key(), Polarity::Negative);
        }
        assert_eq!(noise_ratio(&ms, &labels).unwrap(), 0.5);
        labels.remove(&ms[0].key());
        assert!(matches!(noise_ratio(&ms, &labels), Err(Error::Unlabeled(_))));
    }

    #[test]
    fn standard_scale() {
        let cfg = SynthConfig::standard(1);
        let c = generate_corpus(&cfg).unwrap();
        let n = c.sentence_count() as f64;
        assert!((40_000.0..60_000.0).contains(&n), "{n}");
    }
}
