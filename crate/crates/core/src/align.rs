//! Distant-supervision alignment: every sentence that mentions both entities
//! of a knowledge instance becomes a positive training mention weighted by the
//! instance's popularity on the sentence's date. Negatives are made by swapping
//! the tail for another entity of the same sentence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::corpus::{Sentence, SentenceRef};
use crate::error::{Error, Result};
use crate::knowledge::RelationInstance;
use crate::popularity::SeriesMap;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "positive" | "pos" | "1" | "true" => Some(Polarity::Positive),
            "negative" | "neg" | "0" | "false" => Some(Polarity::Negative),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Aligned,
    TailReplaced,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Aligned => "aligned",
            Provenance::TailReplaced => "tail-replaced",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "aligned" => Some(Provenance::Aligned),
            "tail-replaced" => Some(Provenance::TailReplaced),
            _ => None,
        }
    }
}

/// `(instance, sentence)` identity of a mention.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MentionKey {
    pub instance: RelationInstance,
    pub sentence_ref: SentenceRef,
}

impl fmt::Display for MentionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ {}", self.instance, self.sentence_ref)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMention {
    pub instance: RelationInstance,
    pub sentence_ref: SentenceRef,
    pub date: NaiveDate,
    pub weight: f64,
    pub polarity: Polarity,
    pub provenance: Provenance,
}

impl WeightedMention {
    pub fn key(&self) -> MentionKey {
        MentionKey {
            instance: self.instance.clone(),
            sentence_ref: self.sentence_ref.clone(),
        }
    }

    fn sort_key(&self) -> (&str, &str, &str, &str, usize, Polarity) {
        (
            &self.instance.relation_type,
            &self.instance.head_id,
            &self.instance.tail_id,
            &self.sentence_ref.doc_id,
            self.sentence_ref.index,
            self.polarity,
        )
    }
}

/// Canonical manifest order: relation, head, tail, doc id, sentence index.
pub fn sort_canonical(ms: &mut [WeightedMention]) {
    ms.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Per-relation `(head type, tail type)` slot constraints.
pub type SlotTypes = BTreeMap<String, (String, String)>;

#[derive(Debug, Clone, Default)]
pub struct AlignOutput {
    pub mentions: Vec<WeightedMention>,
    pub warnings: Vec<String>,
}

/// Positive mentions for every `(instance, sentence)` pair where the sentence
/// holds type-compatible mentions of both entities.
pub fn align(
    instances: &[RelationInstance],
    sentences: &[Sentence],
    series: &SeriesMap,
    slot_types: &SlotTypes,
) -> AlignOutput {
    let mut warnings = Vec::new();
    let mut index: HashMap<(&str, &str), Vec<&RelationInstance>> = HashMap::new();
    for inst in instances {
        if !series.contains_key(inst) {
            warnings.push(format!("instance {inst} has no popularity series; skipped"));
            continue;
        }
        index
            .entry((inst.head_id.as_str(), inst.tail_id.as_str()))
            .or_default()
            .push(inst);
    }

    let mut mentions: Vec<WeightedMention> = sentences
        .par_iter()
        .flat_map_iter(|s| {
            let mut ids: Vec<(&str, &str)> = s
                .mentions
                .iter()
                .map(|m| (m.canonical_id.as_str(), m.entity_type.as_str()))
                .collect();
            ids.sort();
            ids.dedup_by(|a, b| a.0 == b.0);
            let mut out = Vec::new();
            for &(a, ta) in &ids {
                for &(b, tb) in &ids {
                    if a == b {
                        continue;
                    }
                    let Some(found) = index.get(&(a, b)) else { continue };
                    for inst in found {
                        if let Some((h, t)) = slot_types.get(&inst.relation_type) {
                            let direct = ta == h && tb == t;
                            let swapped = !inst.directed && ta == t && tb == h;
                            if !direct && !swapped {
                                continue;
                            }
                        }
                        out.push(WeightedMention {
                            instance: (*inst).clone(),
                            sentence_ref: s.sentence_ref(),
                            date: s.date,
                            weight: series[*inst].inspo_at(s.date),
                            polarity: Polarity::Positive,
                            provenance: Provenance::Aligned,
                        });
                    }
                }
            }
            out
        })
        .collect();
    sort_canonical(&mut mentions);
    AlignOutput { mentions, warnings }
}

/// Replacement candidates for `m`'s tail: entities of `s` other than head and
/// tail, in a seeded order derived from the mention key.
fn replacement_order<'a>(m: &WeightedMention, s: &'a Sentence, seed: u64) -> Vec<(&'a str, &'a str)> {
    let mut cands: Vec<(&str, &str)> = s
        .mentions
        .iter()
        .filter(|e| e.canonical_id != m.instance.head_id && e.canonical_id != m.instance.tail_id)
        .map(|e| (e.canonical_id.as_str(), e.entity_type.as_str()))
        .collect();
    cands.sort();
    cands.dedup_by(|a, b| a.0 == b.0);
    let idx = m.sentence_ref.index.to_string();
    let mut rng = rng_for(
        seed,
        &[
            m.instance.relation_type.as_str(),
            m.instance.head_id.as_str(),
            m.instance.tail_id.as_str(),
            m.sentence_ref.doc_id.as_str(),
            idx.as_str(),
        ],
    );
    cands.shuffle(&mut rng);
    cands
}

/// Options for negative generation.
#[derive(Debug, Clone, Copy)]
pub struct NegativeOptions<'a> {
    /// Require the replacement to carry the relation's tail type.
    pub strict_types: Option<&'a SlotTypes>,
    pub per_positive: usize,
}

/// Up to `opts.per_positive` tail-replaced negatives for one aligned positive.
pub fn negatives_for(
    m: &WeightedMention,
    s: &Sentence,
    knowledge: &BTreeSet<RelationInstance>,
    seed: u64,
    opts: NegativeOptions<'_>,
) -> Vec<WeightedMention> {
    if m.polarity != Polarity::Positive || m.provenance != Provenance::Aligned {
        return Vec::new();
    }
    let tail_type = opts
        .strict_types
        .and_then(|st| st.get(&m.instance.relation_type))
        .map(|(_, t)| t.as_str());
    replacement_order(m, s, seed)
        .into_iter()
        .filter(|(_, ty)| tail_type.is_none_or(|t| t == *ty))
        .map(|(id, _)| {
            RelationInstance::new(
                m.instance.relation_type.clone(),
                m.instance.head_id.clone(),
                id,
                m.instance.directed,
            )
        })
        .filter(|inst| !knowledge.contains(inst))
        .take(opts.per_positive)
        .map(|instance| WeightedMention {
            instance,
            sentence_ref: m.sentence_ref.clone(),
            date: m.date,
            weight: m.weight,
            polarity: Polarity::Negative,
            provenance: Provenance::TailReplaced,
        })
        .collect()
}

/// One negative for `m`, or `None` when the sentence offers no safe replacement.
pub fn generate_negatives(
    m: &WeightedMention,
    s: &Sentence,
    knowledge: &BTreeSet<RelationInstance>,
    seed: u64,
) -> Option<WeightedMention> {
    negatives_for(
        m,
        s,
        knowledge,
        seed,
        NegativeOptions {
            strict_types: None,
            per_positive: 1,
        },
    )
    .into_iter()
    .next()
}

/// Adds tail-replaced negatives for every aligned positive and returns the
/// combined manifest in canonical order. Duplicate negatives are dropped.
pub fn with_negatives(
    positives: Vec<WeightedMention>,
    sentences: &SentenceLookup<'_>,
    knowledge: &BTreeSet<RelationInstance>,
    seed: u64,
    opts: NegativeOptions<'_>,
) -> Vec<WeightedMention> {
    let negatives: Vec<WeightedMention> = positives
        .par_iter()
        .flat_map_iter(|m| match sentences.get(&m.sentence_ref) {
            Some(s) => negatives_for(m, s, knowledge, seed, opts),
            None => Vec::new(),
        })
        .collect();
    let mut seen: BTreeSet<MentionKey> = positives.iter().map(WeightedMention::key).collect();
    let mut all = positives;
    for n in negatives {
        if seen.insert(n.key()) {
            all.push(n);
        }
    }
    sort_canonical(&mut all);
    all
}

/// Sentence lookup by `(doc_id, index)`.
pub struct SentenceLookup<'a> {
    map: HashMap<(&'a str, usize), &'a Sentence>,
}

impl<'a> SentenceLookup<'a> {
    pub fn new(sentences: &'a [Sentence]) -> Self {
        SentenceLookup {
            map: sentences
                .iter()
                .map(|s| ((s.doc_id.as_str(), s.index), s))
                .collect(),
        }
    }

    pub fn get(&self, r: &SentenceRef) -> Option<&'a Sentence> {
        self.map.get(&(r.doc_id.as_str(), r.index)).copied()
    }

    pub fn require(&self, r: &SentenceRef) -> Result<&'a Sentence> {
        self.get(r).ok_or_else(|| Error::MissingSentence {
            doc_id: r.doc_id.clone(),
            index: r.index,
        })
    }
}

/// Popularity threshold for test candidates, per relation with a default.
#[derive(Debug, Clone, PartialEq)]
pub struct TestThresholds {
    pub default: f64,
    pub per_relation: BTreeMap<String, f64>,
}

impl TestThresholds {
    /// 0.2 for Investing and 0.7 for everything else.
    pub fn news_default() -> Self {
        TestThresholds {
            default: 0.7,
            per_relation: [("Investing".to_string(), 0.2)].into_iter().collect(),
        }
    }

    pub fn get(&self, relation: &str) -> f64 {
        self.per_relation.get(relation).copied().unwrap_or(self.default)
    }

    /// Parses `Rel:0.2,*:0.7`; `*` sets the default.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let mut t = TestThresholds {
            default: 0.7,
            per_relation: BTreeMap::new(),
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once(':')
                .ok_or_else(|| format!("expected RELATION:value, got `{part}`"))?;
            let v: f64 = v.trim().parse().map_err(|_| format!("bad threshold `{v}`"))?;
            if k.trim() == "*" {
                t.default = v;
            } else {
                t.per_relation.insert(k.trim().to_string(), v);
            }
        }
        Ok(t)
    }
}

impl fmt::Display for TestThresholds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.per_relation {
            write!(f, "{k}:{v},")?;
        }
        write!(f, "*:{}", self.default)
    }
}

pub type LabelMap = HashMap<MentionKey, Polarity>;

#[derive(Debug, Clone, PartialEq)]
pub struct TestMention {
    pub mention: WeightedMention,
    pub candidate: Polarity,
    pub gold: Polarity,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestSet {
    pub items: Vec<TestMention>,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Gold `(positive, negative)` counts per relation.
    pub fn counts(&self) -> BTreeMap<String, (usize, usize)> {
        let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for t in &self.items {
            let e = out.entry(t.mention.instance.relation_type.clone()).or_default();
            match t.gold {
                Polarity::Positive => e.0 += 1,
                Polarity::Negative => e.1 += 1,
            }
        }
        out
    }

    /// Items whose gold label differs from the candidate label.
    pub fn corrected(&self) -> usize {
        self.items.iter().filter(|t| t.gold != t.candidate).count()
    }
}

#[derive(Debug, Clone, Default)]
pub struct TestSetOutput {
    pub test_set: TestSet,
    pub warnings: Vec<String>,
}

/// Candidate positives are aligned test mentions at or above the relation's
/// threshold; a seeded `negative_reserve_fraction` of the rest are candidate
/// negatives. Gold polarity comes from `gold`; unlabeled candidates are dropped.
#[allow(clippy::too_many_arguments)]
pub fn build_test_set(
    test_instances: &[RelationInstance],
    sentences: &[Sentence],
    series: &SeriesMap,
    slot_types: &SlotTypes,
    thresholds: &TestThresholds,
    negative_reserve_fraction: f64,
    gold: &LabelMap,
    seed: u64,
) -> TestSetOutput {
    let aligned = align(test_instances, sentences, series, slot_types);
    let mut warnings = aligned.warnings;
    let mut items = Vec::new();
    let mut unlabeled = 0usize;
    let mut per_relation: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in test_instances {
        per_relation.entry(inst.relation_type.as_str()).or_insert(0);
    }
    for m in aligned.mentions {
        let candidate = if m.weight >= thresholds.get(&m.instance.relation_type) {
            Polarity::Positive
        } else {
            let idx = m.sentence_ref.index.to_string();
            let mut rng = rng_for(
                seed,
                &[
                    "reserve",
                    m.instance.relation_type.as_str(),
                    m.instance.head_id.as_str(),
                    m.instance.tail_id.as_str(),
                    m.sentence_ref.doc_id.as_str(),
                    idx.as_str(),
                ],
            );
            if rng.random::<f64>() >= negative_reserve_fraction {
                continue;
            }
            Polarity::Negative
        };
        match gold.get(&m.key()) {
            Some(&g) => {
                if let Some(c) = per_relation.get_mut(m.instance.relation_type.as_str()) {
                    *c += 1;
                }
                items.push(TestMention {
                    mention: m,
                    candidate,
                    gold: g,
                });
            }
            None => unlabeled += 1,
        }
    }
    for (rel, n) in per_relation {
        if n == 0 {
            warnings.push(format!("relation {rel} has no test candidates"));
        }
    }
    if unlabeled > 0 {
        warnings.push(format!("{unlabeled} unlabeled test candidates excluded"));
    }
    TestSetOutput {
        test_set: TestSet { items },
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    /// Fold index of each test item, by position.
    pub folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.folds {
            s[f] += 1;
        }
        s
    }

    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }
}

/// Seeded uniform partition of `n` items into `k` folds of sizes within one.
pub fn partition_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "folds",
            msg: format!("need at least 2 folds, got {k}"),
        });
    }
    if n < k {
        return Err(Error::TooFewForFolds { items: n, folds: k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, &["folds"]));
    let mut folds = vec![0; n];
    for (pos, &item) in order.iter().enumerate() {
        folds[item] = pos % k;
    }
    Ok(FoldAssignment { k, folds })
}
