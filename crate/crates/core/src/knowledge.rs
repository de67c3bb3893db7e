//! Supervision knowledge: rule matches grouped into relation instances,
//! scored by rule diversity plus mention volume, thresholded, and split into
//! train and held-out test instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::SentenceRef;
use crate::error::{Error, Result};
use crate::rules::RuleMatch;
use crate::seed::rng_for;

/// A typed fact `relation(head, tail)`. Undirected instances keep the
/// lexicographically smaller id as head.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationInstance {
    pub relation_type: String,
    pub head_id: String,
    pub tail_id: String,
    pub directed: bool,
}

impl RelationInstance {
    pub fn new(relation: impl Into<String>, head: impl Into<String>, tail: impl Into<String>, directed: bool) -> Self {
        let (mut head, mut tail) = (head.into(), tail.into());
        if !directed && head > tail {
            std::mem::swap(&mut head, &mut tail);
        }
        RelationInstance {
            relation_type: relation.into(),
            head_id: head,
            tail_id: tail,
            directed,
        }
    }
}

impl fmt::Display for RelationInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.relation_type, self.head_id, self.tail_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MatchedMention {
    pub sentence_ref: SentenceRef,
    pub date: NaiveDate,
    pub rule_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceEvidence {
    pub instance: RelationInstance,
    pub matched_rule_ids: BTreeSet<String>,
    pub matched_mentions: Vec<MatchedMention>,
}

impl InstanceEvidence {
    pub fn rule_count(&self) -> usize {
        self.matched_rule_ids.len()
    }

    /// Number of distinct matched sentences.
    pub fn mention_count(&self) -> usize {
        self.distinct_mentions().count()
    }

    fn distinct_mentions(&self) -> impl Iterator<Item = &MatchedMention> {
        let mut seen = BTreeSet::new();
        self.matched_mentions
            .iter()
            .filter(move |m| seen.insert(&m.sentence_ref))
    }

    /// One date per distinct matched sentence.
    pub fn mention_dates(&self) -> Vec<NaiveDate> {
        self.distinct_mentions().map(|m| m.date).collect()
    }
}

pub type EvidenceMap = BTreeMap<RelationInstance, InstanceEvidence>;

pub fn aggregate_evidence<I: IntoIterator<Item = RuleMatch>>(matches: I) -> EvidenceMap {
    let mut map = EvidenceMap::new();
    for m in matches {
        let instance = RelationInstance::new(
            m.relation_type,
            m.head.canonical_id,
            m.tail.canonical_id,
            m.directed,
        );
        let ev = map.entry(instance.clone()).or_insert_with(|| InstanceEvidence {
            instance,
            matched_rule_ids: BTreeSet::new(),
            matched_mentions: Vec::new(),
        });
        ev.matched_rule_ids.insert(m.rule_id.clone());
        ev.matched_mentions.push(MatchedMention {
            sentence_ref: m.sentence_ref,
            date: m.date,
            rule_id: m.rule_id,
        });
    }
    for ev in map.values_mut() {
        ev.matched_mentions.sort();
    }
    map
}

/// Merges two partial aggregations. Associative and commutative.
pub fn merge_evidence(mut a: EvidenceMap, b: EvidenceMap) -> EvidenceMap {
    for (k, ev) in b {
        match a.get_mut(&k) {
            Some(existing) => {
                existing.matched_rule_ids.extend(ev.matched_rule_ids);
                existing.matched_mentions.extend(ev.matched_mentions);
                existing.matched_mentions.sort();
            }
            None => {
                a.insert(k, ev);
            }
        }
    }
    a
}

/// `rules / z_rule + mentions / z_m`; lies in (0, 2] when the normalizers are maxima.
pub fn confidence(ev: &InstanceEvidence, z_rule: usize, z_m: usize) -> Result<f64> {
    confidence_from_counts(ev.rule_count(), ev.mention_count(), z_rule, z_m)
}

pub fn confidence_from_counts(rules: usize, mentions: usize, z_rule: usize, z_m: usize) -> Result<f64> {
    if z_rule == 0 || z_m == 0 {
        return Err(Error::ZeroNormalizer);
    }
    Ok(rules as f64 / z_rule as f64 + mentions as f64 / z_m as f64)
}

/// Corpus-wide maxima of matched rules and matched sentences over all instances.
pub fn normalizers(evidence: &EvidenceMap) -> (usize, usize) {
    evidence.values().fold((0, 0), |(r, m), ev| {
        (r.max(ev.rule_count()), m.max(ev.mention_count()))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredInstance {
    pub instance: RelationInstance,
    pub confidence: f64,
    pub rule_count: usize,
    pub mention_count: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionKnowledge {
    pub instances: Vec<ScoredInstance>,
    pub z_rule: usize,
    pub z_m: usize,
}

impl SupervisionKnowledge {
    pub fn contains(&self, inst: &RelationInstance) -> bool {
        self.instances.iter().any(|s| &s.instance == inst)
    }

    pub fn instance_set(&self) -> BTreeSet<RelationInstance> {
        self.instances.iter().map(|s| s.instance.clone()).collect()
    }

    pub fn with_split(&self, split: Split) -> Vec<RelationInstance> {
        self.instances
            .iter()
            .filter(|s| s.split == split)
            .map(|s| s.instance.clone())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeSplit {
    pub train: Vec<RelationInstance>,
    pub test: Vec<RelationInstance>,
    pub knowledge: SupervisionKnowledge,
    pub warnings: Vec<String>,
}

/// Keeps instances with confidence ≥ `tau_c` and holds out
/// `⌈holdout_fraction · n_r⌉` instances of every relation `r` for testing.
pub fn build_and_split(
    evidence: &EvidenceMap,
    tau_c: f64,
    holdout_fraction: f64,
    seed: u64,
) -> Result<KnowledgeSplit> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::InvalidParameter {
            name: "holdout_fraction",
            msg: format!("{holdout_fraction} not in (0, 1)"),
        });
    }
    let (z_rule, z_m) = normalizers(evidence);
    let mut by_relation: BTreeMap<&str, Vec<ScoredInstance>> = BTreeMap::new();
    for ev in evidence.values() {
        let c = confidence(ev, z_rule, z_m)?;
        if c >= tau_c {
            by_relation
                .entry(ev.instance.relation_type.as_str())
                .or_default()
                .push(ScoredInstance {
                    instance: ev.instance.clone(),
                    confidence: c,
                    rule_count: ev.rule_count(),
                    mention_count: ev.mention_count(),
                    split: Split::Train,
                });
        }
    }
    if by_relation.is_empty() {
        return Err(Error::EmptyKnowledge(tau_c));
    }

    let mut warnings = Vec::new();
    let mut instances = Vec::new();
    for (relation, mut group) in by_relation {
        let n = group.len();
        if n < 2 {
            warnings.push(format!(
                "relation {relation} has {n} surviving instance(s); all assigned to train"
            ));
        } else {
            let n_test = ((holdout_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng_for(seed, &["holdout", relation]));
            for &i in &order[..n_test] {
                group[i].split = Split::Test;
            }
        }
        instances.extend(group);
    }
    let knowledge = SupervisionKnowledge {
        instances,
        z_rule,
        z_m,
    };
    Ok(KnowledgeSplit {
        train: knowledge.with_split(Split::Train),
        test: knowledge.with_split(Split::Test),
        knowledge,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntityMention, Span};

    fn mention(id: &str) -> EntityMention {
        EntityMention {
            surface: id.into(),
            entity_type: "ORG".into(),
            span: Span { start: 0, end: 1 },
            canonical_id: id.into(),
        }
    }

    fn rm(rule: &str, rel: &str, head: &str, tail: &str, doc: &str) -> RuleMatch {
        RuleMatch {
            rule_id: rule.into(),
            relation_type: rel.into(),
            directed: rel != "Partnership",
            sentence_ref: SentenceRef::new(doc, 0),
            head: mention(head),
            tail: mention(tail),
            date: NaiveDate::from_ymd_opt(2016, 5, 26).unwrap(),
        }
    }

    #[test]
    fn groups_matches_by_instance() {
        let ev = aggregate_evidence(vec![
            rm("r1", "Partnership", "fb", "msft", "d1"),
            rm("r1", "Partnership", "fb", "msft", "d2"),
            rm("r2", "Partnership", "fb", "msft", "d3"),
        ]);
        assert_eq!(ev.len(), 1);
        let e = ev.values().next().unwrap();
        assert_eq!(e.matched_rule_ids.iter().collect::<Vec<_>>(), vec!["r1", "r2"]);
        assert_eq!(e.mention_count(), 3);
        assert!(aggregate_evidence(Vec::new()).is_empty());

        let ev = aggregate_evidence(vec![
            rm("r1", "Lawsuit", "a", "b", "d1"),
            rm("r1", "Lawsuit", "b", "a", "d2"),
        ]);
        assert_eq!(ev.len(), 2);
        assert!(ev.values().all(|e| e.mention_count() == 1));
    }

    #[test]
    fn confidence_values() {
        assert_eq!(confidence_from_counts(5, 100, 5, 100).unwrap(), 2.0);
        assert!((confidence_from_counts(3, 40, 5, 100).unwrap() - 1.0).abs() < 1e-12);
        assert!((confidence_from_counts(1, 1, 5, 100).unwrap() - 0.21).abs() < 1e-12);
        assert_eq!(confidence_from_counts(1, 1, 0, 100), Err(Error::ZeroNormalizer));
    }

    fn evidence_with(n: usize, rel: &str) -> EvidenceMap {
        let matches = (0..n).flat_map(|i| {
            (0..=i).map(move |k| rm("r1", rel, &format!("h{i}"), &format!("t{i}"), &format!("d{i}-{k}")))
        });
        aggregate_evidence(matches.collect::<Vec<_>>())
    }

    #[test]
    fn split_counts_and_determinism() {
        let ev = evidence_with(10, "Lawsuit");
        let a = build_and_split(&ev, 0.0, 0.2, 7).unwrap();
        assert_eq!((a.train.len(), a.test.len()), (8, 2));
        let b = build_and_split(&ev, 0.0, 0.2, 7).unwrap();
        assert_eq!(a.test, b.test);
        let train: BTreeSet<_> = a.train.iter().collect();
        assert!(a.test.iter().all(|t| !train.contains(t)));
        assert_eq!(a.knowledge.z_m, 10);
        assert_eq!(a.knowledge.z_rule, 1);
    }

    #[test]
    fn threshold_above_everything_is_an_error() {
        let ev = evidence_with(4, "Lawsuit");
        assert!(matches!(build_and_split(&ev, 2.5, 0.2, 1), Err(Error::EmptyKnowledge(_))));
    }

    #[test]
    fn lone_relation_goes_to_train_with_warning() {
        let mut ev = evidence_with(5, "Lawsuit");
        ev.extend(evidence_with(1, "Investing"));
        let s = build_and_split(&ev, 0.0, 0.5, 3).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].contains("Investing"));
        assert!(s.test.iter().all(|i| i.relation_type == "Lawsuit"));
        assert_eq!(s.test.len(), 3);
    }
}
