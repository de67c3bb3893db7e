//! `<Pattern, Constraint>` rule templates: `[entity1:TYPE] connector [entity2:TYPE]`.
//!
//! A rule matches a sentence when the connector tokens sit verbatim, with no
//! gap, between two entity mentions whose types satisfy the slot constraints.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;

use crate::corpus::{tokenize, EntityMention, Sentence, SentenceRef, TypeSet};
use crate::error::{Error, Result};

/// Configured relation names and their directedness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSet {
    directed: BTreeMap<String, bool>,
}

impl RelationSet {
    pub fn new<I, S>(relations: I) -> Self
    where
        I: IntoIterator<Item = (S, bool)>,
        S: Into<String>,
    {
        RelationSet {
            directed: relations.into_iter().map(|(n, d)| (n.into(), d)).collect(),
        }
    }

    /// Acquisition, Investing, JobChange and Lawsuit are directed; Partnership is not.
    pub fn news_default() -> Self {
        RelationSet::new([
            ("Acquisition", true),
            ("Investing", true),
            ("JobChange", true),
            ("Lawsuit", true),
            ("Partnership", false),
        ])
    }

    /// Case-insensitive lookup returning the configured spelling.
    pub fn resolve(&self, name: &str) -> Option<&str> {
        self.directed
            .keys()
            .find(|k| k.eq_ignore_ascii_case(name))
            .map(String::as_str)
    }

    pub fn is_directed(&self, name: &str) -> Option<bool> {
        self.directed.get(name).copied()
    }

    /// Relation names in sorted order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.directed.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.directed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTemplate {
    pub rule_id: String,
    pub relation_type: String,
    pub connector: Vec<String>,
    /// Type required of `[entity1]`, the relation's head.
    pub head_type: String,
    /// Type required of `[entity2]`, the relation's tail.
    pub tail_type: String,
    pub directed: bool,
    /// False when the template reads `[entity2] ... [entity1]`.
    pub head_first: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RuleMatch {
    pub rule_id: String,
    pub relation_type: String,
    pub directed: bool,
    pub sentence_ref: SentenceRef,
    pub head: EntityMention,
    pub tail: EntityMention,
    pub date: NaiveDate,
}

struct Slot {
    which: u8,
    ty: String,
    start: usize,
    end: usize,
}

fn find_slot(pattern: &str, which: u8) -> Result<Slot> {
    let marker = format!("[entity{which}");
    let start = pattern
        .find(&marker)
        .ok_or_else(|| Error::RuleCompile(format!("missing slot marker [entity{which}:TYPE]")))?;
    let rest = &pattern[start + marker.len()..];
    let close = rest
        .find(']')
        .ok_or_else(|| Error::RuleCompile(format!("unterminated slot marker for entity{which}")))?;
    let inner = &rest[..close];
    let ty = inner.strip_prefix(':').map(str::trim).unwrap_or("");
    if ty.is_empty() {
        return Err(Error::RuleCompile(format!(
            "slot entity{which} lacks a type constraint"
        )));
    }
    Ok(Slot {
        which,
        ty: ty.to_string(),
        start,
        end: start + marker.len() + close + 1,
    })
}

/// Compiles one rule line `RELATION: [entity1:TYPE] connector tokens [entity2:TYPE]`.
pub fn compile_rule(
    rule_id: &str,
    template_text: &str,
    relations: &RelationSet,
    types: &TypeSet,
) -> Result<RuleTemplate> {
    let (rel, pattern) = template_text
        .split_once(':')
        .filter(|(r, _)| !r.contains('['))
        .ok_or_else(|| Error::RuleCompile("expected `RELATION: pattern`".into()))?;
    let rel = rel.trim();
    let relation_type = relations
        .resolve(rel)
        .ok_or_else(|| Error::RuleCompile(format!("unknown relation `{rel}`")))?
        .to_string();
    let directed = relations.is_directed(&relation_type).unwrap_or(true);

    let s1 = find_slot(pattern, 1)?;
    let s2 = find_slot(pattern, 2)?;
    for slot in [&s1, &s2] {
        if !types.contains(&slot.ty) {
            return Err(Error::RuleCompile(format!(
                "unknown entity type `{}` for entity{}",
                slot.ty, slot.which
            )));
        }
    }
    let (first, second) = if s1.start < s2.start { (&s1, &s2) } else { (&s2, &s1) };
    if !pattern[..first.start].trim().is_empty() || !pattern[second.end..].trim().is_empty() {
        return Err(Error::RuleCompile(
            "pattern text must lie between the two slots".into(),
        ));
    }
    if first.end > second.start {
        return Err(Error::RuleCompile("overlapping slot markers".into()));
    }
    let connector = tokenize(&pattern[first.end..second.start]);
    if connector.is_empty() {
        return Err(Error::RuleCompile("empty connector".into()));
    }
    Ok(RuleTemplate {
        rule_id: rule_id.to_string(),
        relation_type,
        connector,
        head_type: s1.ty.clone(),
        tail_type: s2.ty.clone(),
        directed,
        head_first: s1.start < s2.start,
    })
}

/// Matches one rule against an annotated sentence.
pub fn match_sentence(rule: &RuleTemplate, s: &Sentence) -> Vec<RuleMatch> {
    let mut out = Vec::new();
    for (i, a) in s.mentions.iter().enumerate() {
        for b in &s.mentions[i + 1..] {
            if a.span.end + rule.connector.len() != b.span.start {
                continue;
            }
            if s.tokens[a.span.end..b.span.start] != rule.connector[..] {
                continue;
            }
            if let Some(m) = build_match(rule, s, a, b) {
                out.push(m);
            }
        }
    }
    out
}

fn build_match(rule: &RuleTemplate, s: &Sentence, first: &EntityMention, second: &EntityMention) -> Option<RuleMatch> {
    let (mut head, mut tail) = if rule.head_first { (first, second) } else { (second, first) };
    if head.entity_type != rule.head_type || tail.entity_type != rule.tail_type {
        return None;
    }
    if head.canonical_id == tail.canonical_id {
        return None;
    }
    if !rule.directed && head.canonical_id > tail.canonical_id {
        std::mem::swap(&mut head, &mut tail);
    }
    Some(RuleMatch {
        rule_id: rule.rule_id.clone(),
        relation_type: rule.relation_type.clone(),
        directed: rule.directed,
        sentence_ref: s.sentence_ref(),
        head: head.clone(),
        tail: tail.clone(),
        date: s.date,
    })
}

/// A compiled rule set indexed by connector for single-pass matching.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<RuleTemplate>,
    by_connector: HashMap<Vec<String>, Vec<usize>>,
    max_connector: usize,
}

impl RuleSet {
    pub fn new(rules: Vec<RuleTemplate>) -> Self {
        let mut by_connector: HashMap<Vec<String>, Vec<usize>> = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            by_connector.entry(r.connector.clone()).or_default().push(i);
        }
        let max_connector = rules.iter().map(|r| r.connector.len()).max().unwrap_or(0);
        RuleSet {
            rules,
            by_connector,
            max_connector,
        }
    }

    /// Parses a rules file; rule ids are `RELATION-n`, numbered per relation in file order.
    pub fn parse(text: &str, relations: &RelationSet, types: &TypeSet) -> Result<Self> {
        let mut rules = Vec::new();
        let mut per_relation: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rel = line.split(':').next().unwrap_or("").trim();
            let canonical = relations.resolve(rel).unwrap_or(rel).to_string();
            let n = per_relation.entry(canonical.clone()).or_insert(0);
            *n += 1;
            let id = format!("{canonical}-{n}");
            let rule = compile_rule(&id, line, relations, types).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            rules.push(rule);
        }
        Ok(RuleSet::new(rules))
    }

    pub fn rules(&self) -> &[RuleTemplate] {
        &self.rules
    }

    pub fn get(&self, rule_id: &str) -> Option<&RuleTemplate> {
        self.rules.iter().find(|r| r.rule_id == rule_id)
    }

    /// Slot types `(head, tail)` of a relation, taken from its first rule.
    pub fn slot_types(&self, relation: &str) -> Option<(&str, &str)> {
        self.rules
            .iter()
            .find(|r| r.relation_type == relation)
            .map(|r| (r.head_type.as_str(), r.tail_type.as_str()))
    }

    /// All matches of every rule in the set, ordered by mention pair then rule id.
    pub fn match_sentence(&self, s: &Sentence) -> Vec<RuleMatch> {
        let mut out = Vec::new();
        for (i, a) in s.mentions.iter().enumerate() {
            for b in &s.mentions[i + 1..] {
                let gap = b.span.start.saturating_sub(a.span.end);
                if b.span.start < a.span.end || gap == 0 || gap > self.max_connector {
                    continue;
                }
                if let Some(ids) = self.by_connector.get(&s.tokens[a.span.end..b.span.start]) {
                    let mut hits: Vec<RuleMatch> = ids
                        .iter()
                        .filter_map(|&r| build_match(&self.rules[r], s, a, b))
                        .collect();
                    hits.sort_by(|x, y| x.rule_id.cmp(&y.rule_id));
                    out.extend(hits);
                }
            }
        }
        out
    }
}
