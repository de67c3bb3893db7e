//! Sparse lexical features for an entity pair in a sentence.

use std::collections::BTreeMap;

use crate::align::WeightedMention;
use crate::corpus::{EntityMention, Sentence};
use crate::error::{Error, Result};

/// Context tokens taken left of the first and right of the second entity.
pub const CONTEXT_WINDOW: usize = 2;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    pub features: BTreeMap<String, f64>,
}

impl FeatureVector {
    fn add(&mut self, name: String) {
        *self.features.entry(name).or_insert(0.0) += 1.0;
    }

    pub fn get(&self, name: &str) -> f64 {
        self.features.get(name).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// `0` for adjacent entities, otherwise `floor(log2(d)) + 1`.
pub fn distance_bucket(d: usize) -> usize {
    if d == 0 {
        0
    } else {
        (usize::BITS - d.leading_zeros()) as usize
    }
}

/// Tokens of `s` in `[lo, hi)`, lowercased, with any other entity mention collapsed to `<TYPE>`.
fn masked(s: &Sentence, lo: usize, hi: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = lo;
    while i < hi {
        match s.mentions.iter().find(|m| m.span.start <= i && i < m.span.end) {
            Some(m) => {
                out.push(format!("<{}>", m.entity_type));
                i = m.span.end;
            }
            None => {
                out.push(s.tokens[i].to_lowercase());
                i += 1;
            }
        }
    }
    out
}

fn closest_pair<'a>(s: &'a Sentence, head: &str, tail: &str) -> Result<(&'a EntityMention, &'a EntityMention)> {
    let missing = |entity: &str| Error::MissingEntity {
        doc_id: s.doc_id.clone(),
        index: s.index,
        entity: entity.to_string(),
    };
    let heads: Vec<&EntityMention> = s.mentions.iter().filter(|m| m.canonical_id == head).collect();
    let tails: Vec<&EntityMention> = s.mentions.iter().filter(|m| m.canonical_id == tail).collect();
    if heads.is_empty() {
        return Err(missing(head));
    }
    if tails.is_empty() {
        return Err(missing(tail));
    }
    let mut best: Option<(usize, &EntityMention, &EntityMention)> = None;
    for h in &heads {
        for t in &tails {
            let gap = if h.span.end <= t.span.start {
                t.span.start - h.span.end
            } else {
                h.span.start.saturating_sub(t.span.end)
            };
            if best.is_none_or(|(g, _, _)| gap < g) {
                best = Some((gap, h, t));
            }
        }
    }
    let (_, h, t) = best.expect("non-empty");
    Ok((h, t))
}

/// Features of the mention's `(head, tail)` pair in `s`: between-entity tokens
/// and bigrams, positional context tokens, entity types, a log-scale distance
/// bucket and the textual order of head and tail.
pub fn featurize(m: &WeightedMention, s: &Sentence) -> Result<FeatureVector> {
    let (head, tail) = closest_pair(s, &m.instance.head_id, &m.instance.tail_id)?;
    let head_first = head.span.start < tail.span.start;
    let (first, second) = if head_first { (head, tail) } else { (tail, head) };

    let mut fv = FeatureVector::default();
    let between = masked(s, first.span.end, second.span.start);
    for tok in &between {
        fv.add(format!("B={tok}"));
    }
    for w in between.windows(2) {
        fv.add(format!("BB={}|{}", w[0], w[1]));
    }
    let left = masked(s, first.span.start.saturating_sub(CONTEXT_WINDOW), first.span.start);
    for (k, tok) in left.iter().rev().enumerate() {
        fv.add(format!("L{}={tok}", k + 1));
    }
    let right = masked(s, second.span.end, (second.span.end + CONTEXT_WINDOW).min(s.tokens.len()));
    for (k, tok) in right.iter().enumerate() {
        fv.add(format!("R{}={tok}", k + 1));
    }
    fv.add(format!("HT={}", head.entity_type));
    fv.add(format!("TT={}", tail.entity_type));
    fv.add(format!("DIST={}", distance_bucket(second.span.start - first.span.end)));
    fv.add(if head_first { "ORDER=head-first" } else { "ORDER=tail-first" }.to_string());
    Ok(fv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{Polarity, Provenance};
    use crate::corpus::{annotate_sentences, CasePolicy, Document, Gazetteer};
    use crate::knowledge::RelationInstance;
    use chrono::NaiveDate;

    fn sentence(text: &str) -> Sentence {
        let mut g = Gazetteer::new(CasePolicy::Sensitive);
        g.insert("Microsoft", "ORG", "msft").unwrap();
        g.insert("Facebook", "ORG", "fb").unwrap();
        g.insert("Seattle", "LOC", "sea").unwrap();
        let d = Document {
            id: "d".into(),
            source: String::new(),
            title: String::new(),
            body: text.into(),
            date: NaiveDate::from_ymd_opt(2016, 5, 26).unwrap(),
        };
        annotate_sentences(&d, &g).remove(0)
    }

    fn mention(head: &str, tail: &str) -> WeightedMention {
        WeightedMention {
            instance: RelationInstance::new("Lawsuit", head, tail, true),
            sentence_ref: crate::corpus::SentenceRef::new("d", 0),
            date: NaiveDate::from_ymd_opt(2016, 5, 26).unwrap(),
            weight: 1.0,
            polarity: Polarity::Positive,
            provenance: Provenance::Aligned,
        }
    }

    #[test]
    fn between_tokens_present() {
        let s = sentence("Microsoft has formed a partnership with Facebook.");
        let fv = featurize(&mention("msft", "fb"), &s).unwrap();
        for tok in ["has", "formed", "a", "partnership", "with"] {
            assert_eq!(fv.get(&format!("B={tok}")), 1.0, "{tok}");
        }
        assert_eq!(fv.get("BB=formed|a"), 1.0);
        assert_eq!(fv.get("R1=."), 1.0);
        assert_eq!(fv.get("DIST=3"), 1.0);
        assert_eq!(fv.get("ORDER=head-first"), 1.0);
        assert_eq!(fv, featurize(&mention("msft", "fb"), &s).unwrap());
    }

    #[test]
    fn adjacent_entities() {
        let s = sentence("Microsoft Facebook");
        let fv = featurize(&mention("fb", "msft"), &s).unwrap();
        assert!(fv.features.keys().all(|k| !k.starts_with("B=") && !k.starts_with("BB=")));
        assert_eq!(fv.get("DIST=0"), 1.0);
        assert_eq!(fv.get("ORDER=tail-first"), 1.0);
    }

    #[test]
    fn other_entities_are_masked() {
        let s = sentence("Microsoft , based in Seattle , sued Facebook");
        let fv = featurize(&mention("msft", "fb"), &s).unwrap();
        assert_eq!(fv.get("B=<LOC>"), 1.0);
        assert_eq!(fv.get("B=seattle"), 0.0);
    }

    #[test]
    fn missing_entity_is_an_error() {
        let s = sentence("Microsoft rallied.");
        assert!(matches!(
            featurize(&mention("msft", "fb"), &s),
            Err(Error::MissingEntity { .. })
        ));
    }

    #[test]
    fn buckets() {
        assert_eq!(
            [0, 1, 2, 3, 4, 7, 8, 100].map(distance_bucket),
            [0, 1, 2, 2, 3, 3, 4, 7]
        );
    }
}
