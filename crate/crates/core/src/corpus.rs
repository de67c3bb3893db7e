//! Corpus ingestion: timestamped document records, sentence segmentation,
//! tokenization and longest-match gazetteer entity annotation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The configured set of entity type labels (e.g. ORG, PER, LOC).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeSet(BTreeSet<String>);

impl TypeSet {
    pub fn new<I, S>(types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TypeSet(types.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, ty: &str) -> bool {
        self.0.contains(ty)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for TypeSet {
    fn default() -> Self {
        TypeSet::new(["ORG", "PER", "LOC"])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub source: String,
    pub title: String,
    pub body: String,
    pub date: NaiveDate,
}

/// Identifies a sentence by its document and ordinal within the document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceRef {
    pub doc_id: String,
    pub index: usize,
}

impl SentenceRef {
    pub fn new(doc_id: impl Into<String>, index: usize) -> Self {
        SentenceRef {
            doc_id: doc_id.into(),
            index,
        }
    }
}

impl fmt::Display for SentenceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.doc_id, self.index)
    }
}

/// Half-open token interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    pub entity_type: String,
    pub span: Span,
    pub canonical_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
    pub mentions: Vec<EntityMention>,
    pub date: NaiveDate,
}

impl Sentence {
    pub fn sentence_ref(&self) -> SentenceRef {
        SentenceRef::new(self.doc_id.clone(), self.index)
    }

    /// Mentions resolving to `canonical_id`, in span order.
    pub fn mentions_of<'a>(&'a self, canonical_id: &'a str) -> impl Iterator<Item = &'a EntityMention> {
        self.mentions
            .iter()
            .filter(move |m| m.canonical_id == canonical_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CasePolicy {
    #[default]
    Sensitive,
    Insensitive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerEntry {
    pub canonical_id: String,
    pub entity_type: String,
}

#[derive(Debug, Default, Clone)]
struct TrieNode {
    children: HashMap<String, usize>,
    entry: Option<usize>,
}

/// Surface-form dictionary with a token trie for longest-match lookup.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    case: CasePolicy,
    entries: Vec<(String, GazetteerEntry)>,
    id_types: BTreeMap<String, String>,
    nodes: Vec<TrieNode>,
}

impl Gazetteer {
    pub fn new(case: CasePolicy) -> Self {
        Gazetteer {
            case,
            entries: Vec::new(),
            id_types: BTreeMap::new(),
            nodes: vec![TrieNode::default()],
        }
    }

    fn normalize(&self, token: &str) -> String {
        match self.case {
            CasePolicy::Sensitive => token.to_string(),
            CasePolicy::Insensitive => token.to_lowercase(),
        }
    }

    pub fn insert(&mut self, surface: &str, entity_type: &str, canonical_id: &str) -> std::result::Result<(), String> {
        let tokens = tokenize(surface);
        if tokens.is_empty() {
            return Err("empty surface form".into());
        }
        if canonical_id.is_empty() {
            return Err(format!("empty canonical id for `{surface}`"));
        }
        match self.id_types.get(canonical_id) {
            Some(t) if t != entity_type => {
                return Err(format!(
                    "canonical id `{canonical_id}` already has type {t}, not {entity_type}"
                ))
            }
            _ => {}
        }
        let mut node = 0;
        for tok in &tokens {
            let key = self.normalize(tok);
            node = match self.nodes[node].children.get(&key) {
                Some(&next) => next,
                None => {
                    self.nodes.push(TrieNode::default());
                    let next = self.nodes.len() - 1;
                    self.nodes[node].children.insert(key, next);
                    next
                }
            };
        }
        if self.nodes[node].entry.is_some() {
            return Err(format!("duplicate surface form `{surface}`"));
        }
        self.nodes[node].entry = Some(self.entries.len());
        self.entries.push((
            surface.to_string(),
            GazetteerEntry {
                canonical_id: canonical_id.to_string(),
                entity_type: entity_type.to_string(),
            },
        ));
        self.id_types
            .insert(canonical_id.to_string(), entity_type.to_string());
        Ok(())
    }

    /// Parses `surface<TAB>type<TAB>canonical_id` lines; `#` starts a comment line.
    pub fn from_tsv(text: &str, types: &TypeSet, case: CasePolicy) -> Result<Self> {
        let mut gaz = Gazetteer::new(case);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Gazetteer {
                    line: i + 1,
                    msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let (surface, ty, id) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
            if !types.contains(ty) {
                return Err(Error::Gazetteer {
                    line: i + 1,
                    msg: format!("unknown entity type `{ty}`"),
                });
            }
            gaz.insert(surface, ty, id)
                .map_err(|msg| Error::Gazetteer { line: i + 1, msg })?;
        }
        Ok(gaz)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (surface, e) in &self.entries {
            out.push_str(&format!("{surface}\t{}\t{}\n", e.entity_type, e.canonical_id));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn type_of(&self, canonical_id: &str) -> Option<&str> {
        self.id_types.get(canonical_id).map(String::as_str)
    }

    /// Longest-match, left-to-right, non-overlapping scan over `tokens`.
    pub fn find_mentions(&self, tokens: &[String]) -> Vec<EntityMention> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let mut node = 0;
            let mut best: Option<(usize, usize)> = None;
            for (j, tok) in tokens[i..].iter().enumerate() {
                match self.nodes[node].children.get(&self.normalize(tok)) {
                    Some(&next) => {
                        node = next;
                        if let Some(e) = self.nodes[node].entry {
                            best = Some((i + j + 1, e));
                        }
                    }
                    None => break,
                }
            }
            match best {
                Some((end, e)) => {
                    let entry = &self.entries[e].1;
                    out.push(EntityMention {
                        surface: tokens[i..end].join(" "),
                        entity_type: entry.entity_type.clone(),
                        span: Span { start: i, end },
                        canonical_id: entry.canonical_id.clone(),
                    });
                    i = end;
                }
                None => i += 1,
            }
        }
        out
    }
}

const PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '"', '\'', '(', ')', '[', ']', '{', '}'];

/// Splits on whitespace, then separates punctuation into single-character
/// tokens. A `.` or `,` between two digits stays inside the token (`4.4`, `1,000`).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut cur = String::new();
        for (k, &c) in chars.iter().enumerate() {
            let numeric_sep = (c == '.' || c == ',')
                && k > 0
                && k + 1 < chars.len()
                && chars[k - 1].is_ascii_digit()
                && chars[k + 1].is_ascii_digit();
            if PUNCT.contains(&c) && !numeric_sep {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            tokens.push(cur);
        }
    }
    tokens
}

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "inc", "corp", "co", "ltd", "plc", "llc",
    "vs", "v", "no", "gov", "sen", "rep", "gen", "jan", "feb", "mar", "apr", "jun", "jul", "aug",
    "sep", "sept", "oct", "nov", "dec", "u.s", "u.k", "e.g", "i.e",
];

fn is_abbreviation(word: &str) -> bool {
    let w = word.trim_start_matches(|c: char| !c.is_alphanumeric());
    let lower = w.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // single capital initial, e.g. "J."
    let mut chars = w.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase())
}

/// Splits text on `.`, `!` or `?` followed by whitespace or end of text,
/// except after a known abbreviation. Closing quotes/brackets stay with the
/// sentence they close.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut k = 0;
    while k < chars.len() {
        let (pos, c) = chars[k];
        if matches!(c, '.' | '!' | '?') {
            let mut end = k + 1;
            while end < chars.len() && matches!(chars[end].1, '"' | '\'' | ')' | ']') {
                end += 1;
            }
            let at_boundary = end == chars.len() || chars[end].1.is_whitespace();
            let abbreviated = c == '.' && {
                let word_start = text[..pos]
                    .rfind(char::is_whitespace)
                    .map(|p| p + 1)
                    .unwrap_or(0);
                is_abbreviation(&text[word_start.max(start)..pos])
            };
            if at_boundary && !abbreviated {
                let byte_end = if end == chars.len() { text.len() } else { chars[end].0 };
                push_trimmed(&mut sentences, &text[start..byte_end]);
                start = byte_end;
                k = end;
                continue;
            }
        }
        k += 1;
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Deserialize, Serialize)]
pub struct CorpusRecord {
    pub id: Option<String>,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub body: Option<String>,
    pub timestamp: Option<String>,
}

/// Parses the date prefix (`YYYY-MM-DD`) of an ISO-8601 timestamp.
pub fn parse_day(ts: &str) -> Option<NaiveDate> {
    let prefix = ts.trim().get(..10)?;
    NaiveDate::parse_from_str(prefix, "%Y-%m-%d").ok()
}

/// Reads line-delimited JSON records into documents. Blank lines and lines
/// starting with `#` are skipped. Malformed records, bad timestamps and
/// duplicate ids are reported and dropped; the first occurrence of an id wins.
pub fn ingest_documents<R: BufRead>(reader: R) -> std::io::Result<(Vec<Document>, Vec<Diagnostic>)> {
    let mut docs = Vec::new();
    let mut diags = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut reject = |message: String| diags.push(Diagnostic { line: lineno, message });
        let rec: CorpusRecord = match serde_json::from_str(trimmed) {
            Ok(r) => r,
            Err(e) => {
                reject(format!("malformed record: {e}"));
                continue;
            }
        };
        let id = match rec.id {
            Some(id) if !id.trim().is_empty() => id,
            _ => {
                reject("missing document id".into());
                continue;
            }
        };
        let date = match rec.timestamp.as_deref() {
            None => {
                reject(format!("document {id}: missing timestamp"));
                continue;
            }
            Some(ts) => match parse_day(ts) {
                Some(d) => d,
                None => {
                    reject(format!("document {id}: unparseable timestamp `{ts}`"));
                    continue;
                }
            },
        };
        if !seen.insert(id.clone()) {
            reject(format!("duplicate document id `{id}` (first occurrence kept)"));
            continue;
        }
        docs.push(Document {
            id,
            source: rec.source.unwrap_or_default(),
            title: rec.title.unwrap_or_default(),
            body: rec.body.unwrap_or_default(),
            date,
        });
    }
    Ok((docs, diags))
}

pub fn document_to_record(doc: &Document) -> String {
    let rec = CorpusRecord {
        id: Some(doc.id.clone()),
        source: Some(doc.source.clone()),
        title: Some(doc.title.clone()),
        body: Some(doc.body.clone()),
        timestamp: Some(doc.date.format("%Y-%m-%d").to_string()),
    };
    serde_json::to_string(&rec).expect("record serializes")
}

/// Segments title then body into sentences and annotates each with
/// gazetteer mentions. Sentence indices run over title and body together.
pub fn annotate_sentences(doc: &Document, gaz: &Gazetteer) -> Vec<Sentence> {
    split_sentences(&doc.title)
        .into_iter()
        .chain(split_sentences(&doc.body))
        .enumerate()
        .map(|(index, text)| {
            let tokens = tokenize(&text);
            let mentions = gaz.find_mentions(&tokens);
            Sentence {
                doc_id: doc.id.clone(),
                index,
                text,
                tokens,
                mentions,
                date: doc.date,
            }
        })
        .collect()
}

/// Annotates documents in parallel; output keeps document order.
pub fn annotate_corpus(docs: &[Document], gaz: &Gazetteer) -> Vec<Sentence> {
    docs.par_iter()
        .map(|d| annotate_sentences(d, gaz))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaz(entries: &[(&str, &str, &str)]) -> Gazetteer {
        let mut g = Gazetteer::new(CasePolicy::Sensitive);
        for (s, t, id) in entries {
            g.insert(s, t, id).unwrap();
        }
        g
    }

    fn doc(body: &str) -> Document {
        Document {
            id: "d1".into(),
            source: "test".into(),
            title: String::new(),
            body: body.into(),
            date: NaiveDate::from_ymd_opt(2016, 5, 26).unwrap(),
        }
    }

    #[test]
    fn ingest_maps_fields() {
        let input = r#"{"id":"d1","source":"wire","title":"Microsoft news","body":"...","timestamp":"2016-05-26"}"#;
        let (docs, diags) = ingest_documents(input.as_bytes()).unwrap();
        assert!(diags.is_empty());
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].id, "d1");
        assert_eq!(docs[0].title, "Microsoft news");
        assert_eq!(docs[0].date, NaiveDate::from_ymd_opt(2016, 5, 26).unwrap());
    }

    #[test]
    fn ingest_rejects_invalid_date() {
        let input = r#"{"id":"d1","title":"t","body":"b","timestamp":"2016-13-40"}"#;
        let (docs, diags) = ingest_documents(input.as_bytes()).unwrap();
        assert!(docs.is_empty());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 1);
        assert!(diags[0].message.contains("2016-13-40"));
    }

    #[test]
    fn ingest_keeps_first_duplicate() {
        let input = "{\"id\":\"d1\",\"title\":\"first\",\"timestamp\":\"2016-01-01\"}\n\
                     {\"id\":\"d1\",\"title\":\"second\",\"timestamp\":\"2016-01-02\"}\n";
        let (docs, diags) = ingest_documents(input.as_bytes()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].title, "first");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 2);
        assert!(diags[0].message.contains("duplicate"));
    }

    #[test]
    fn ingest_reports_missing_timestamp_and_garbage() {
        let input = "{\"id\":\"d1\",\"title\":\"t\"}\nnot json\n{\"id\":\"d2\",\"timestamp\":\"2016-02-03T10:00:00Z\"}\n";
        let (docs, diags) = ingest_documents(input.as_bytes()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].date, NaiveDate::from_ymd_opt(2016, 2, 3).unwrap());
        assert_eq!(diags.iter().map(|d| d.line).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn annotates_partnership_sentence() {
        let g = gaz(&[("Microsoft", "ORG", "msft"), ("Facebook", "ORG", "fb")]);
        let s = annotate_sentences(&doc("Microsoft has formed a partnership with Facebook."), &g);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].mentions.len(), 2);
        assert!(s[0].mentions.iter().all(|m| m.entity_type == "ORG"));
        assert_eq!(s[0].mentions[1].span, Span { start: 6, end: 7 });
    }

    #[test]
    fn longest_match_wins() {
        let g = gaz(&[
            ("Manchester", "LOC", "manchester"),
            ("Manchester United", "ORG", "manutd"),
        ]);
        let s = annotate_sentences(&doc("Manchester United won."), &g);
        assert_eq!(s[0].mentions.len(), 1);
        assert_eq!(s[0].mentions[0].surface, "Manchester United");
        assert_eq!(s[0].mentions[0].entity_type, "ORG");
    }

    #[test]
    fn empty_document_yields_nothing() {
        let g = gaz(&[("Microsoft", "ORG", "msft")]);
        assert!(annotate_sentences(&doc(""), &g).is_empty());
    }

    #[test]
    fn title_is_first_sentence() {
        let g = gaz(&[("Microsoft", "ORG", "msft")]);
        let mut d = doc("Shares rose. Microsoft declined to comment!");
        d.title = "Microsoft news".into();
        let s = annotate_sentences(&d, &g);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].text, "Microsoft news");
        assert_eq!(s[2].index, 2);
        assert!(s.iter().all(|x| x.date == d.date));
    }

    #[test]
    fn splitter_respects_abbreviations_and_numbers() {
        let s = split_sentences("Apple Inc. paid $ 4.4 billion to Mr. Smith. It closed? Yes!");
        assert_eq!(
            s,
            vec!["Apple Inc. paid $ 4.4 billion to Mr. Smith.", "It closed?", "Yes!"]
        );
    }

    #[test]
    fn tokenizer_separates_punctuation() {
        assert_eq!(
            tokenize("Google's deal, worth 1,000.5 (approx.)"),
            vec!["Google", "'", "s", "deal", ",", "worth", "1,000.5", "(", "approx", ".", ")"]
        );
    }

    #[test]
    fn case_insensitive_policy() {
        let types = TypeSet::default();
        let g = Gazetteer::from_tsv("# c\nMicrosoft\tORG\tmsft\n", &types, CasePolicy::Insensitive).unwrap();
        let m = g.find_mentions(&tokenize("MICROSOFT rallies"));
        assert_eq!(m.len(), 1);
        let g = Gazetteer::from_tsv("Microsoft\tORG\tmsft\n", &types, CasePolicy::Sensitive).unwrap();
        assert!(g.find_mentions(&tokenize("MICROSOFT rallies")).is_empty());
    }

    #[test]
    fn gazetteer_validation() {
        let types = TypeSet::default();
        assert!(Gazetteer::from_tsv("X\tXYZ\tx\n", &types, CasePolicy::Sensitive).is_err());
        assert!(Gazetteer::from_tsv(" \tORG\tx\n", &types, CasePolicy::Sensitive).is_err());
        assert!(Gazetteer::from_tsv("A\tORG\tx\nB\tPER\tx\n", &types, CasePolicy::Sensitive).is_err());
        assert!(Gazetteer::from_tsv("A\tORG\n", &types, CasePolicy::Sensitive).is_err());
        let g = Gazetteer::from_tsv("A\tORG\tx\nAlpha\tORG\tx\n", &types, CasePolicy::Sensitive).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.type_of("x"), Some("ORG"));
    }
}
