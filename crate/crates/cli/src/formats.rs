//! Tab-separated artifact bodies and their readers. Every reader skips blank
//! lines and `#` comment lines, so artifact headers pass through untouched.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;

use timeds_core::align::{LabelMap, MentionKey, TestMention};
use timeds_core::classifier::{EvalReport, ModelParams, Vocabulary};
use timeds_core::corpus::Sentence;
use timeds_core::knowledge::{EvidenceMap, InstanceEvidence, MatchedMention, Split, SupervisionKnowledge};
use timeds_core::popularity::{inspo_series, PopularitySeries, SeriesMap, TimeGrid, WindowSpec};
use timeds_core::{FoldAssignment, Polarity, Provenance, RelationInstance, RelationSet, SentenceRef, TestSet, WeightedMention};

const DATE: &str = "%Y-%m-%d";

/// Non-comment lines with their 1-based line numbers, split on tabs.
fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.trim_end_matches('\r');
        (!line.trim().is_empty() && !line.starts_with('#')).then(|| (i + 1, line.split('\t').collect()))
    })
}

fn want(line: usize, f: &[&str], n: usize) -> Result<()> {
    if f.len() != n {
        bail!("line {line}: expected {n} tab-separated fields, found {}", f.len());
    }
    Ok(())
}

fn num<T: std::str::FromStr>(line: usize, what: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| anyhow!("line {line}: bad {what} `{s}`"))
}

fn date(line: usize, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, DATE).map_err(|_| anyhow!("line {line}: bad date `{s}`"))
}

fn instance(line: usize, relations: &RelationSet, rel: &str, head: &str, tail: &str) -> Result<RelationInstance> {
    let directed = relations
        .is_directed(rel)
        .ok_or_else(|| anyhow!("line {line}: unknown relation `{rel}`"))?;
    Ok(RelationInstance::new(rel, head, tail, directed))
}

pub fn sentences_to_jsonl(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&serde_json::to_string(s).expect("sentence serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_sentences(text: &str) -> Result<Vec<Sentence>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("line {}: bad sentence record", i + 1)))
        .collect()
}

/// `relation, head_id, tail_id, rule_id, doc_id, index, date` per matched mention.
pub fn evidence_to_tsv(evidence: &EvidenceMap) -> String {
    let mut out = String::from("# relation\thead_id\ttail_id\trule_id\tdoc_id\tindex\tdate\n");
    for ev in evidence.values() {
        let i = &ev.instance;
        for m in &ev.matched_mentions {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                i.relation_type,
                i.head_id,
                i.tail_id,
                m.rule_id,
                m.sentence_ref.doc_id,
                m.sentence_ref.index,
                m.date.format(DATE)
            );
        }
    }
    out
}

pub fn parse_evidence(text: &str, relations: &RelationSet) -> Result<EvidenceMap> {
    let mut map = EvidenceMap::new();
    for (line, f) in rows(text) {
        want(line, &f, 7)?;
        let inst = instance(line, relations, f[0], f[1], f[2])?;
        let ev = map.entry(inst.clone()).or_insert_with(|| InstanceEvidence {
            instance: inst,
            matched_rule_ids: Default::default(),
            matched_mentions: Vec::new(),
        });
        ev.matched_rule_ids.insert(f[3].to_string());
        ev.matched_mentions.push(MatchedMention {
            sentence_ref: SentenceRef::new(f[4], num(line, "sentence index", f[5])?),
            date: date(line, f[6])?,
            rule_id: f[3].to_string(),
        });
    }
    for ev in map.values_mut() {
        ev.matched_mentions.sort();
    }
    Ok(map)
}

/// `relation, head_id, tail_id, confidence, rule_count, mention_count, split`.
pub fn knowledge_to_tsv(k: &SupervisionKnowledge) -> String {
    let mut out = format!(
        "# z_rule={} z_m={}\n# relation\thead_id\ttail_id\tconfidence\trule_count\tmention_count\tsplit\n",
        k.z_rule, k.z_m
    );
    for s in &k.instances {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.6}\t{}\t{}\t{}",
            s.instance.relation_type,
            s.instance.head_id,
            s.instance.tail_id,
            s.confidence,
            s.rule_count,
            s.mention_count,
            s.split.as_str()
        );
    }
    out
}

/// Instances by split tag, in file order.
pub fn parse_knowledge(text: &str, relations: &RelationSet) -> Result<(Vec<RelationInstance>, Vec<RelationInstance>)> {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (line, f) in rows(text) {
        want(line, &f, 7)?;
        let inst = instance(line, relations, f[0], f[1], f[2])?;
        match Split::parse(f[6]) {
            Some(Split::Train) => train.push(inst),
            Some(Split::Test) => test.push(inst),
            None => bail!("line {line}: bad split tag `{}`", f[6]),
        }
    }
    Ok((train, test))
}

/// One row per instance and grid day: `relation, head_id, tail_id, date, windowed_count, inspo`.
pub fn series_to_tsv(series: &SeriesMap) -> String {
    let mut out = String::from("# relation\thead_id\ttail_id\tdate\twindowed_count\tinspo\n");
    for s in series.values() {
        for (i, d) in s.grid.days().enumerate() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{:.6}",
                s.instance.relation_type,
                s.instance.head_id,
                s.instance.tail_id,
                d.format(DATE),
                s.counts[i],
                s.inspo[i]
            );
        }
    }
    out
}

/// Rebuilds series from the windowed counts; popularity is recomputed exactly
/// rather than read back from the rounded column.
pub fn parse_series(text: &str, relations: &RelationSet, w: &WindowSpec) -> Result<SeriesMap> {
    let mut raw: BTreeMap<RelationInstance, Vec<(NaiveDate, u64)>> = BTreeMap::new();
    for (line, f) in rows(text) {
        want(line, &f, 6)?;
        let inst = instance(line, relations, f[0], f[1], f[2])?;
        raw.entry(inst)
            .or_default()
            .push((date(line, f[3])?, num(line, "count", f[4])?));
    }
    let mut out = SeriesMap::new();
    for (inst, mut days) in raw {
        days.sort();
        let grid = TimeGrid::new(days[0].0, days[days.len() - 1].0)?;
        if grid.len() != days.len() {
            bail!("series for {inst} does not cover its grid day by day");
        }
        let counts: Vec<u64> = days.iter().map(|d| d.1).collect();
        let body = inspo_series(&counts, w).with_context(|| format!("series for {inst}"))?;
        out.insert(
            inst.clone(),
            PopularitySeries {
                instance: inst,
                grid,
                window: *w,
                counts,
                omega_prime: body.omega_prime,
                inspo: body.inspo,
            },
        );
    }
    Ok(out)
}

fn mention_fields(m: &WeightedMention) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\t{}",
        m.instance.relation_type,
        m.instance.head_id,
        m.instance.tail_id,
        m.sentence_ref.doc_id,
        m.sentence_ref.index,
        m.date.format(DATE),
        m.weight,
        m.polarity.as_str(),
        m.provenance.as_str()
    )
}

fn parse_mention(line: usize, f: &[&str], relations: &RelationSet) -> Result<WeightedMention> {
    Ok(WeightedMention {
        instance: instance(line, relations, f[0], f[1], f[2])?,
        sentence_ref: SentenceRef::new(f[3], num(line, "sentence index", f[4])?),
        date: date(line, f[5])?,
        weight: num(line, "weight", f[6])?,
        polarity: Polarity::parse(f[7]).ok_or_else(|| anyhow!("line {line}: bad polarity `{}`", f[7]))?,
        provenance: Provenance::parse(f[8]).ok_or_else(|| anyhow!("line {line}: bad provenance `{}`", f[8]))?,
    })
}

const MANIFEST_COLUMNS: &str = "relation\thead_id\ttail_id\tdoc_id\tindex\tdate\tweight\tpolarity\tprovenance";

pub fn manifest_to_tsv(ms: &[WeightedMention]) -> String {
    let mut out = format!("# {MANIFEST_COLUMNS}\n");
    for m in ms {
        out.push_str(&mention_fields(m));
        out.push('\n');
    }
    out
}

pub fn parse_manifest(text: &str, relations: &RelationSet) -> Result<Vec<WeightedMention>> {
    rows(text)
        .map(|(line, f)| {
            want(line, &f, 9)?;
            parse_mention(line, &f, relations)
        })
        .collect()
}

/// Manifest columns plus the candidate and gold polarity.
pub fn test_set_to_tsv(ts: &TestSet) -> String {
    let mut out = format!("# {MANIFEST_COLUMNS}\tcandidate\tgold\n");
    for t in &ts.items {
        let _ = writeln!(out, "{}\t{}\t{}", mention_fields(&t.mention), t.candidate.as_str(), t.gold.as_str());
    }
    out
}

pub fn parse_test_set(text: &str, relations: &RelationSet) -> Result<TestSet> {
    let items = rows(text)
        .map(|(line, f)| {
            want(line, &f, 11)?;
            let pol = |s: &str| Polarity::parse(s).ok_or_else(|| anyhow!("line {line}: bad polarity `{s}`"));
            Ok(TestMention {
                mention: parse_mention(line, &f, relations)?,
                candidate: pol(f[9])?,
                gold: pol(f[10])?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TestSet { items })
}

pub fn folds_to_tsv(f: &FoldAssignment) -> String {
    let mut out = format!("# k={}\n# item\tfold\n", f.k);
    for (i, fold) in f.folds.iter().enumerate() {
        let _ = writeln!(out, "{i}\t{fold}");
    }
    out
}

pub fn parse_folds(text: &str) -> Result<FoldAssignment> {
    let k = text
        .lines()
        .find_map(|l| l.strip_prefix("# k="))
        .ok_or_else(|| anyhow!("fold file lacks a `# k=` line"))?
        .trim()
        .parse()
        .map_err(|_| anyhow!("bad fold count"))?;
    let mut folds = Vec::new();
    for (line, f) in rows(text) {
        want(line, &f, 2)?;
        if num::<usize>(line, "item", f[0])? != folds.len() {
            bail!("line {line}: fold items out of order");
        }
        let fold: usize = num(line, "fold", f[1])?;
        if fold >= k {
            bail!("line {line}: fold {fold} outside 0..{k}");
        }
        folds.push(fold);
    }
    Ok(FoldAssignment { k, folds })
}

/// Label file: `relation, head_id, tail_id, doc_id, index, polarity`.
pub fn parse_labels(text: &str, relations: &RelationSet) -> Result<LabelMap> {
    let mut out = LabelMap::new();
    for (line, f) in rows(text) {
        want(line, &f, 6)?;
        let key = MentionKey {
            instance: instance(line, relations, f[0], f[1], f[2])?,
            sentence_ref: SentenceRef::new(f[3], num(line, "sentence index", f[4])?),
        };
        let p = Polarity::parse(f[5]).ok_or_else(|| anyhow!("line {line}: bad polarity `{}`", f[5]))?;
        out.insert(key, p);
    }
    Ok(out)
}

/// Schedule: a `thresholds` line, then `round, threshold, shuffle_seed, manifest` rows.
pub fn schedule_to_tsv(rounds: &[(f64, u64, String)]) -> String {
    let ts: Vec<String> = rounds.iter().map(|r| format!("{}", r.0)).collect();
    let mut out = format!("thresholds\t{}\n# round\tthreshold\tshuffle_seed\tmanifest\n", ts.join(","));
    for (i, (t, seed, path)) in rounds.iter().enumerate() {
        let _ = writeln!(out, "{}\t{t}\t{seed}\t{path}", i + 1);
    }
    out
}

pub fn parse_schedule(text: &str) -> Result<Vec<(f64, u64, String)>> {
    let mut out = Vec::new();
    for (line, f) in rows(text) {
        if f[0] == "thresholds" {
            continue;
        }
        want(line, &f, 4)?;
        out.push((num(line, "threshold", f[1])?, num(line, "seed", f[2])?, f[3].to_string()));
    }
    Ok(out)
}

const CHECKPOINT_FORMAT: u32 = 1;

/// `format`, `classes`, `bias` lines, then one `feature` row per vocabulary
/// entry with a dense weight per class. Floats use shortest round-trip form.
pub fn checkpoint_to_tsv(p: &ModelParams) -> String {
    let mut out = format!("format\t{CHECKPOINT_FORMAT}\nclasses\t{}\nbias", p.classes.join("\t"));
    for b in &p.bias {
        let _ = write!(out, "\t{b}");
    }
    out.push('\n');
    let k = p.n_classes();
    for (f, name) in p.vocab.names().iter().enumerate() {
        out.push_str("feature\t");
        out.push_str(name);
        for w in &p.weights[f * k..(f + 1) * k] {
            let _ = write!(out, "\t{w}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_checkpoint(text: &str) -> Result<ModelParams> {
    let mut classes: Option<Vec<String>> = None;
    let mut bias = Vec::new();
    let mut names = Vec::new();
    let mut weights = Vec::new();
    for (line, f) in rows(text) {
        match f[0] {
            "format" => {
                let v: u32 = num(line, "format version", f.get(1).copied().unwrap_or(""))?;
                if v != CHECKPOINT_FORMAT {
                    bail!("line {line}: unsupported checkpoint format {v}");
                }
            }
            "classes" => classes = Some(f[1..].iter().map(|s| s.to_string()).collect()),
            "bias" => bias = f[1..].iter().map(|s| num(line, "bias", s)).collect::<Result<_>>()?,
            "feature" => {
                let k = classes.as_ref().map(Vec::len).ok_or_else(|| anyhow!("line {line}: feature before classes"))?;
                want(line, &f, k + 2)?;
                names.push(f[1].to_string());
                for s in &f[2..] {
                    weights.push(num(line, "weight", s)?);
                }
            }
            other => bail!("line {line}: unknown checkpoint row `{other}`"),
        }
    }
    let classes = classes.ok_or_else(|| anyhow!("checkpoint lacks a classes line"))?;
    if bias.len() != classes.len() {
        bail!("checkpoint has {} biases for {} classes", bias.len(), classes.len());
    }
    let vocab: Vocabulary = names.into_iter().collect();
    Ok(ModelParams {
        classes,
        vocab,
        weights,
        bias,
    })
}

pub const REPORT_COLUMNS: &str = "row,name,precision,recall,f1,support,score";

/// Per-class, macro and micro rows, then the PR curve as `pr` rows.
pub fn report_to_csv(r: &EvalReport) -> String {
    let mut out = format!("{REPORT_COLUMNS}\n");
    for c in &r.per_class {
        let _ = writeln!(out, "class,{},{:.6},{:.6},{:.6},{},", c.class, c.precision, c.recall, c.f1, c.support);
    }
    let _ = writeln!(out, "macro,all,{:.6},{:.6},{:.6},,", r.macro_precision, r.macro_recall, r.macro_f1);
    let _ = writeln!(out, "micro,all,{:.6},{:.6},{:.6},,", r.micro_precision, r.micro_recall, r.micro_f1);
    for (i, p) in r.pr_curve.iter().enumerate() {
        let _ = writeln!(out, "pr,{},{:.6},{:.6},,,{:.6}", i + 1, p.precision, p.recall, p.score);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use timeds_core::align::TestMention;

    fn rels() -> RelationSet {
        RelationSet::news_default()
    }

    fn mention(weight: f64) -> WeightedMention {
        WeightedMention {
            instance: RelationInstance::new("Partnership", "b", "a", false),
            sentence_ref: SentenceRef::new("d1", 2),
            date: NaiveDate::from_ymd_opt(2016, 5, 26).unwrap(),
            weight,
            polarity: Polarity::Positive,
            provenance: Provenance::Aligned,
        }
    }

    #[test]
    fn manifest_round_trip_rounds_weight() {
        let text = manifest_to_tsv(&[mention(1.0 / 3.0)]);
        assert!(text.contains("\t0.333333\t"));
        let back = parse_manifest(&text, &rels()).unwrap();
        assert_eq!(back[0].instance.head_id, "a");
        assert_eq!(back[0].weight, 0.333333);
    }

    #[test]
    fn test_set_and_folds_round_trip() {
        let ts = TestSet {
            items: vec![TestMention {
                mention: mention(0.5),
                candidate: Polarity::Positive,
                gold: Polarity::Negative,
            }],
        };
        assert_eq!(parse_test_set(&test_set_to_tsv(&ts), &rels()).unwrap(), ts);
        let f = FoldAssignment { k: 3, folds: vec![2, 0, 1, 0] };
        assert_eq!(parse_folds(&folds_to_tsv(&f)).unwrap(), f);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut p = ModelParams::zeros(vec!["A".into(), "NO_RELATION".into()]);
        p.extend_vocab(["B=x", "DIST"]);
        p.weights = vec![0.1, -1e-17, 3.0 / 7.0, f64::MIN_POSITIVE];
        p.bias = vec![0.25, -0.125];
        assert_eq!(parse_checkpoint(&checkpoint_to_tsv(&p)).unwrap(), p);
        assert!(parse_checkpoint("format\t2\n").is_err());
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let e = parse_manifest("# c\nA\tb\n", &rels()).unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = parse_labels("Nope\ta\tb\td\t0\tpositive\n", &rels()).unwrap_err().to_string();
        assert!(e.contains("unknown relation"), "{e}");
    }
}
