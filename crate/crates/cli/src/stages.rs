//! One function per subcommand. Each reads its inputs from the artifact
//! store and writes its outputs back.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;

use timeds_core::align::{
    align, build_test_set, partition_folds, with_negatives, LabelMap, NegativeOptions, SentenceLookup, SlotTypes,
};
use timeds_core::classifier::{self, ModelParams};
use timeds_core::corpus::{annotate_corpus, ingest_documents, Gazetteer, Sentence};
use timeds_core::knowledge::build_and_split;
use timeds_core::popularity::{series_for_instances, TimeGrid};
use timeds_core::strategies::{build_curriculum, hard_filter};
use timeds_core::synth::{generate_corpus, label_map, noise_ratio, parse_oracle};
use timeds_core::workflow::{extract_evidence, slot_types, Params};
use timeds_core::{HardFilterSpec, Polarity, RelationInstance, RelationSet, RuleSet, TypeSet, WeightedMention};

use crate::artifact::Store;
use crate::config::{Config, GoldFormat};
use crate::formats::*;

pub const CORPUS: &str = "corpus.jsonl";
pub const GAZETTEER: &str = "gazetteer.tsv";
pub const RULES: &str = "rules.txt";
pub const ORACLE: &str = "oracle.tsv";
pub const INGEST: &str = "ingest.tsv";
pub const SENTENCES: &str = "sentences.jsonl";
pub const MATCHES: &str = "matches.tsv";
pub const KNOWLEDGE: &str = "knowledge.tsv";
pub const SERIES: &str = "series.tsv";
pub const MANIFEST: &str = "manifest.tsv";
pub const TEST_SET: &str = "test_set.tsv";
pub const FOLDS: &str = "folds.tsv";
pub const SCHEDULE: &str = "schedule.tsv";
pub const EVAL: &str = "eval.tsv";
pub const NOISE: &str = "noise.tsv";
pub const REPORT: &str = "report.csv";

pub fn filter_name(theta: f64) -> String {
    format!("filter-{theta:.3}.tsv")
}

pub fn round_name(round: usize) -> String {
    format!("curriculum-r{round}.tsv")
}

/// A trained model: its label and the artifact it is stored in.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelId {
    OneShot(f64),
    Round(usize, f64),
}

impl ModelId {
    pub fn label(&self) -> String {
        match self {
            ModelId::OneShot(t) => format!("oneshot-{t:.3}"),
            ModelId::Round(r, _) => format!("curriculum-r{r}"),
        }
    }

    pub fn threshold(&self) -> f64 {
        match *self {
            ModelId::OneShot(t) | ModelId::Round(_, t) => t,
        }
    }

    pub fn checkpoint(&self) -> String {
        format!("model-{}.ckpt", self.label())
    }

    pub fn eval_report(&self) -> String {
        format!("eval-{}.csv", self.label())
    }
}

pub struct Ctx {
    pub cfg: Config,
    pub store: Store,
    pub relations: RelationSet,
    pub types: TypeSet,
    pub params: Params,
}

impl Ctx {
    pub fn new(cfg: Config) -> Result<Ctx> {
        let params = cfg.params()?;
        let store = Store::open(&cfg.out(), &cfg.hash(), params.seed)?;
        Ok(Ctx {
            relations: cfg.relations()?,
            types: cfg.types()?,
            params,
            store,
            cfg,
        })
    }

    /// User-supplied input file, or the `synth` output of the same name.
    fn input(&self, key: &str, synth_name: &str) -> Result<String> {
        match self.cfg.path(key) {
            Some(p) => std::fs::read_to_string(&p)
                .with_context(|| format!("config key `{key}`: cannot read {}", p.display())),
            None => self.store.read(synth_name, "synth"),
        }
    }

    fn rules(&self) -> Result<RuleSet> {
        Ok(RuleSet::parse(&self.input("rules", RULES)?, &self.relations, &self.types)?)
    }

    fn sentences(&self) -> Result<Vec<Sentence>> {
        parse_sentences(&self.store.read(SENTENCES, "ingest")?)
    }

    fn grid(&self) -> Result<TimeGrid> {
        let text = self.store.read(INGEST, "ingest")?;
        let field = |name: &str| -> Result<NaiveDate> {
            let v = text
                .lines()
                .find_map(|l| l.strip_prefix(name).and_then(|r| r.strip_prefix('\t')))
                .ok_or_else(|| anyhow!("{INGEST} lacks a `{name}` row"))?;
            Ok(NaiveDate::parse_from_str(v.trim(), "%Y-%m-%d")?)
        };
        Ok(TimeGrid::new(field("start")?, field("end")?)?)
    }

    fn knowledge(&self) -> Result<(Vec<RelationInstance>, Vec<RelationInstance>)> {
        parse_knowledge(&self.store.read(KNOWLEDGE, "knowledge")?, &self.relations)
    }

    fn manifest(&self, name: &str, producer: &str) -> Result<Vec<WeightedMention>> {
        parse_manifest(&self.store.read(name, producer)?, &self.relations)
    }

    fn gold(&self) -> Result<LabelMap> {
        let text = self.input("gold", ORACLE)?;
        match self.cfg.gold_format()? {
            GoldFormat::Oracle => Ok(label_map(&parse_oracle(&text, &self.relations)?)),
            GoldFormat::Labels => parse_labels(&text, &self.relations),
        }
    }

    fn slot_types(&self) -> Result<SlotTypes> {
        Ok(slot_types(&self.rules()?))
    }

    fn classes(&self) -> Result<Vec<String>> {
        Ok(classifier::class_list(self.slot_types()?.keys().map(String::as_str)))
    }

    /// Models `train` produces under the current config.
    pub fn models(&self) -> Result<Vec<ModelId>> {
        let mode = self.cfg.train_mode()?;
        let mut out = Vec::new();
        if mode.one_shot() {
            out.extend(self.cfg.filter_thetas()?.into_iter().map(ModelId::OneShot));
        }
        if mode.curriculum() {
            out.extend(self.params.curriculum.iter().enumerate().map(|(i, &t)| ModelId::Round(i + 1, t)));
        }
        Ok(out)
    }
}

pub fn synth(ctx: &Ctx) -> Result<()> {
    let corpus = generate_corpus(&ctx.cfg.synth()?)?;
    ctx.store.write(CORPUS, "corpus", &corpus.corpus_jsonl())?;
    ctx.store.write(GAZETTEER, "gazetteer", &corpus.gazetteer.to_tsv())?;
    ctx.store.write(RULES, "rules", &corpus.rules_text)?;
    ctx.store.write(ORACLE, "oracle", &corpus.oracle_tsv())?;
    log::info!("synth: {} documents, {} oracle labels", corpus.documents.len(), corpus.labels.len());
    Ok(())
}

pub fn ingest(ctx: &Ctx) -> Result<()> {
    let text = ctx.input("corpus", CORPUS)?;
    let (docs, diags) = ingest_documents(text.as_bytes())?;
    let gaz = Gazetteer::from_tsv(&ctx.input("gazetteer", GAZETTEER)?, &ctx.types, ctx.cfg.case()?)?;
    let grid = TimeGrid::covering(docs.iter().map(|d| d.date)).ok_or_else(|| anyhow!("corpus has no valid documents"))?;
    let sentences = annotate_corpus(&docs, &gaz);
    let mut summary = format!(
        "documents\t{}\nsentences\t{}\nstart\t{}\nend\t{}\n",
        docs.len(),
        sentences.len(),
        grid.start.format("%Y-%m-%d"),
        grid.end.format("%Y-%m-%d")
    );
    for d in &diags {
        log::warn!("corpus {d}");
        let _ = writeln!(summary, "diagnostic\t{}\t{}", d.line, d.message.replace(['\t', '\n'], " "));
    }
    ctx.store.write(INGEST, "ingest", &summary)?;
    ctx.store.write(SENTENCES, "sentences", &sentences_to_jsonl(&sentences))?;
    Ok(())
}

pub fn knowledge(ctx: &Ctx) -> Result<()> {
    let sentences = ctx.sentences()?;
    let evidence = extract_evidence(&sentences, &ctx.rules()?);
    let p = &ctx.params;
    let split = build_and_split(&evidence, p.tau_c, p.holdout_fraction, p.seed)?;
    for w in &split.warnings {
        log::warn!("{w}");
    }
    ctx.store.write(MATCHES, "matches", &evidence_to_tsv(&evidence))?;
    ctx.store.write(KNOWLEDGE, "knowledge", &knowledge_to_tsv(&split.knowledge))?;
    Ok(())
}

pub fn popularity(ctx: &Ctx) -> Result<()> {
    let (train, test) = ctx.knowledge()?;
    let evidence = parse_evidence(&ctx.store.read(MATCHES, "knowledge")?, &ctx.relations)?;
    let all: Vec<RelationInstance> = train.into_iter().chain(test).collect();
    let series = series_for_instances(&all, &evidence, &ctx.grid()?, &ctx.params.window)?;
    ctx.store.write(SERIES, "series", &series_to_tsv(&series))?;
    Ok(())
}

pub fn align_stage(ctx: &Ctx) -> Result<()> {
    let p = &ctx.params;
    let sentences = ctx.sentences()?;
    let (train, test) = ctx.knowledge()?;
    let series = parse_series(&ctx.store.read(SERIES, "popularity")?, &ctx.relations, &p.window)?;
    let slots = ctx.slot_types()?;
    let gold = ctx.gold()?;

    let aligned = align(&train, &sentences, &series, &slots);
    let known: BTreeSet<RelationInstance> = train.iter().chain(&test).cloned().collect();
    let lookup = SentenceLookup::new(&sentences);
    let opts = NegativeOptions {
        strict_types: p.strict_negative_types.then_some(&slots),
        per_positive: p.negatives_per_positive,
    };
    let ds = with_negatives(aligned.mentions, &lookup, &known, p.seed, opts);
    let out = build_test_set(
        &test,
        &sentences,
        &series,
        &slots,
        &p.test_thresholds,
        p.negative_reserve_fraction,
        &gold,
        p.seed,
    );
    for w in aligned.warnings.iter().chain(&out.warnings) {
        log::warn!("{w}");
    }
    let folds = partition_folds(out.test_set.len(), p.folds, p.seed)?;
    ctx.store.write(MANIFEST, "manifest", &manifest_to_tsv(&ds))?;
    ctx.store.write(TEST_SET, "test_set", &test_set_to_tsv(&out.test_set))?;
    ctx.store.write(FOLDS, "folds", &folds_to_tsv(&folds))?;
    Ok(())
}

/// Filters at `theta`, or at every `filter_thetas` value when none is given.
pub fn filter(ctx: &Ctx, theta: Option<f64>) -> Result<()> {
    let thetas = match theta {
        Some(t) => vec![t],
        None => ctx.cfg.filter_thetas()?,
    };
    let ds = ctx.manifest(MANIFEST, "align")?;
    for t in thetas {
        let spec = HardFilterSpec::new(t).map_err(|e| anyhow!("invalid filter threshold: {e}"))?;
        let kept = hard_filter(&ds, spec.theta());
        ctx.store.write(&filter_name(t), "filtered_manifest", &manifest_to_tsv(&kept))?;
    }
    Ok(())
}

pub fn curriculum(ctx: &Ctx) -> Result<()> {
    let ds = ctx.manifest(MANIFEST, "align")?;
    let sched = build_curriculum(&ds, &ctx.params.curriculum, ctx.params.seed)?;
    let mut rows = Vec::new();
    for (i, round) in sched.rounds.iter().enumerate() {
        let name = round_name(i + 1);
        ctx.store.write(&name, "curriculum_round", &manifest_to_tsv(&round.manifest))?;
        rows.push((round.threshold, round.shuffle_seed, name));
    }
    ctx.store.write(SCHEDULE, "schedule", &schedule_to_tsv(&rows))?;
    Ok(())
}

pub fn train(ctx: &Ctx) -> Result<()> {
    let sentences = ctx.sentences()?;
    let lookup = SentenceLookup::new(&sentences);
    let classes = ctx.classes()?;
    let cfg = &ctx.params.train;
    let mode = ctx.cfg.train_mode()?;
    if mode.one_shot() {
        for t in ctx.cfg.filter_thetas()? {
            let ds = ctx.manifest(&filter_name(t), "filter")?;
            let p = classifier::train_round(&ds, &lookup, &classes, cfg, None)
                .with_context(|| format!("training on the θ={t} subset"))?;
            ctx.store.write(&ModelId::OneShot(t).checkpoint(), "checkpoint", &checkpoint_to_tsv(&p))?;
        }
    }
    if mode.curriculum() {
        let rows = parse_schedule(&ctx.store.read(SCHEDULE, "curriculum")?)?;
        let want = &ctx.params.curriculum;
        if rows.len() != want.len() || rows.iter().zip(want).any(|(r, t)| r.0 != *t) {
            bail!("schedule does not match config key `curriculum`; rerun `timeds curriculum`");
        }
        let mut prev: Option<ModelParams> = None;
        for (i, (t, _, name)) in rows.iter().enumerate() {
            let ds = ctx.manifest(name, "curriculum")?;
            let round_cfg = classifier::TrainConfig {
                warm_start: prev.is_some(),
                ..cfg.clone()
            };
            let p = classifier::train_round(&ds, &lookup, &classes, &round_cfg, prev.as_ref())?;
            let id = ModelId::Round(i + 1, *t);
            ctx.store.write(&id.checkpoint(), "checkpoint", &checkpoint_to_tsv(&p))?;
            prev = Some(p);
        }
    }
    Ok(())
}

pub fn eval(ctx: &Ctx) -> Result<()> {
    let sentences = ctx.sentences()?;
    let lookup = SentenceLookup::new(&sentences);
    let ts = parse_test_set(&ctx.store.read(TEST_SET, "align")?, &ctx.relations)?;
    let folds = parse_folds(&ctx.store.read(FOLDS, "align")?)?;
    let mut summary = String::from(
        "# model\tthreshold\tval_macro_f1\ttest_macro_precision\ttest_macro_recall\ttest_macro_f1\ttest_micro_f1\n",
    );
    for id in ctx.models()? {
        let p = parse_checkpoint(&ctx.store.read(&id.checkpoint(), "train")?)?;
        let e = classifier::evaluate(&p, &ts, &lookup, &folds)?;
        let mut report = e.mean_test.clone();
        report.pr_curve = e.overall.pr_curve.clone();
        ctx.store.write(&id.eval_report(), "report", &report_to_csv(&report))?;
        let (v, t) = (&e.mean_validation, &e.mean_test);
        let _ = writeln!(
            summary,
            "{}\t{:.3}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            id.label(),
            id.threshold(),
            v.macro_f1,
            t.macro_precision,
            t.macro_recall,
            t.macro_f1,
            t.micro_f1
        );
    }
    ctx.store.write(EVAL, "eval_summary", &summary)?;
    Ok(())
}

pub fn noise(ctx: &Ctx) -> Result<()> {
    let gold = ctx.gold()?;
    let mut out = String::from("# threshold\tmentions\tpositives\tnoise_ratio\n");
    for t in ctx.cfg.filter_thetas()? {
        let ds = ctx.manifest(&filter_name(t), "filter")?;
        let ratio = noise_ratio(&ds, &gold)?;
        let positives = ds.iter().filter(|m| m.polarity == Polarity::Positive).count();
        let _ = writeln!(out, "{t:.3}\t{}\t{positives}\t{ratio:.6}", ds.len());
    }
    ctx.store.write(NOISE, "noise", &out)?;
    Ok(())
}

pub const REPORT_HEADER: &str = "table,model,threshold,mentions,positives,negatives,precision,recall,f1,noise_ratio";

fn data_rows(text: &str) -> impl Iterator<Item = Vec<&str>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').collect())
}

/// Consolidates set sizes, one-shot and curriculum scores and noise ratios.
/// Refuses to run if any artifact in the directory carries another config hash.
pub fn report(ctx: &Ctx) -> Result<()> {
    for (path, header) in ctx.store.headers()? {
        match header {
            Some(h) if h.config_hash != ctx.store.hash() => bail!(
                "refusing to mix artifacts: {} has config hash {} but this run is {}",
                path.display(),
                h.config_hash,
                ctx.store.hash()
            ),
            Some(_) => {}
            None => bail!("refusing to report: {} has no timeds header", path.display()),
        }
    }
    let mut out = format!("{REPORT_HEADER}\n");
    for t in ctx.cfg.filter_thetas()? {
        let ds = ctx.manifest(&filter_name(t), "filter")?;
        let pos = ds.iter().filter(|m| m.polarity == Polarity::Positive).count();
        let _ = writeln!(out, "set_scale,,{t:.3},{},{pos},{},,,,", ds.len(), ds.len() - pos);
    }
    let eval = ctx.store.read(EVAL, "eval")?;
    for f in data_rows(&eval) {
        if f.len() != 7 {
            bail!("malformed {EVAL} row");
        }
        let table = if f[0].starts_with("oneshot") { "hard_filter" } else { "curriculum" };
        let _ = writeln!(out, "{table},{},{},,,,{},{},{},", f[0], f[1], f[3], f[4], f[5]);
    }
    let noise = if ctx.store.latest(NOISE).is_some() {
        ctx.store.read(NOISE, "noise")?
    } else {
        String::new()
    };
    for f in data_rows(&noise) {
        if f.len() != 4 {
            bail!("malformed {NOISE} row");
        }
        let _ = writeln!(out, "noise,,{},{},{},,,,,{}", f[0], f[1], f[2], f[3]);
    }
    ctx.store.write(REPORT, "report", &out)?;
    Ok(())
}

/// Every stage in order. `synth` runs only when no corpus path is configured,
/// and `noise` only when gold labels come from an oracle file.
pub fn pipeline(ctx: &Ctx) -> Result<()> {
    if ctx.cfg.path("corpus").is_none() {
        run_logged("synth", || synth(ctx))?;
    }
    run_logged("ingest", || ingest(ctx))?;
    run_logged("knowledge", || knowledge(ctx))?;
    run_logged("popularity", || popularity(ctx))?;
    run_logged("align", || align_stage(ctx))?;
    run_logged("filter", || filter(ctx, None))?;
    if ctx.cfg.train_mode()?.curriculum() {
        run_logged("curriculum", || curriculum(ctx))?;
    }
    run_logged("train", || train(ctx))?;
    run_logged("eval", || eval(ctx))?;
    if ctx.cfg.path("gold").is_none() || ctx.cfg.gold_format()? == GoldFormat::Oracle {
        run_logged("noise", || noise(ctx))?;
    }
    run_logged("report", || report(ctx))?;
    Ok(())
}

fn run_logged(name: &str, f: impl FnOnce() -> Result<()>) -> Result<()> {
    let start = std::time::Instant::now();
    f().with_context(|| format!("stage `{name}` failed"))?;
    log::info!("{name} done in {:.2?}", start.elapsed());
    Ok(())
}
