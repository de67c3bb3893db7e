//! In-memory composition of the pipeline stages, from annotated sentences to
//! training manifests and the labeled test set.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::align::{
    align, build_test_set, partition_folds, with_negatives, FoldAssignment, LabelMap, NegativeOptions,
    SentenceLookup, SlotTypes, TestSet, TestThresholds, WeightedMention,
};
use crate::classifier::{self, Evaluation, ModelParams, TrainConfig};
use crate::corpus::{annotate_corpus, Document, Gazetteer, Sentence};
use crate::error::{Error, Result};
use crate::knowledge::{aggregate_evidence, build_and_split, EvidenceMap, KnowledgeSplit, RelationInstance};
use crate::popularity::{series_for_instances, SeriesMap, TimeGrid, WindowSpec};
use crate::rules::RuleSet;
use crate::strategies::{build_curriculum, hard_filter, STANDARD_THRESHOLDS};

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tau_c: f64,
    pub window: WindowSpec,
    pub holdout_fraction: f64,
    pub test_thresholds: TestThresholds,
    pub negative_reserve_fraction: f64,
    pub negatives_per_positive: usize,
    pub strict_negative_types: bool,
    pub folds: usize,
    pub curriculum: Vec<f64>,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            tau_c: 0.25,
            window: WindowSpec::default(),
            holdout_fraction: 0.2,
            test_thresholds: TestThresholds::news_default(),
            negative_reserve_fraction: 0.5,
            negatives_per_positive: 1,
            strict_negative_types: false,
            folds: 10,
            curriculum: STANDARD_THRESHOLDS.to_vec(),
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

/// Rule matches over all sentences, grouped by instance.
pub fn extract_evidence(sentences: &[Sentence], rules: &RuleSet) -> EvidenceMap {
    let matches: Vec<_> = sentences.par_iter().flat_map_iter(|s| rules.match_sentence(s)).collect();
    aggregate_evidence(matches)
}

/// Head and tail types per relation, taken from the first rule of each relation.
pub fn slot_types(rules: &RuleSet) -> SlotTypes {
    let mut out = SlotTypes::new();
    for r in rules.rules() {
        out.entry(r.relation_type.clone())
            .or_insert_with(|| (r.head_type.clone(), r.tail_type.clone()));
    }
    out
}

/// Grid spanning every document date.
pub fn corpus_grid(docs: &[Document]) -> Result<TimeGrid> {
    TimeGrid::covering(docs.iter().map(|d| d.date)).ok_or_else(|| Error::InvalidGrid("corpus has no documents".into()))
}

/// Everything the training and evaluation stages consume.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub sentences: Vec<Sentence>,
    pub evidence: EvidenceMap,
    pub split: KnowledgeSplit,
    pub grid: TimeGrid,
    pub series: SeriesMap,
    pub slot_types: SlotTypes,
    /// Aligned positives plus tail-replaced negatives, canonical order.
    pub ds: Vec<WeightedMention>,
    pub test_set: TestSet,
    pub folds: FoldAssignment,
    pub warnings: Vec<String>,
}

impl Prepared {
    pub fn lookup(&self) -> SentenceLookup<'_> {
        SentenceLookup::new(&self.sentences)
    }

    pub fn classes(&self) -> Vec<String> {
        classifier::class_list(self.slot_types.keys().map(String::as_str))
    }
}

/// Runs annotation, rule matching, knowledge construction, popularity,
/// alignment with negatives and test-set construction.
pub fn prepare(docs: &[Document], gazetteer: &Gazetteer, rules: &RuleSet, gold: &LabelMap, p: &Params) -> Result<Prepared> {
    let sentences = annotate_corpus(docs, gazetteer);
    let evidence = extract_evidence(&sentences, rules);
    let split = build_and_split(&evidence, p.tau_c, p.holdout_fraction, p.seed)?;
    let grid = corpus_grid(docs)?;
    let all: Vec<RelationInstance> = split.train.iter().chain(&split.test).cloned().collect();
    let series = series_for_instances(&all, &evidence, &grid, &p.window)?;
    let slot_types = slot_types(rules);
    let mut warnings = split.warnings.clone();

    let aligned = align(&split.train, &sentences, &series, &slot_types);
    warnings.extend(aligned.warnings);
    let knowledge: BTreeSet<RelationInstance> = split.knowledge.instance_set();
    let lookup = SentenceLookup::new(&sentences);
    let opts = NegativeOptions {
        strict_types: p.strict_negative_types.then_some(&slot_types),
        per_positive: p.negatives_per_positive,
    };
    let ds = with_negatives(aligned.mentions, &lookup, &knowledge, p.seed, opts);

    let test = build_test_set(
        &split.test,
        &sentences,
        &series,
        &slot_types,
        &p.test_thresholds,
        p.negative_reserve_fraction,
        gold,
        p.seed,
    );
    warnings.extend(test.warnings);
    let folds = partition_folds(test.test_set.len(), p.folds, p.seed)?;
    drop(lookup);
    Ok(Prepared {
        sentences,
        evidence,
        split,
        grid,
        series,
        slot_types,
        ds,
        test_set: test.test_set,
        folds,
        warnings,
    })
}

/// A trained model and its evaluation.
#[derive(Debug, Clone)]
pub struct Scored {
    pub params: ModelParams,
    pub evaluation: Evaluation,
}

pub fn train_and_evaluate(prep: &Prepared, ds: &[WeightedMention], cfg: &TrainConfig) -> Result<Scored> {
    let lookup = prep.lookup();
    let params = classifier::train_round(ds, &lookup, &prep.classes(), cfg, None)?;
    let evaluation = classifier::evaluate(&params, &prep.test_set, &lookup, &prep.folds)?;
    Ok(Scored { params, evaluation })
}

/// One model per threshold trained on `hard_filter(ds, theta)`.
pub fn hard_filter_models(prep: &Prepared, thresholds: &[f64], cfg: &TrainConfig) -> Result<Vec<Scored>> {
    thresholds
        .iter()
        .map(|&theta| train_and_evaluate(prep, &hard_filter(&prep.ds, theta), cfg))
        .collect()
}

/// Every curriculum checkpoint with its evaluation.
pub fn curriculum_models(prep: &Prepared, thresholds: &[f64], cfg: &TrainConfig, seed: u64) -> Result<Vec<Scored>> {
    let sched = build_curriculum(&prep.ds, thresholds, seed)?;
    let lookup = prep.lookup();
    let checkpoints = classifier::run_curriculum(&sched, &lookup, &prep.classes(), cfg)?;
    checkpoints
        .into_iter()
        .map(|params| {
            let evaluation = classifier::evaluate(&params, &prep.test_set, &lookup, &prep.folds)?;
            Ok(Scored { params, evaluation })
        })
        .collect()
}

/// The model with the best mean validation macro-F1.
pub fn best(models: &[Scored]) -> Option<&Scored> {
    let evals: Vec<Evaluation> = models.iter().map(|m| m.evaluation.clone()).collect();
    classifier::select_best(&evals).map(|i| &models[i])
}
