//! Reference relation classifier: sparse features, softmax regression with warm
//! starts, and fold-based evaluation.

pub mod features;
pub mod metrics;
pub mod model;

use rayon::prelude::*;

use crate::align::{FoldAssignment, Polarity, SentenceLookup, TestSet, WeightedMention};
use crate::error::{Error, Result};
use crate::strategies::CurriculumSchedule;

pub use features::{featurize, FeatureVector};
pub use metrics::{ClassScores, EvalReport, PrPoint};
pub use model::{fit, predict, Example, ModelParams, TrainConfig, Vocabulary, NO_RELATION};

/// Sorted relation names followed by `NO_RELATION`.
pub fn class_list<'a, I: IntoIterator<Item = &'a str>>(relations: I) -> Vec<String> {
    let mut v: Vec<String> = relations.into_iter().map(str::to_string).collect();
    v.sort();
    v.dedup();
    v.push(NO_RELATION.to_string());
    v
}

fn class_of(classes: &[String], relation: &str, polarity: Polarity) -> Result<usize> {
    let name = match polarity {
        Polarity::Positive => relation,
        Polarity::Negative => NO_RELATION,
    };
    classes
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| Error::InvalidParameter {
            name: "classes",
            msg: format!("no class for relation {name}"),
        })
}

pub fn examples(ds: &[WeightedMention], lookup: &SentenceLookup, classes: &[String]) -> Result<Vec<Example>> {
    ds.par_iter()
        .map(|m| {
            let s = lookup.require(&m.sentence_ref)?;
            Ok(Example {
                features: featurize(m, s)?,
                label: class_of(classes, &m.instance.relation_type, m.polarity)?,
            })
        })
        .collect()
}

/// Trains on one manifest. Mention weights do not enter the loss.
pub fn train_round(
    ds: &[WeightedMention],
    lookup: &SentenceLookup,
    classes: &[String],
    cfg: &TrainConfig,
    init: Option<&ModelParams>,
) -> Result<ModelParams> {
    if ds.is_empty() {
        return Err(Error::EmptyManifest);
    }
    fit(&examples(ds, lookup, classes)?, classes, cfg, init)
}

/// One checkpoint per round; round 1 starts from scratch and each later round
/// continues from the previous checkpoint.
pub fn run_curriculum(
    sched: &CurriculumSchedule,
    lookup: &SentenceLookup,
    classes: &[String],
    cfg: &TrainConfig,
) -> Result<Vec<ModelParams>> {
    let mut out: Vec<ModelParams> = Vec::with_capacity(sched.len());
    for round in &sched.rounds {
        let round_cfg = TrainConfig {
            warm_start: !out.is_empty(),
            ..cfg.clone()
        };
        out.push(train_round(&round.manifest, lookup, classes, &round_cfg, out.last())?);
    }
    Ok(out)
}

/// Gold classes and predictions for every test item, by position.
pub fn predict_test_set(
    p: &ModelParams,
    ts: &TestSet,
    lookup: &SentenceLookup,
) -> Result<(Vec<usize>, Vec<(usize, f64)>)> {
    let rows: Vec<(usize, (usize, f64))> = ts
        .items
        .par_iter()
        .map(|t| {
            let s = lookup.require(&t.mention.sentence_ref)?;
            let fv = featurize(&t.mention, s)?;
            let gold = class_of(&p.classes, &t.mention.instance.relation_type, t.gold)?;
            Ok((gold, model::argmax(&p.probabilities(&fv))))
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().unzip())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub validation: EvalReport,
    pub test: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub folds: Vec<FoldReport>,
    pub mean_validation: EvalReport,
    pub mean_test: EvalReport,
    /// Report over the whole test set; carries the full PR curve.
    pub overall: EvalReport,
}

/// Fold `f` is the validation set and the remaining folds the test set.
pub fn evaluate(p: &ModelParams, ts: &TestSet, lookup: &SentenceLookup, folds: &FoldAssignment) -> Result<Evaluation> {
    if folds.folds.len() != ts.len() {
        return Err(Error::InvalidParameter {
            name: "folds",
            msg: format!("{} assignments for {} test items", folds.folds.len(), ts.len()),
        });
    }
    let (gold, pred) = predict_test_set(p, ts, lookup)?;
    let negative = p.class_index(NO_RELATION);
    let subset = |idx: &[usize]| {
        let g: Vec<usize> = idx.iter().map(|&i| gold[i]).collect();
        let q: Vec<(usize, f64)> = idx.iter().map(|&i| pred[i]).collect();
        metrics::score(&p.classes, negative, &g, &q)
    };
    let reports: Vec<FoldReport> = (0..folds.k)
        .map(|f| FoldReport {
            validation: subset(&folds.members(f)),
            test: subset(&folds.complement(f)),
        })
        .collect();
    let val: Vec<EvalReport> = reports.iter().map(|r| r.validation.clone()).collect();
    let test: Vec<EvalReport> = reports.iter().map(|r| r.test.clone()).collect();
    Ok(Evaluation {
        mean_validation: metrics::average(&val),
        mean_test: metrics::average(&test),
        overall: metrics::score(&p.classes, negative, &gold, &pred),
        folds: reports,
    })
}

/// Index of the evaluation with the best mean validation macro-F1 (first on ties).
pub fn select_best(evals: &[Evaluation]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in evals.iter().enumerate() {
        if best.is_none_or(|b| e.mean_validation.macro_f1 > evals[b].mean_validation.macro_f1) {
            best = Some(i);
        }
    }
    best
}
