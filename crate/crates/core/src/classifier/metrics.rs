//! Precision, recall and F1 over relation classes, plus the score-ranked PR curve.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScores {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassScores>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Harmonic mean of macro precision and macro recall.
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub pr_curve: Vec<PrPoint>,
    pub warnings: Vec<String>,
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores predictions `(class, score)` against gold class indices.
/// `negative` is the class excluded from macro and micro averages and from the
/// PR curve; every other class counts as a relation class.
pub fn score(classes: &[String], negative: Option<usize>, gold: &[usize], predicted: &[(usize, f64)]) -> EvalReport {
    assert_eq!(gold.len(), predicted.len(), "one prediction per gold label");
    let k = classes.len();
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fneg = vec![0usize; k];
    for (&g, &(p, _)) in gold.iter().zip(predicted) {
        if g == p {
            tp[g] += 1;
        } else {
            fp[p] += 1;
            fneg[g] += 1;
        }
    }
    let relation_classes: Vec<usize> = (0..k).filter(|&c| Some(c) != negative).collect();
    let mut warnings = Vec::new();
    let per_class: Vec<ClassScores> = relation_classes
        .iter()
        .map(|&c| {
            let support = tp[c] + fneg[c];
            if support == 0 {
                warnings.push(format!("class {} absent from gold labels", classes[c]));
            }
            let precision = ratio(tp[c], tp[c] + fp[c]);
            let recall = ratio(tp[c], support);
            ClassScores {
                class: classes[c].clone(),
                precision,
                recall,
                f1: f1(precision, recall),
                support,
            }
        })
        .collect();
    let n = per_class.len().max(1) as f64;
    let macro_precision = per_class.iter().map(|s| s.precision).sum::<f64>() / n;
    let macro_recall = per_class.iter().map(|s| s.recall).sum::<f64>() / n;
    let sum = |v: &[usize]| relation_classes.iter().map(|&c| v[c]).sum::<usize>();
    let (stp, sfp, sfn) = (sum(&tp), sum(&fp), sum(&fneg));
    let micro_precision = ratio(stp, stp + sfp);
    let micro_recall = ratio(stp, stp + sfn);
    EvalReport {
        per_class,
        macro_precision,
        macro_recall,
        macro_f1: f1(macro_precision, macro_recall),
        micro_precision,
        micro_recall,
        micro_f1: f1(micro_precision, micro_recall),
        pr_curve: pr_curve(negative, gold, predicted),
        warnings,
    }
}

/// Sweeps relation-class predictions from the highest score down. Recall is
/// relative to every gold relation-class item.
pub fn pr_curve(negative: Option<usize>, gold: &[usize], predicted: &[(usize, f64)]) -> Vec<PrPoint> {
    let total = gold.iter().filter(|&&g| Some(g) != negative).count();
    let mut ranked: Vec<(f64, bool)> = gold
        .iter()
        .zip(predicted)
        .filter(|(_, (p, _))| Some(*p) != negative)
        .map(|(&g, &(p, s))| (s, g == p))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut correct = 0usize;
    ranked
        .iter()
        .enumerate()
        .map(|(i, &(score, ok))| {
            correct += ok as usize;
            PrPoint {
                precision: correct as f64 / (i + 1) as f64,
                recall: ratio(correct, total),
                score,
            }
        })
        .collect()
}

/// Element-wise mean of several reports. Curves are not averaged; the first
/// report's curve is kept.
pub fn average(reports: &[EvalReport]) -> EvalReport {
    assert!(!reports.is_empty(), "nothing to average");
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let per_class = (0..reports[0].per_class.len())
        .map(|c| ClassScores {
            class: reports[0].per_class[c].class.clone(),
            precision: mean(&|r| r.per_class[c].precision),
            recall: mean(&|r| r.per_class[c].recall),
            f1: mean(&|r| r.per_class[c].f1),
            support: reports.iter().map(|r| r.per_class[c].support).sum(),
        })
        .collect();
    EvalReport {
        per_class,
        macro_precision: mean(&|r| r.macro_precision),
        macro_recall: mean(&|r| r.macro_recall),
        macro_f1: mean(&|r| r.macro_f1),
        micro_precision: mean(&|r| r.micro_precision),
        micro_recall: mean(&|r| r.micro_recall),
        micro_f1: mean(&|r| r.micro_f1),
        pr_curve: reports[0].pr_curve.clone(),
        warnings: reports.iter().flat_map(|r| r.warnings.iter().cloned()).collect(),
    }
}
