use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timeds_core::classifier::metrics::{f1, score};
use timeds_core::classifier::model::{gradient, objective, softmax};
use timeds_core::classifier::{fit, Example, FeatureVector, ModelParams, TrainConfig};

type Problem = (ModelParams, Vec<(Vec<(usize, f64)>, usize)>, f64);

fn random_problem(rng: &mut ChaCha8Rng) -> Problem {
    let k = rng.random_range(2..5);
    let d = rng.random_range(1..8);
    let mut p = ModelParams::zeros((0..k).map(|c| format!("c{c}")).collect());
    let names: Vec<String> = (0..d).map(|f| format!("f{f}")).collect();
    p.extend_vocab(names.iter().map(String::as_str));
    for w in p.weights.iter_mut().chain(p.bias.iter_mut()) {
        *w = rng.random_range(-2.0..2.0);
    }
    let n = rng.random_range(1..10);
    let data = (0..n)
        .map(|_| {
            let mut x = Vec::new();
            for f in 0..d {
                if rng.random_bool(0.6) {
                    x.push((f, rng.random_range(-1.5..1.5)));
                }
            }
            (x, rng.random_range(0..k))
        })
        .collect();
    let l2 = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.1) };
    (p, data, l2)
}

fn numeric_gradient(p: &ModelParams, data: &[(Vec<(usize, f64)>, usize)], l2: f64) -> (Vec<f64>, Vec<f64>) {
    let h = 1e-5;
    let probe = |tweak: &dyn Fn(&mut ModelParams, f64)| {
        let (mut up, mut down) = (p.clone(), p.clone());
        tweak(&mut up, h);
        tweak(&mut down, -h);
        (objective(&up, data, l2) - objective(&down, data, l2)) / (2.0 * h)
    };
    let gw = (0..p.weights.len()).map(|i| probe(&|q, e| q.weights[i] += e)).collect();
    let gb = (0..p.bias.len()).map(|i| probe(&|q, e| q.bias[i] += e)).collect();
    (gw, gb)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let (p, data, l2) = random_problem(&mut rng);
        let (aw, ab) = gradient(&p, &data, l2);
        let (nw, nb) = numeric_gradient(&p, &data, l2);
        let a: Vec<f64> = aw.into_iter().chain(ab).collect();
        let n: Vec<f64> = nw.into_iter().chain(nb).collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = a.iter().zip(&n).map(|(x, y)| x - y).collect();
        let rel = norm(&diff) / norm(&a).max(norm(&n)).max(1e-12);
        assert!(rel <= 1e-5, "case {case}: relative error {rel:e}");
    }
}

/// Independent confusion-matrix computation of the macro and micro scores.
fn brute_force(k: usize, negative: usize, gold: &[usize], pred: &[usize]) -> [f64; 6] {
    let mut m = vec![vec![0usize; k]; k];
    for (&g, &p) in gold.iter().zip(pred) {
        m[g][p] += 1;
    }
    let rel: Vec<usize> = (0..k).filter(|&c| c != negative).collect();
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut ps, mut rs) = (0.0, 0.0);
    let (mut tp, mut predicted, mut actual) = (0, 0, 0);
    for &c in &rel {
        let col: usize = (0..k).map(|g| m[g][c]).sum();
        let row: usize = m[c].iter().sum();
        ps += div(m[c][c], col);
        rs += div(m[c][c], row);
        tp += m[c][c];
        predicted += col;
        actual += row;
    }
    let n = rel.len() as f64;
    let (mp, mr) = (ps / n, rs / n);
    let (up, ur) = (div(tp, predicted), div(tp, actual));
    [mp, mr, f1(mp, mr), up, ur, f1(up, ur)]
}

#[test]
fn metrics_equal_confusion_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..200 {
        let k = rng.random_range(2..7);
        let classes: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let negative = k - 1;
        let n = rng.random_range(1..80);
        let gold: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let pred: Vec<(usize, f64)> = (0..n).map(|_| (rng.random_range(0..k), rng.random::<f64>())).collect();
        let r = score(&classes, Some(negative), &gold, &pred);
        let labels: Vec<usize> = pred.iter().map(|p| p.0).collect();
        let want = brute_force(k, negative, &gold, &labels);
        let got = [r.macro_precision, r.macro_recall, r.macro_f1, r.micro_precision, r.micro_recall, r.micro_f1];
        assert_eq!(got, want, "case {case}");
        for c in &r.per_class {
            assert_eq!(c.f1, f1(c.precision, c.recall));
        }
        // the curve ends at the precision of every non-negative prediction
        if let Some(last) = r.pr_curve.last() {
            assert_eq!(last.precision, r.micro_precision, "case {case}");
        }
    }
}

proptest! {
    #[test]
    fn softmax_sums_to_one(z in prop::collection::vec(-700.0f64..700.0, 1..12)) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

fn toy_examples() -> Vec<Example> {
    (0..30)
        .map(|i| {
            let mut fv = FeatureVector::default();
            fv.features.insert(format!("w{}", i % 3), 1.0);
            fv.features.insert("bias-ish".into(), 0.5);
            Example { features: fv, label: i % 3 }
        })
        .collect()
}

#[test]
fn zero_epochs_with_warm_start_returns_init() {
    let classes: Vec<String> = ["A", "B", "NO_RELATION"].map(String::from).to_vec();
    let cfg = TrainConfig::default();
    let trained = fit(&toy_examples(), &classes, &cfg, None).unwrap();
    let again = fit(
        &toy_examples(),
        &classes,
        &TrainConfig {
            epochs: 0,
            warm_start: true,
            ..cfg
        },
        Some(&trained),
    )
    .unwrap();
    assert_eq!(again, trained);
}

#[test]
fn training_is_reproducible_and_seed_sensitive() {
    let classes: Vec<String> = ["A", "B", "NO_RELATION"].map(String::from).to_vec();
    let cfg = TrainConfig::default();
    let a = fit(&toy_examples(), &classes, &cfg, None).unwrap();
    let b = fit(&toy_examples(), &classes, &cfg, None).unwrap();
    assert_eq!(a, b);
    let c = fit(&toy_examples(), &classes, &TrainConfig { seed: 99, ..cfg }, None).unwrap();
    assert_ne!(a.weights, c.weights);
}
