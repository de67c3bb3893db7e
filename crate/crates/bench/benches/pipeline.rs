use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use timeds_bench::corpus_of_size;
use timeds_core::classifier::TrainConfig;
use timeds_core::corpus::annotate_corpus;
use timeds_core::popularity::{inspo_series, window_counts, WindowSpec};
use timeds_core::rules::RuleSet;
use timeds_core::strategies::hard_filter;
use timeds_core::workflow::{extract_evidence, prepare, train_and_evaluate, Params};

fn popularity(c: &mut Criterion) {
    let corpus = corpus_of_size(20_000, 1);
    let dates: Vec<_> = corpus.planted.iter().flat_map(|p| p.true_mention_dates()).collect();
    let w = WindowSpec::default();
    c.bench_function("inspo/window_counts+normalize", |b| {
        b.iter(|| {
            let counts = window_counts(black_box(&dates), &corpus.grid, &w).unwrap();
            inspo_series(&counts, &w).unwrap()
        })
    });
}

fn rule_matching(c: &mut Criterion) {
    let corpus = corpus_of_size(20_000, 2);
    let rules = RuleSet::parse(&corpus.rules_text, &corpus.relations, &corpus.types).unwrap();
    let sentences = annotate_corpus(&corpus.documents, &corpus.gazetteer);
    let mut g = c.benchmark_group("rules");
    g.throughput(Throughput::Elements(sentences.len() as u64));
    g.bench_function("annotate", |b| b.iter(|| annotate_corpus(black_box(&corpus.documents), &corpus.gazetteer)));
    g.bench_function("extract_evidence", |b| b.iter(|| extract_evidence(black_box(&sentences), &rules)));
    g.finish();
}

fn end_to_end(c: &mut Criterion) {
    let corpus = corpus_of_size(20_000, 3);
    let rules = RuleSet::parse(&corpus.rules_text, &corpus.relations, &corpus.types).unwrap();
    let gold = corpus.label_map();
    let params = Params { seed: 3, ..Params::default() };
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("prepare", |b| {
        b.iter(|| prepare(&corpus.documents, &corpus.gazetteer, &rules, &gold, &params).unwrap())
    });
    let prep = prepare(&corpus.documents, &corpus.gazetteer, &rules, &gold, &params).unwrap();
    let cfg = TrainConfig::default();
    g.bench_function("filter+train+eval", |b| {
        b.iter_batched(
            || hard_filter(&prep.ds, 0.3),
            |ds| train_and_evaluate(&prep, &ds, &cfg).unwrap(),
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

criterion_group!(benches, popularity, rule_matching, end_to_end);
criterion_main!(benches);
