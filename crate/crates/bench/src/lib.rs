//! Shared fixtures for the benchmarks.

use timeds_core::synth::{generate_corpus, SynthConfig, SynthCorpus};

/// A standard synthetic corpus scaled to roughly `target_sentences` sentences.
pub fn corpus_of_size(target_sentences: usize, seed: u64) -> SynthCorpus {
    let mut cfg = SynthConfig::standard(seed);
    cfg.scale_to_sentences(target_sentences);
    generate_corpus(&cfg).expect("standard config is valid")
}
