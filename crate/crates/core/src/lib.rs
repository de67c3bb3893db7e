//! Time-aware distant supervision for relation extraction.
//!
//! Rules over a timestamped news corpus yield high-confidence relation
//! instances. Each instance gets a daily popularity series from the dates of
//! its rule-matched mentions, and every sentence aligned to the instance is
//! weighted by the popularity on its publication day. Low-weight sentences are
//! then dropped (hard filter) or introduced late (curriculum) when training a
//! relation classifier.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::type_complexity
)]

pub mod align;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod knowledge;
pub mod popularity;
pub mod rules;
pub mod seed;
pub mod strategies;
pub mod synth;
pub mod workflow;

pub use align::{FoldAssignment, MentionKey, Polarity, Provenance, TestSet, TestThresholds, WeightedMention};
pub use corpus::{Document, Gazetteer, Sentence, SentenceRef, TypeSet};
pub use error::{Error, Result};
pub use knowledge::{RelationInstance, SupervisionKnowledge};
pub use popularity::{PopularitySeries, TimeGrid, WindowSpec};
pub use rules::{RelationSet, RuleSet};
pub use strategies::{CurriculumSchedule, HardFilterSpec};
