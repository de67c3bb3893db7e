use chrono::NaiveDate;
use thiserror::Error;

/// Errors raised by the core pipeline stages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rule compile error: {0}")]
    RuleCompile(String),
    #[error("unknown entity type `{0}`")]
    UnknownEntityType(String),
    #[error("gazetteer line {line}: {msg}")]
    Gazetteer { line: usize, msg: String },
    #[error("date {date} lies outside the grid {start}..={end}")]
    DateOutsideGrid {
        date: NaiveDate,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid window length {0}: must be odd, positive and no longer than the grid")]
    InvalidWindow(usize),
    #[error("popularity series undefined: all windowed counts are zero")]
    UndefinedSeries,
    #[error("zero normalizer in confidence")]
    ZeroNormalizer,
    #[error("no relation instance reaches the confidence threshold {0}")]
    EmptyKnowledge(f64),
    #[error("invalid parameter `{name}`: {msg}")]
    InvalidParameter { name: &'static str, msg: String },
    #[error("thresholds must be strictly decreasing and non-negative: {0:?}")]
    InvalidThresholds(Vec<f64>),
    #[error("cannot train on an empty manifest")]
    EmptyManifest,
    #[error("warm start requested without initial parameters")]
    MissingInit,
    #[error("sentence {doc_id}#{index} does not contain entity `{entity}`")]
    MissingEntity {
        doc_id: String,
        index: usize,
        entity: String,
    },
    #[error("sentence {doc_id}#{index} not found")]
    MissingSentence { doc_id: String, index: usize },
    #[error("cannot split {items} items into {folds} folds")]
    TooFewForFolds { items: usize, folds: usize },
    #[error("mention {0} has no oracle label")]
    Unlabeled(String),
    #[error("synthetic configuration: {0}")]
    SynthConfig(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
