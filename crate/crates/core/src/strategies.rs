//! Hard filtering and curriculum schedules over weighted manifests.

use rand::seq::SliceRandom;

use crate::align::WeightedMention;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for};

/// Threshold sweep used for the filtered sets and the curriculum.
pub const STANDARD_THRESHOLDS: [f64; 7] = [0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardFilterSpec {
    theta: f64,
}

impl HardFilterSpec {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "theta",
                msg: format!("{theta} is negative"),
            });
        }
        Ok(HardFilterSpec { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Mentions with `weight >= theta`, order preserved.
pub fn hard_filter(ds: &[WeightedMention], theta: f64) -> Vec<WeightedMention> {
    ds.iter().filter(|m| m.weight >= theta).cloned().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumRound {
    pub threshold: f64,
    pub shuffle_seed: u64,
    /// `hard_filter(ds, threshold)` in shuffled order.
    pub manifest: Vec<WeightedMention>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumSchedule {
    pub rounds: Vec<CurriculumRound>,
}

impl CurriculumSchedule {
    pub fn thresholds(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.threshold).collect()
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    let ok = !thresholds.is_empty()
        && thresholds.iter().all(|&t| t >= 0.0 && t.is_finite())
        && thresholds.windows(2).all(|w| w[0] > w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidThresholds(thresholds.to_vec()))
    }
}

/// Nested rounds from the highest threshold down; each round is shuffled with
/// a seed derived from `(seed, round index)`.
pub fn build_curriculum(ds: &[WeightedMention], thresholds: &[f64], seed: u64) -> Result<CurriculumSchedule> {
    validate_thresholds(thresholds)?;
    let rounds = thresholds
        .iter()
        .enumerate()
        .map(|(i, &threshold)| {
            let tag = i.to_string();
            let mut manifest = hard_filter(ds, threshold);
            manifest.shuffle(&mut rng_for(seed, &["curriculum", tag.as_str()]));
            CurriculumRound {
                threshold,
                shuffle_seed: derive_seed(seed, &["curriculum", tag.as_str()]),
                manifest,
            }
        })
        .collect();
    Ok(CurriculumSchedule { rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{Polarity, Provenance};
    use crate::corpus::SentenceRef;
    use crate::knowledge::RelationInstance;
    use chrono::NaiveDate;

    fn ds(weights: &[f64]) -> Vec<WeightedMention> {
        weights
            .iter()
            .enumerate()
            .map(|(i, &w)| WeightedMention {
                instance: RelationInstance::new("Lawsuit", "a", "b", true),
                sentence_ref: SentenceRef::new(format!("d{i}"), 0),
                date: NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
                weight: w,
                polarity: Polarity::Positive,
                provenance: Provenance::Aligned,
            })
            .collect()
    }

    fn weights(ms: &[WeightedMention]) -> Vec<f64> {
        ms.iter().map(|m| m.weight).collect()
    }

    #[test]
    fn filter_examples() {
        let d = ds(&[0.8, 0.4, 0.1]);
        assert_eq!(weights(&hard_filter(&d, 0.3)), vec![0.8, 0.4]);
        assert_eq!(hard_filter(&d, 0.0), d);
        assert!(hard_filter(&d, 0.9).is_empty());
        // ties are kept
        assert_eq!(hard_filter(&d, 0.4).len(), 2);
        assert!(HardFilterSpec::new(-0.1).is_err());
        assert!(HardFilterSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn curriculum_examples() {
        let d = ds(&[0.7, 0.4, 0.1]);
        let c = build_curriculum(&d, &[0.6, 0.3, 0.0], 1).unwrap();
        assert_eq!(c.rounds.iter().map(|r| r.manifest.len()).collect::<Vec<_>>(), vec![1, 2, 3]);
        let c = build_curriculum(&d, &STANDARD_THRESHOLDS, 1).unwrap();
        assert_eq!(c.len(), 7);
        let c = build_curriculum(&d, &[0.0], 1).unwrap();
        let mut w = weights(&c.rounds[0].manifest);
        w.sort_by(f64::total_cmp);
        assert_eq!(w, vec![0.1, 0.4, 0.7]);
        assert!(build_curriculum(&d, &[0.3, 0.3], 1).is_err());
        assert!(build_curriculum(&d, &[0.1, 0.3], 1).is_err());
        assert!(build_curriculum(&d, &[], 1).is_err());
    }
}
