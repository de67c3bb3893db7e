//! Instance popularity: the daily share of an instance's mentions that fall in
//! a centred time window.
//!
//! For a relation instance with windowed mention counts `c[t]` over a daily grid
//! of `N` points and an odd window length `L`, the normalizer is
//! `omega = (1/L) * sum_t c[t]` and the popularity at day `t` is `c[t] / omega`.
//! Because every series is normalized by its own windowed total, the values
//! always sum to exactly `L`, and any constant thinning of the mentions (e.g.
//! only a fraction of true mentions being rule-matched) cancels out. That is why
//! the rule-matched approximation tracks the oracle series built from all true
//! mentions when pattern choice does not depend on time.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knowledge::{EvidenceMap, RelationInstance};

/// An inclusive range of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl TimeGrid {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidGrid(format!("start {start} after end {end}")));
        }
        Ok(TimeGrid { start, end })
    }

    /// The tightest grid covering every date, or `None` for no dates.
    pub fn covering<I: IntoIterator<Item = NaiveDate>>(dates: I) -> Option<Self> {
        let mut it = dates.into_iter();
        let first = it.next()?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d)));
        Some(TimeGrid { start: lo, end: hi })
    }

    /// Number of daily points, `end - start + 1`.
    pub fn len(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, d: NaiveDate) -> Option<usize> {
        if d < self.start || d > self.end {
            None
        } else {
            Some((d - self.start).num_days() as usize)
        }
    }

    pub fn date_at(&self, i: usize) -> NaiveDate {
        self.start + Duration::days(i as i64)
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.len()).map(|i| self.date_at(i))
    }

    pub fn shifted(&self, days: i64) -> Self {
        TimeGrid {
            start: self.start + Duration::days(days),
            end: self.end + Duration::days(days),
        }
    }
}

/// Symmetric window of odd length `L`: day `t` covers `[t - (L-1)/2, t + (L-1)/2]`,
/// clipped to the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    length: usize,
}

impl WindowSpec {
    pub fn new(length: usize) -> Result<Self> {
        if length == 0 || length.is_multiple_of(2) {
            return Err(Error::InvalidWindow(length));
        }
        Ok(WindowSpec { length })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn half(&self) -> usize {
        (self.length - 1) / 2
    }

    fn check(&self, grid: &TimeGrid) -> Result<()> {
        if self.length > grid.len() {
            return Err(Error::InvalidWindow(self.length));
        }
        Ok(())
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec { length: 3 }
    }
}

/// Windowed counts: `counts[t]` is the number of dates inside the clipped window around day `t`.
pub fn window_counts(dates: &[NaiveDate], grid: &TimeGrid, w: &WindowSpec) -> Result<Vec<u64>> {
    w.check(grid)?;
    let n = grid.len();
    let mut daily = vec![0u64; n];
    for &d in dates {
        let i = grid.index_of(d).ok_or(Error::DateOutsideGrid {
            date: d,
            start: grid.start,
            end: grid.end,
        })?;
        daily[i] += 1;
    }
    let mut prefix = vec![0u64; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + daily[i];
    }
    let h = w.half();
    Ok((0..n)
        .map(|t| {
            let lo = t.saturating_sub(h);
            let hi = (t + h + 1).min(n);
            prefix[hi] - prefix[lo]
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesBody {
    pub omega_prime: f64,
    pub inspo: Vec<f64>,
}

/// Normalizes windowed counts into popularity values.
pub fn inspo_series(counts: &[u64], w: &WindowSpec) -> Result<SeriesBody> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::UndefinedSeries);
    }
    let omega_prime = total as f64 / w.length() as f64;
    Ok(SeriesBody {
        omega_prime,
        inspo: counts.iter().map(|&c| c as f64 / omega_prime).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopularitySeries {
    pub instance: RelationInstance,
    pub grid: TimeGrid,
    pub window: WindowSpec,
    pub counts: Vec<u64>,
    pub omega_prime: f64,
    pub inspo: Vec<f64>,
}

/// Same shape as [`PopularitySeries`], built from oracle-labelled true mentions.
pub type OracleSeries = PopularitySeries;

impl PopularitySeries {
    /// Popularity on day `d`; 0 outside the grid.
    pub fn inspo_at(&self, d: NaiveDate) -> f64 {
        self.grid.index_of(d).map(|i| self.inspo[i]).unwrap_or(0.0)
    }

    /// Day with the highest popularity (earliest on ties).
    pub fn peak_day(&self) -> NaiveDate {
        let mut best = 0;
        for (i, &v) in self.inspo.iter().enumerate() {
            if v > self.inspo[best] {
                best = i;
            }
        }
        self.grid.date_at(best)
    }
}

pub fn popularity_series(
    instance: RelationInstance,
    mention_dates: &[NaiveDate],
    grid: &TimeGrid,
    w: &WindowSpec,
) -> Result<PopularitySeries> {
    let counts = window_counts(mention_dates, grid, w)?;
    let body = inspo_series(&counts, w)?;
    Ok(PopularitySeries {
        instance,
        grid: *grid,
        window: *w,
        counts,
        omega_prime: body.omega_prime,
        inspo: body.inspo,
    })
}

/// Popularity from the dates of every true mention rather than only the rule-matched ones.
pub fn oracle_inspo(
    instance: RelationInstance,
    true_mention_dates: &[NaiveDate],
    grid: &TimeGrid,
    w: &WindowSpec,
) -> Result<OracleSeries> {
    popularity_series(instance, true_mention_dates, grid, w)
}

pub type SeriesMap = BTreeMap<RelationInstance, PopularitySeries>;

/// Approximate series for each listed instance from its rule-matched mention
/// dates. Instances without evidence are skipped.
pub fn series_for_instances(
    instances: &[RelationInstance],
    evidence: &EvidenceMap,
    grid: &TimeGrid,
    w: &WindowSpec,
) -> Result<SeriesMap> {
    instances
        .par_iter()
        .filter_map(|inst| evidence.get(inst).map(|ev| (inst, ev)))
        .map(|(inst, ev)| {
            popularity_series(inst.clone(), &ev.mention_dates(), grid, w).map(|s| (inst.clone(), s))
        })
        .collect()
}
