use chrono::{Duration, NaiveDate};
use proptest::prelude::*;
use timeds_core::popularity::{inspo_series, window_counts, TimeGrid, WindowSpec};

fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 5, 1).unwrap()
}

/// Grid length, window length and day offsets inside the grid.
fn scenario() -> impl Strategy<Value = (usize, usize, Vec<usize>)> {
    (prop::sample::select(vec![1usize, 3, 5, 7]), 7usize..90)
        .prop_flat_map(|(l, n)| (Just(n), Just(l), prop::collection::vec(0..n, 1..60)))
}

fn series(n: usize, l: usize, offsets: &[usize], shift: i64) -> (Vec<u64>, Vec<f64>) {
    let start = day0() + Duration::days(shift);
    let grid = TimeGrid::new(start, start + Duration::days(n as i64 - 1)).unwrap();
    let dates: Vec<NaiveDate> = offsets.iter().map(|&o| start + Duration::days(o as i64)).collect();
    let w = WindowSpec::new(l).unwrap();
    let counts = window_counts(&dates, &grid, &w).unwrap();
    let body = inspo_series(&counts, &w).unwrap();
    (counts, body.inspo)
}

proptest! {
    #[test]
    fn popularity_sums_to_window_length((n, l, offsets) in scenario()) {
        let (_, inspo) = series(n, l, &offsets, 0);
        let total: f64 = inspo.iter().sum();
        prop_assert!((total - l as f64).abs() <= 1e-9, "sum {total} for L={l}");
        prop_assert!(inspo.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn repeating_every_date_changes_nothing((n, l, offsets) in scenario(), k in 2usize..6) {
        let (_, a) = series(n, l, &offsets, 0);
        let repeated: Vec<usize> = offsets.iter().flat_map(|&o| std::iter::repeat_n(o, k)).collect();
        let (_, b) = series(n, l, &repeated, 0);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn shifting_grid_and_dates_together_changes_nothing((n, l, offsets) in scenario(), shift in -400i64..400) {
        prop_assert_eq!(series(n, l, &offsets, 0), series(n, l, &offsets, shift));
    }

    #[test]
    fn counts_never_exceed_window_mass((n, l, offsets) in scenario()) {
        let (counts, _) = series(n, l, &offsets, 0);
        let m = offsets.len() as u64;
        prop_assert!(counts.iter().all(|&c| c <= m));
        // each date lands in at most L windows and at least ceil(L/2)
        let total: u64 = counts.iter().sum();
        prop_assert!(total <= m * l as u64);
        prop_assert!(total >= m * (l as u64).div_ceil(2));
    }
}

#[test]
fn dates_on_day_three_three_and_five() {
    let grid = TimeGrid::new(day0(), day0() + Duration::days(6)).unwrap();
    let d = |k: i64| day0() + Duration::days(k - 1);
    let w = WindowSpec::new(3).unwrap();
    let counts = window_counts(&[d(3), d(3), d(5)], &grid, &w).unwrap();
    assert_eq!(counts, vec![0, 2, 2, 3, 1, 1, 0]);
    let inspo = inspo_series(&counts, &w).unwrap().inspo;
    let want = [0.0, 0.667, 0.667, 1.0, 0.333, 0.333, 0.0];
    for (got, want) in inspo.iter().zip(want) {
        assert!((got - want).abs() <= 1e-3, "{inspo:?}");
    }
}

#[test]
fn empty_series_is_rejected() {
    let w = WindowSpec::default();
    assert!(inspo_series(&[0, 0, 0], &w).is_err());
}
