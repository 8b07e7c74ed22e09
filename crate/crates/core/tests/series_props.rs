use chrono::{NaiveDate, Timelike};
use proptest::prelude::*;

use tprnn_core::series::{denormalize, impute_missing, normalize, slice_weeks, LoadSeries, NormalizationParams, RawRecord};
use tprnn_core::MINUTES_PER_WEEK;

fn records(start_minute: usize, gaps: &[Option<f64>]) -> Vec<RawRecord> {
    let t0 = NaiveDate::from_ymd_opt(2006, 12, 16).unwrap().and_hms_opt(0, 0, 0).unwrap()
        + chrono::Duration::minutes(start_minute as i64);
    gaps.iter()
        .enumerate()
        .map(|(i, gap)| {
            let ts = t0 + chrono::Duration::minutes(i as i64);
            RawRecord { date: ts.date(), minute: (ts.hour() * 60 + ts.minute()) as u16, gap: *gap }
        })
        .collect()
}

fn gaps() -> impl Strategy<Value = Vec<Option<f64>>> {
    prop::collection::vec(prop::option::weighted(0.8, 0.0f64..10.0), 1..4000)
        .prop_filter("at least one reading", |g| g.iter().any(Option::is_some))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn imputation_fills_gaps_and_keeps_readings(start in 0usize..1440, g in gaps()) {
        let recs = records(start, &g);
        let s = impute_missing(&recs).unwrap();
        prop_assert_eq!(s.len(), g.len());
        prop_assert!(s.values().iter().all(|v| v.is_finite()));
        for (i, gap) in g.iter().enumerate() {
            match gap {
                Some(v) => {
                    prop_assert_eq!(s.values()[i].to_bits(), v.to_bits());
                    prop_assert!(!s.imputed_mask()[i]);
                }
                None => prop_assert!(s.imputed_mask()[i]),
            }
        }
        prop_assert_eq!(s.imputed_count(), g.iter().filter(|v| v.is_none()).count());
    }

    #[test]
    fn imputation_is_idempotent(start in 0usize..1440, g in gaps()) {
        let once = impute_missing(&records(start, &g)).unwrap();
        let complete: Vec<Option<f64>> = once.values().iter().map(|v| Some(*v)).collect();
        let twice = impute_missing(&records(start, &complete)).unwrap();
        prop_assert_eq!(once.values(), twice.values());
        prop_assert_eq!(twice.imputed_count(), 0);
    }

    #[test]
    fn normalization_round_trips(
        min in -50.0f64..50.0,
        span in 1e-3f64..100.0,
        values in prop::collection::vec(-200.0f64..200.0, 1..200),
    ) {
        let params = NormalizationParams::new(min, min + span).unwrap();
        let t0 = NaiveDate::from_ymd_opt(2007, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let s = LoadSeries::from_values(t0, values.clone()).unwrap();
        let back = denormalize(&normalize(&s, &params).unwrap(), &params).unwrap();
        for (a, b) in values.iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{} vs {}", a, b);
        }
    }
}

#[test]
fn missing_minute_takes_minute_of_day_mean() {
    // three days, minute 5 missing on the last day
    let mut g: Vec<Option<f64>> = (0..3 * 1440).map(|i| Some((i / 1440) as f64)).collect();
    g[2 * 1440 + 5] = None;
    let s = impute_missing(&records(0, &g)).unwrap();
    assert_eq!(s.values()[2 * 1440 + 5], 0.5);
    assert_eq!(s.imputed_count(), 1);
}

#[test]
fn minute_never_observed_takes_global_mean() {
    let g = vec![Some(1.0), None, Some(3.0)];
    let s = impute_missing(&records(100, &g)).unwrap();
    assert_eq!(s.values(), [1.0, 2.0, 3.0]);
}

#[test]
fn bad_records_are_errors() {
    assert!(impute_missing(&[]).is_err());
    assert!(impute_missing(&records(0, &[None, None])).is_err());
    let mut dup = records(0, &[Some(1.0), Some(2.0)]);
    dup[1] = dup[0];
    assert!(impute_missing(&dup).is_err());
    let mut rev = records(0, &[Some(1.0), Some(2.0)]);
    rev.swap(0, 1);
    assert!(impute_missing(&rev).is_err());
    assert!(impute_missing(&records(0, &[Some(f64::NAN)])).is_err());
}

#[test]
fn normalization_bounds() {
    assert!(NormalizationParams::new(1.0, 1.0).is_err());
    assert!(NormalizationParams::new(2.0, 1.0).is_err());
    let p = NormalizationParams::fit(&[0.076, 3.0, 10.67]).unwrap();
    assert_eq!((p.normalize_value(0.076), p.normalize_value(10.67)), (0.0, 1.0));
}

#[test]
fn week_slicing() {
    let t0 = NaiveDate::from_ymd_opt(2006, 12, 16).unwrap().and_hms_opt(17, 24, 0).unwrap();
    let s = LoadSeries::from_values(t0, (0..4 * MINUTES_PER_WEEK).map(|i| i as f64).collect()).unwrap();
    let start = NaiveDate::from_ymd_opt(2006, 12, 18).unwrap();
    let weeks = slice_weeks(&s, start, 2).unwrap();
    assert_eq!(weeks.len(), 2);
    assert_eq!(weeks[0].len(), MINUTES_PER_WEEK);
    assert_eq!(weeks[0].start(), start.and_hms_opt(0, 0, 0).unwrap());
    assert_eq!(weeks[1].timestamp_at(MINUTES_PER_WEEK - 1), NaiveDate::from_ymd_opt(2006, 12, 31).unwrap().and_hms_opt(23, 59, 0).unwrap());
    assert!(slice_weeks(&s, start, 0).unwrap().is_empty());
    assert!(slice_weeks(&s, start, 4).is_err());
    assert!(slice_weeks(&s, NaiveDate::from_ymd_opt(2006, 12, 1).unwrap(), 1).is_err());
}
