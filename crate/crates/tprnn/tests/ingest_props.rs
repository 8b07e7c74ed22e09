mod common;

use std::fmt::Write as _;

use chrono::{Duration, NaiveDate};
use proptest::prelude::*;

use tprnn::ucihpc::parse_ucihpc_reader;
use tprnn_core::series::impute_missing;

/// A file over `len` minutes from `start`, dropping rows where `keep` is
/// false and writing `?` where the reading is `None`.
fn file(start_minute: i64, rows: &[(bool, Option<f64>)]) -> String {
    let t0 = NaiveDate::from_ymd_opt(2007, 2, 27).unwrap().and_hms_opt(0, 0, 0).unwrap() + Duration::minutes(start_minute);
    let mut s = format!("{}\n", common::HEADER);
    for (i, (keep, gap)) in rows.iter().enumerate() {
        if !keep {
            continue;
        }
        let t = t0 + Duration::minutes(i as i64);
        let gap = gap.map_or("?".to_string(), |v| format!("{v:.3}"));
        let _ = writeln!(s, "{};{};{gap};0.1;240.0;5.0;0.0;1.0;17.0", t.format("%-d/%-m/%Y"), t.format("%H:%M:%S"));
    }
    s
}

fn rows() -> impl Strategy<Value = Vec<(bool, Option<f64>)>> {
    prop::collection::vec((prop::bool::weighted(0.9), prop::option::weighted(0.85, 0.0f64..9.0)), 2..3000)
        .prop_map(|mut r| {
            let last = r.len() - 1;
            r[0] = (true, Some(1.0));
            r[last].0 = true;
            r
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parse_then_impute_covers_the_span(start in 0i64..1440, r in rows()) {
        let text = file(start, &r);
        let recs = parse_ucihpc_reader(text.as_bytes(), "prop").unwrap();
        prop_assert_eq!(recs.len(), r.iter().filter(|x| x.0).count());
        let series = impute_missing(&recs).unwrap();
        let span = (recs.last().unwrap().timestamp() - recs[0].timestamp()).num_minutes() + 1;
        prop_assert_eq!(series.len() as i64, span);
        prop_assert!(series.values().iter().all(|v| v.is_finite()));
        let absent = r.iter().filter(|x| !x.0 || x.1.is_none()).count();
        prop_assert_eq!(series.imputed_count(), absent);
        for (i, (keep, gap)) in r.iter().enumerate() {
            if let (true, Some(v)) = (keep, gap) {
                let written: f64 = format!("{v:.3}").parse().unwrap();
                prop_assert_eq!(series.values()[i], written);
            }
        }
    }
}

#[test]
fn missing_minute_takes_the_mean_of_its_minute_of_day() {
    // minute-of-day 600 reads 2.0 and 4.0 on two days, missing on the third
    let mut r = vec![(true, Some(1.0)); 3 * 1440];
    r[600].1 = Some(2.0);
    r[1440 + 600].1 = Some(4.0);
    r[2 * 1440 + 600].1 = None;
    let recs = parse_ucihpc_reader(file(0, &r).as_bytes(), "toy").unwrap();
    let s = impute_missing(&recs).unwrap();
    assert_eq!(s.values()[2 * 1440 + 600], 3.0);
    assert_eq!(s.imputed_count(), 1);
}

#[test]
fn single_reading_fills_everything() {
    let mut r = vec![(true, None); 50];
    r[17].1 = Some(5.0);
    let s = impute_missing(&parse_ucihpc_reader(file(3, &r).as_bytes(), "toy").unwrap()).unwrap();
    assert!(s.values().iter().all(|v| *v == 5.0));
    assert_eq!(s.imputed_count(), 49);
}

#[test]
fn duplicate_rows_are_rejected() {
    let text = file(0, &[(true, Some(1.0)), (true, Some(2.0))]);
    let mut lines: Vec<&str> = text.lines().collect();
    lines.push(lines[2]);
    let recs = parse_ucihpc_reader(lines.join("\n").as_bytes(), "dup").unwrap();
    assert!(impute_missing(&recs).is_err());
}

#[test]
fn nothing_to_average() {
    let recs = parse_ucihpc_reader(file(0, &[(true, None), (true, None)]).as_bytes(), "none").unwrap();
    assert!(impute_missing(&recs).unwrap_err().to_string().contains("nothing to average"));
}
