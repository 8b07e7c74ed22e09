use std::collections::HashMap;

use chrono::NaiveDate;
use proptest::prelude::*;

use tprnn_core::pooling::{build_pools, make_windows, pooled_batches, segment_week, split_pools, PoolSet, SplitConfig};
use tprnn_core::series::LoadSeries;
use tprnn_core::MINUTES_PER_WEEK;

fn divisors() -> Vec<usize> {
    (1..=MINUTES_PER_WEEK).filter(|d| MINUTES_PER_WEEK % d == 0).collect()
}

fn week(index: usize, salt: u64) -> LoadSeries {
    let start = NaiveDate::from_ymd_opt(2006, 12, 18).unwrap().and_hms_opt(0, 0, 0).unwrap()
        + chrono::Duration::weeks(index as i64);
    // distinct values so identity checks can't alias
    let values = (0..MINUTES_PER_WEEK).map(|i| (index * MINUTES_PER_WEEK + i) as f64 + salt as f64 * 1e-3).collect();
    LoadSeries::from_values(start, values).unwrap()
}

fn key(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

#[test]
fn every_divisor_pair_partitions_a_week() {
    let w = week(0, 0);
    for n in divisors() {
        let m = MINUTES_PER_WEEK / n;
        let pools = build_pools(std::slice::from_ref(&w), n, m).unwrap();
        assert_eq!(pools.m(), m);
        assert_eq!(pools.segment_count(), m);
        let mut segs: Vec<_> = pools.segments().collect();
        segs.sort_by_key(|s| s.slot_index);
        let joined: Vec<f64> = segs.iter().flat_map(|s| s.values.iter().copied()).collect();
        assert_eq!(joined, w.values(), "n={n}");
        for (j, pool) in pools.pools().iter().enumerate() {
            assert!(pool.iter().all(|s| s.slot_index == j && s.values.len() == n));
        }
    }
}

#[test]
fn non_divisors_are_rejected() {
    let w = week(0, 0);
    for n in [11, 13, 17, 721, 10_081] {
        assert!(segment_week(&w, n, 0).is_err(), "n={n}");
    }
    assert!(build_pools(&[w], 720, 13).is_err());
}

#[test]
fn half_day_segmentation() {
    let pools = build_pools(&[week(0, 0)], 720, 14).unwrap();
    assert_eq!(pools.segment_count(), 14);
    let seg = &pools.pools()[3][0];
    assert_eq!(seg.start, NaiveDate::from_ymd_opt(2006, 12, 19).unwrap().and_hms_opt(12, 0, 0).unwrap());
    assert_eq!(seg.values[0], 3.0 * 720.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_is_a_partition(
        k in 1usize..7,
        n in prop::sample::select(divisors()),
        frac in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let weeks: Vec<_> = (0..k).map(|i| week(i, seed % 7)).collect();
        let pools = build_pools(&weeks, n, MINUTES_PER_WEEK / n).unwrap();
        match split_pools(&pools, &SplitConfig::new(frac, seed).unwrap()) {
            Ok((train, test)) => {
                let mut all: Vec<_> = train.segments().chain(test.segments()).map(|s| key(&s.values)).collect();
                let mut orig: Vec<_> = pools.segments().map(|s| key(&s.values)).collect();
                all.sort();
                orig.sort();
                prop_assert_eq!(&all, &orig);
                all.dedup();
                prop_assert_eq!(all.len(), orig.len());
                for (tr, te) in train.pools().iter().zip(test.pools()) {
                    let last_train = tr.iter().map(|s| s.week_index).max();
                    let first_test = te.iter().map(|s| s.week_index).min();
                    if let (Some(a), Some(b)) = (last_train, first_test) {
                        prop_assert!(a < b);
                    }
                }
            }
            Err(_) => {
                // only when one side would be empty everywhere
                let k_train = (frac * k as f64 + 0.5).floor() as usize;
                prop_assert!(k_train == 0 || k_train >= k);
            }
        }
    }

    #[test]
    fn windows_reconstruct_their_segment(w in 1usize..40, k in 1usize..3) {
        let weeks: Vec<_> = (0..k).map(|i| week(i, 0)).collect();
        let pools = build_pools(&weeks, 180, 56).unwrap();
        let by_id: HashMap<(usize, usize), &[f64]> =
            pools.segments().map(|s| ((s.week_index, s.slot_index), s.values.as_slice())).collect();
        let windows = make_windows(pools.segments(), w).unwrap();
        prop_assert_eq!(windows.len(), pools.segment_count() * (180 - w));
        for s in &windows {
            let src = by_id[&(s.week_index, s.pool_index)];
            prop_assert_eq!(&s.input[..], &src[s.offset..s.offset + w]);
            prop_assert_eq!(s.target.to_bits(), src[s.offset + w].to_bits());
        }
    }

    #[test]
    fn epoch_emits_every_sample_once(batch in 1usize..200, seed in any::<u64>()) {
        let pools = build_pools(&[week(0, 0)], 240, 42).unwrap();
        let mut batches = pooled_batches(&pools, 30, batch, seed).unwrap();
        let total = batches.samples().len();
        for _ in 0..2 {
            let epoch = batches.next_epoch();
            prop_assert_eq!(epoch.len(), batches.batches_per_epoch());
            prop_assert!(epoch.iter().all(|b| !b.is_empty() && b.len() <= batch));
            let mut seen = vec![0u8; total];
            for i in epoch.into_iter().flatten() {
                seen[i] += 1;
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}

#[test]
fn paper_scale_batch_count() {
    let weeks: Vec<_> = (0..1).map(|i| week(i, 0)).collect();
    let pools = build_pools(&weeks, 720, 14).unwrap();
    let batches = pooled_batches(&pools, 60, 32, 0).unwrap();
    assert_eq!(batches.samples().len(), 14 * 660);
    assert_eq!(batches.batches_per_epoch(), 289);
    assert_eq!(pooled_batches(&pools, 60, 100_000, 0).unwrap().next_epoch().len(), 1);
}

#[test]
fn batch_order_is_seeded() {
    let pools = build_pools(&[week(0, 0)], 720, 14).unwrap();
    let a = pooled_batches(&pools, 60, 32, 9).unwrap().next_epoch();
    let b = pooled_batches(&pools, 60, 32, 9).unwrap().next_epoch();
    let c = pooled_batches(&pools, 60, 32, 10).unwrap().next_epoch();
    assert_eq!(a, b);
    assert_ne!(a, c);
    // shuffled across pools, not pool by pool
    let s = pooled_batches(&pools, 60, 32, 9).unwrap();
    let first: std::collections::HashSet<_> = a[0].iter().map(|&i| s.samples()[i].pool_index).collect();
    assert!(first.len() > 1);
}

#[test]
fn four_week_split_sizes() {
    let weeks: Vec<_> = (0..4).map(|i| week(i, 0)).collect();
    let pools = build_pools(&weeks, 720, 14).unwrap();
    let (train, test) = split_pools(&pools, &SplitConfig::default()).unwrap();
    // 0.67 * 4 = 2.68 -> 3 train, 1 test per pool
    assert!(train.pools().iter().all(|p| p.len() == 3));
    assert!(test.pools().iter().all(|p| p.len() == 1 && p[0].week_index == 3));
    let empty = PoolSet::new(720, 14, vec![Vec::new(); 14]).unwrap();
    assert!(split_pools(&empty, &SplitConfig::default()).is_err());
}
