#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};

pub const HEADER: &str = "Date;Time;Global_active_power;Global_reactive_power;Voltage;Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3";

/// Daily and weekly load shape plus deterministic jitter, in kW.
pub fn synthetic_gap(t: NaiveDateTime) -> f64 {
    let minute = f64::from(t.hour() * 60 + t.minute());
    let day = (t.date() - NaiveDate::from_ymd_opt(2006, 12, 1).unwrap()).num_days();
    let tau = std::f64::consts::TAU;
    let daily = 1.2 + 0.8 * (tau * (minute - 420.0) / 1440.0).sin() + 0.4 * (tau * 2.0 * minute / 1440.0).cos();
    let weekly = 0.2 * (tau * day as f64 / 7.0).sin();
    let jitter = ((day * 1440 + minute as i64).wrapping_mul(2_654_435_761) % 1000) as f64 / 1000.0 * 0.3;
    (daily + weekly + jitter).max(0.08)
}

/// A UCI-format file starting 2006-12-16 17:24 and covering `days` days.
/// Every 97th reading is missing.
pub fn synthetic_dataset(dir: &Path, days: i64) -> PathBuf {
    let start = NaiveDate::from_ymd_opt(2006, 12, 16).unwrap().and_hms_opt(17, 24, 0).unwrap();
    let mut s = String::with_capacity((days as usize) * 1440 * 64);
    s.push_str(HEADER);
    s.push('\n');
    for i in 0..days * 1440 {
        let t = start + Duration::minutes(i);
        let date = format!("{}/{}/{}", t.day0() + 1, t.month0() + 1, t.format("%Y"));
        if i % 97 == 5 {
            let _ = writeln!(s, "{date};{};?;?;?;?;?;?;", t.format("%H:%M:%S"));
        } else {
            let _ = writeln!(
                s,
                "{date};{};{:.3};0.100;240.000;5.000;0.000;1.000;17.000",
                t.format("%H:%M:%S"),
                synthetic_gap(t)
            );
        }
    }
    let path = dir.join("household_power_consumption.txt");
    std::fs::write(&path, s).unwrap();
    path
}


/// A small, fast configuration over two weeks of synthetic data.
pub fn tiny_config(dataset: &Path, cache: &Path, out: &Path) -> String {
    format!(
        r#"dataset = "{}"
cache_dir = "{}"
out = "{}"
start_date = "2006-12-18"
weeks = 2
window = 30
seed = 7

[svr]
epochs = 2

[recurrent]
hidden = 4
epochs = 2
batch_size = 64
"#,
        dataset.display(),
        cache.display(),
        out.display()
    )
}
