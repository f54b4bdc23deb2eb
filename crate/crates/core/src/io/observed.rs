//! Observed ICU occupancy: CSV with columns `date,region_id,icu_count`.
//! Dates are ISO-8601; regions are numbered 1..=n.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Duration, NaiveDate};

use super::seed_date;
use crate::error::{Error, Result};
use crate::objective::ObservedSeries;

fn data_error(row: usize, message: impl std::fmt::Display) -> Error {
    Error::ObservedData(format!("row {row}: {message}"))
}

/// Load a dense day-by-region series. Rows may come in any order; gaps,
/// duplicates and negative counts are rejected.
pub fn load_observed(path: impl AsRef<Path>) -> Result<ObservedSeries> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
    let headers = reader.headers().map_err(|source| Error::Csv {
        path: path.into(),
        source,
    })?;
    if headers.iter().collect::<Vec<_>>() != ["date", "region_id", "icu_count"] {
        return Err(Error::ObservedData(format!(
            "{}: expected header date,region_id,icu_count",
            path.display()
        )));
    }

    let seed = seed_date();
    let mut cells: BTreeMap<(u32, usize), f64> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| data_error(row, format!("bad date '{}': {e}", &record[0])))?;
        let offset = (date - seed).num_days();
        let day = u32::try_from(offset)
            .map_err(|_| data_error(row, format!("{date} is before the seed date {seed}")))?;
        let region: usize = record[1]
            .parse()
            .map_err(|e| data_error(row, format!("bad region_id '{}': {e}", &record[1])))?;
        if region == 0 {
            return Err(data_error(row, "region ids start at 1"));
        }
        let count: i64 = record[2]
            .parse()
            .map_err(|e| data_error(row, format!("bad icu_count '{}': {e}", &record[2])))?;
        if count < 0 {
            return Err(data_error(row, format!("negative count {count}")));
        }
        if cells.insert((day, region), count as f64).is_some() {
            return Err(data_error(
                row,
                format!("duplicate entry for {date}, region {region}"),
            ));
        }
    }

    let Some((&(first_day, _), _)) = cells.first_key_value() else {
        return Err(Error::ObservedData(format!("{}: no rows", path.display())));
    };
    let last_day = cells
        .last_key_value()
        .map(|(&(d, _), _)| d)
        .unwrap_or(first_day);
    let regions = cells.keys().map(|&(_, r)| r).max().unwrap_or(0);

    let mut values = Vec::with_capacity((last_day - first_day + 1) as usize);
    for day in first_day..=last_day {
        let row = (1..=regions)
            .map(|r| {
                cells.get(&(day, r)).copied().ok_or_else(|| {
                    let date = seed + Duration::days(day as i64);
                    Error::ObservedData(format!("gap: no entry for {date}, region {r}"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
    }
    ObservedSeries::new(first_day, values)
}

/// Write a series in the observed CSV format. Counts are rounded to integers.
pub fn write_observed(path: impl AsRef<Path>, obs: &ObservedSeries) -> Result<()> {
    let path = path.as_ref();
    let seed = seed_date();
    let mut out = String::from("date,region_id,icu_count\n");
    for (i, row) in obs.rows().iter().enumerate() {
        let date = seed + Duration::days(obs.start_day() as i64 + i as i64);
        for (s, v) in row.iter().enumerate() {
            writeln!(
                out,
                "{},{},{}",
                date.format("%Y-%m-%d"),
                s + 1,
                v.round() as u64
            )
            .expect("writing to a String");
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
