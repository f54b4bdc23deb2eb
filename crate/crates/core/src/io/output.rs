//! Result tables.
//!
//! * `R0effects.csv` – `week,1,2,...,n`, one row per calibrated week.
//! * `lbub.csv` – `region,lb,ub`, the search bounds for the next run.
//! * `fit.csv` – `day,region,observed,simulated`; `observed` is empty on days
//!   without data.
//!
//! Floats are written in the shortest form that parses back to the same
//! value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bounds::BoundsTable;
use crate::calibrator::{CalibrationResult, FitSeries};
use crate::error::{Error, Result};
use crate::model::MuSchedule;

pub const SCHEDULE_FILE: &str = "R0effects.csv";
pub const BOUNDS_FILE: &str = "lbub.csv";
pub const FIT_FILE: &str = "fit.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub schedule: PathBuf,
    pub bounds: PathBuf,
    pub fit: PathBuf,
}

fn write(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn render_schedule(schedule: &MuSchedule) -> String {
    let mut out = String::from("week");
    for s in 1..=schedule.num_regions() {
        write!(out, ",{s}").unwrap();
    }
    out.push('\n');
    for (k, row) in schedule.rows().iter().enumerate() {
        write!(out, "{}", schedule.first_week() + k as u32).unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn render_bounds(bounds: &BoundsTable) -> String {
    let mut out = String::from("region,lb,ub\n");
    for (s, (lb, ub)) in bounds.lb().iter().zip(bounds.ub()).enumerate() {
        writeln!(out, "{},{lb},{ub}", s + 1).unwrap();
    }
    out
}

pub fn render_fit(fit: &FitSeries) -> String {
    let mut out = String::from("day,region,observed,simulated\n");
    for (i, (sim, obs)) in fit.simulated.iter().zip(&fit.observed).enumerate() {
        let day = fit.start_day + i as u32;
        for (s, v) in sim.iter().enumerate() {
            match obs {
                Some(o) => writeln!(out, "{day},{},{},{v}", s + 1, o[s]).unwrap(),
                None => writeln!(out, "{day},{},,{v}", s + 1).unwrap(),
            }
        }
    }
    out
}

pub fn write_schedule(path: impl AsRef<Path>, schedule: &MuSchedule) -> Result<()> {
    write(path.as_ref(), render_schedule(schedule))
}

pub fn write_fit(path: impl AsRef<Path>, fit: &FitSeries) -> Result<()> {
    write(path.as_ref(), render_fit(fit))
}

/// Write `R0effects.csv`, `lbub.csv` and `fit.csv` into `out_dir`, creating it
/// if needed.
pub fn write_outputs(result: &CalibrationResult, out_dir: impl AsRef<Path>) -> Result<OutputFiles> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = OutputFiles {
        schedule: dir.join(SCHEDULE_FILE),
        bounds: dir.join(BOUNDS_FILE),
        fit: dir.join(FIT_FILE),
    };
    write(&files.schedule, render_schedule(&result.schedule))?;
    write(&files.bounds, render_bounds(&result.final_bounds))?;
    write(&files.fit, render_fit(&result.fit))?;
    Ok(files)
}

/// Read an `R0effects.csv` table back into a schedule.
pub fn read_schedule(path: impl AsRef<Path>) -> Result<MuSchedule> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.get(0) != Some("week") || headers.len() < 2 {
        return Err(Error::Shape(format!(
            "{}: expected header week,1,...,n",
            path.display()
        )));
    }
    let mut first_week = None;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let bad =
            |what: &str| Error::Shape(format!("{} row {}: bad {what}", path.display(), i + 2));
        let week: u32 = record[0].parse().map_err(|_| bad("week"))?;
        let expected = first_week.map_or(week, |f: u32| f + rows.len() as u32);
        if week != expected {
            return Err(bad("week sequence"));
        }
        first_week.get_or_insert(week);
        let row = record
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| bad("coefficient")))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let first = first_week.ok_or_else(|| Error::Shape(format!("{}: no rows", path.display())))?;
    MuSchedule::new(first, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_rows() {
        let b = BoundsTable::uniform(2, 0.1, 0.9).unwrap();
        assert_eq!(render_bounds(&b), "region,lb,ub\n1,0.1,0.9\n2,0.1,0.9\n");
    }

    #[test]
    fn schedule_shape_and_round_trip() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|w| {
                (0..3)
                    .map(|s| 0.1 + 0.8 * ((w * 3 + s) as f64 / 17.0).sqrt())
                    .collect()
            })
            .collect();
        let sched = MuSchedule::new(2, rows).unwrap();
        let text = render_schedule(&sched);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "week,1,2,3");
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(SCHEDULE_FILE);
        write_schedule(&p, &sched).unwrap();
        assert_eq!(read_schedule(&p).unwrap(), sched);
    }

    #[test]
    fn fit_leaves_missing_observations_empty() {
        let fit = FitSeries {
            start_day: 5,
            simulated: vec![vec![1.5], vec![2.0]],
            observed: vec![None, Some(vec![3.0])],
        };
        assert_eq!(
            render_fit(&fit),
            "day,region,observed,simulated\n5,1,,1.5\n6,1,3,2\n"
        );
    }
}
