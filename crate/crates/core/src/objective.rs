//! Goodness of fit between simulated and observed ICU occupancy.

use crate::error::{Error, Result};
use crate::model::IcuTrajectory;

/// Dense daily observed ICU occupancy, `values[i][s]` on day `start_day + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSeries {
    start_day: u32,
    values: Vec<Vec<f64>>,
}

impl ObservedSeries {
    pub fn new(start_day: u32, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.first().map_or(0, Vec::len);
        if values.is_empty() || n == 0 {
            return Err(Error::ObservedData("no observations".into()));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != n {
                return Err(Error::ObservedData(format!(
                    "day {} has {} regions, expected {n}",
                    start_day + i as u32,
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|&&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::ObservedData(format!(
                    "day {} has invalid count {v}",
                    start_day + i as u32
                )));
            }
        }
        Ok(Self { start_day, values })
    }

    pub fn start_day(&self) -> u32 {
        self.start_day
    }

    pub fn last_day(&self) -> u32 {
        self.start_day + self.values.len() as u32 - 1
    }

    pub fn num_regions(&self) -> usize {
        self.values[0].len()
    }

    pub fn days(&self) -> usize {
        self.values.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn covers(&self, first_day: u32, last_day: u32) -> bool {
        first_day >= self.start_day && last_day <= self.last_day()
    }

    pub fn day(&self, day: u32) -> Option<&[f64]> {
        day.checked_sub(self.start_day)
            .and_then(|i| self.values.get(i as usize))
            .map(Vec::as_slice)
    }

    /// Rows for days `first_day..=last_day`.
    pub fn window(&self, first_day: u32, last_day: u32) -> Result<&[Vec<f64>]> {
        if first_day > last_day || !self.covers(first_day, last_day) {
            return Err(Error::ObservedCoverage {
                first_day,
                last_day,
            });
        }
        let a = (first_day - self.start_day) as usize;
        let b = (last_day - self.start_day) as usize;
        Ok(&self.values[a..=b])
    }

    /// Observed rows aligned with a simulated trajectory.
    pub fn aligned(&self, sim: &IcuTrajectory) -> Result<&[Vec<f64>]> {
        let last = sim
            .last_day()
            .ok_or_else(|| Error::Shape("empty trajectory".into()))?;
        self.window(sim.start_day, last)
    }
}

/// Root mean square error over an `m x n` grid of days by regions.
pub fn rmse(sim: &[Vec<f64>], obs: &[Vec<f64>]) -> Result<f64> {
    let m = obs.len();
    if m == 0 || sim.len() != m {
        return Err(Error::Shape(format!(
            "rmse needs equal, non-zero day counts (sim {}, obs {m})",
            sim.len()
        )));
    }
    let n = obs[0].len();
    if n == 0 {
        return Err(Error::Shape("rmse needs at least one region".into()));
    }
    let mut sum = 0.0;
    for (i, (s_row, o_row)) in sim.iter().zip(obs).enumerate() {
        if s_row.len() != n || o_row.len() != n {
            return Err(Error::Shape(format!("day {i} has a ragged row")));
        }
        sum += s_row
            .iter()
            .zip(o_row)
            .map(|(s, o)| (o - s) * (o - s))
            .sum::<f64>();
    }
    Ok((sum / (m * n) as f64).sqrt())
}

/// GA fitness of an objective value: larger is better.
pub fn fitness(objective: f64) -> f64 {
    -objective
}
