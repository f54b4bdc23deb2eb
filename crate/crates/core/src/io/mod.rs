//! File formats: configuration, observed ICU data, result tables and restart
//! files.

pub mod config;
pub mod observed;
pub mod output;
pub mod restart;

use chrono::NaiveDate;

pub use config::{parse_config, parse_config_with, parse_override, render_config, Config, Paths};
pub use observed::{load_observed, write_observed};
pub use output::{read_schedule, write_fit, write_outputs, write_schedule, OutputFiles};
pub use restart::{load_restart, save_restart, RestartFile};

/// Day 0 of the simulation, the first day of week 1.
pub fn seed_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 9).expect("valid date")
}
