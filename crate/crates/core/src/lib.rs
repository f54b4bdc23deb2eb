//! Calibration of time- and region-varying transmission coefficients for a
//! multi-region SEIR-ICU model.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`] – the discrete-time queue-based SEIR-ICU simulator and the
//!   [`CalibratableModel`] contract the calibrator drives.
//! * [`objective`] – RMSE goodness of fit and its negation as GA fitness.
//! * [`ga`] – an elitist real-coded genetic algorithm with roulette selection,
//!   whole arithmetic crossover and single-gene uniform mutation.
//! * [`calibrator`] – the overlapping sliding-window loop with directional
//!   bound adjustment and state hand-over between windows.
//! * [`io`] – configuration, observed data, result files and restart files.
//! * [`synthetic`] – ground-truth schedules and observations for testing.

pub mod bounds;
pub mod calibrator;
pub mod error;
pub mod ga;
pub mod io;
pub mod model;
pub mod objective;
pub mod seed;
pub mod synthetic;

pub use bounds::{BoundsTable, MU_MAX, MU_MIN};
pub use calibrator::{
    adjust_bounds, calibrate_auto, calibrate_auto_with, calibrate_oneoff, directional_diff,
    window_schedule, AdjustConfig, CalibrationResult, CalibrationSettings, FitSeries, RegionDiff,
    StartPoint, WindowConfig, WindowReport,
};
pub use error::{Error, Result};
pub use ga::{
    crossover, evaluate, evaluate_with, init_population, mutate, next_generation, run_ga,
    run_ga_with, select_parents, Chromosome, EvalContext, Execution, GaConfig, GaOutcome,
    Population, RouletteWheel,
};
pub use model::{
    init_state, simulate, simulate_ensemble, step_day, week_first_day, CalibratableModel,
    IcuTrajectory, ModelParams, MuSchedule, SeirIcuModel, SimState,
};
pub use objective::{fitness, rmse, ObservedSeries};
