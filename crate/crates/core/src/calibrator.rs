//! Overlapping sliding-window calibration.
//!
//! Weeks `start_week..=current_week` are covered by windows of
//! `opt_window_size` weeks advanced by `opt_shift_size`. For each window the GA
//! searches the window's coefficients starting from the threaded model state,
//! the best chromosome is written into the result schedule (later windows
//! overwrite the overlap), the per-region search bounds are re-centred on the
//! window's mean coefficient in the direction indicated by the misfit on the
//! window's last day, and the model is advanced by `opt_shift_size` weeks with
//! the best coefficients to produce the next window's starting state.

use std::ops::ControlFlow;

use crate::bounds::{BoundsTable, MU_MAX, MU_MIN};
use crate::error::{Error, Result};
use crate::ga::{run_ga_with, Chromosome, EvalContext, Execution, GaConfig, GaOutcome};
use crate::model::{week_first_day, CalibratableModel, IcuTrajectory, MuSchedule, SimState};
use crate::objective::{fitness, rmse, ObservedSeries};
use crate::seed::{derive_seed, rng_from, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct WindowConfig {
    pub start_week: u32,
    pub current_week: u32,
    pub opt_window_size: u32,
    pub opt_shift_size: u32,
    pub auto_calibrate: bool,
    pub sim_reload: bool,
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.start_week == 0 {
            return Err(Error::validation("start_week must be at least 1"));
        }
        if self.start_week > self.current_week {
            return Err(Error::validation(format!(
                "start_week ({}) exceeds current_week ({})",
                self.start_week, self.current_week
            )));
        }
        if self.opt_window_size == 0 || self.opt_shift_size == 0 {
            return Err(Error::validation(
                "opt_window_size and opt_shift_size must be at least 1",
            ));
        }
        if self.opt_shift_size > self.opt_window_size {
            return Err(Error::validation(format!(
                "shift exceeds window (opt_shift_size {} > opt_window_size {})",
                self.opt_shift_size, self.opt_window_size
            )));
        }
        Ok(())
    }
}

/// Inclusive `(start, end)` week pairs of every window.
pub fn window_schedule(cfg: &WindowConfig) -> Vec<(u32, u32)> {
    let mut windows = Vec::new();
    let mut start = cfg.start_week;
    while start <= cfg.current_week {
        let end = (start + cfg.opt_window_size - 1).min(cfg.current_week);
        windows.push((start, end));
        start += cfg.opt_shift_size;
    }
    windows
}

/// Re-centre one region's search interval on `avg_mu`.
///
/// Simulated below observed (`diff < 0`) opens the interval upwards from
/// `avg_mu`, above observed opens it downwards, an exact match opens both
/// ways. Results are clamped to the global coefficient range.
pub fn adjust_bounds(avg_mu: f64, diff: f64, correct_coeff: f64) -> (f64, f64) {
    if diff < 0.0 {
        (avg_mu, (avg_mu + correct_coeff).min(MU_MAX))
    } else if diff > 0.0 {
        ((avg_mu - correct_coeff).max(MU_MIN), avg_mu)
    } else {
        (
            (avg_mu - correct_coeff).max(MU_MIN),
            (avg_mu + correct_coeff).min(MU_MAX),
        )
    }
}

/// Width of the bound correction as a function of last-day misfit:
/// `clamp(kappa * |diff| / max(obs, 1), coeff_min, coeff_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustConfig {
    pub kappa: f64,
    pub coeff_min: f64,
    pub coeff_max: f64,
}

impl Default for AdjustConfig {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            coeff_min: 0.05,
            coeff_max: 0.3,
        }
    }
}

impl AdjustConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.coeff_min >= 0.0 && self.coeff_min <= self.coeff_max) {
            return Err(Error::validation(
                "correction needs kappa >= 0 and 0 <= coeff_min <= coeff_max",
            ));
        }
        Ok(())
    }

    pub fn coefficient(&self, diff: f64, observed: f64) -> f64 {
        (self.kappa * diff.abs() / observed.max(1.0)).clamp(self.coeff_min, self.coeff_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionDiff {
    pub diff: f64,
    pub correct_coeff: f64,
}

/// Simulated minus observed occupancy on the last day of `end_week`, per
/// region, with the matching correction width.
pub fn directional_diff(
    eval_icu: &IcuTrajectory,
    obs: &ObservedSeries,
    end_week: u32,
    adjust: &AdjustConfig,
) -> Result<Vec<RegionDiff>> {
    let last_day = week_first_day(end_week) + 6;
    let sim = eval_icu
        .row(last_day)
        .ok_or_else(|| Error::Shape(format!("simulation does not reach day {last_day}")))?;
    let observed = obs.day(last_day).ok_or(Error::ObservedCoverage {
        first_day: last_day,
        last_day,
    })?;
    if sim.len() != observed.len() {
        return Err(Error::Shape(
            "region count differs from observations".into(),
        ));
    }
    Ok(sim
        .iter()
        .zip(observed)
        .map(|(&s, &o)| {
            let diff = s - o;
            RegionDiff {
                diff,
                correct_coeff: adjust.coefficient(diff, o),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSettings {
    pub window: WindowConfig,
    pub ga: GaConfig,
    pub replicates: usize,
    pub master_seed: u64,
    pub adjust: AdjustConfig,
    pub execution: Execution,
}

impl CalibrationSettings {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.ga.validate()?;
        self.adjust.validate()?;
        if self.replicates == 0 {
            return Err(Error::validation("ensemble_replicates must be at least 1"));
        }
        Ok(())
    }
}

/// Model state the calibration starts from, positioned on the first day of
/// `week`, plus coefficients already calibrated for earlier weeks.
#[derive(Debug, Clone, PartialEq)]
pub struct StartPoint {
    pub state: SimState,
    pub week: u32,
    pub history: MuSchedule,
}

impl StartPoint {
    pub fn fresh(state: SimState) -> Result<Self> {
        if state.day != 0 {
            return Err(Error::Shape("a fresh start must be on day 0".into()));
        }
        Ok(Self {
            state,
            week: 1,
            history: MuSchedule::empty(1),
        })
    }
}

/// Daily fitted trajectory next to the observations (where available).
#[derive(Debug, Clone, PartialEq)]
pub struct FitSeries {
    pub start_day: u32,
    pub simulated: Vec<Vec<f64>>,
    pub observed: Vec<Option<Vec<f64>>>,
}

impl FitSeries {
    /// Pair `sim` with whatever observations cover its days.
    pub fn new(sim: IcuTrajectory, obs: &ObservedSeries) -> Self {
        let observed = (0..sim.days())
            .map(|i| obs.day(sim.start_day + i as u32).map(<[f64]>::to_vec))
            .collect();
        Self {
            start_day: sim.start_day,
            simulated: sim.values,
            observed,
        }
    }

    /// RMSE over the days that have observations.
    pub fn rmse(&self) -> Option<f64> {
        let (sim, obs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = self
            .simulated
            .iter()
            .zip(&self.observed)
            .filter_map(|(s, o)| o.as_ref().map(|o| (s.clone(), o.clone())))
            .unzip();
        rmse(&sim, &obs).ok()
    }

    pub fn mean_observed(&self) -> Option<f64> {
        let vals: Vec<f64> = self.observed.iter().flatten().flatten().copied().collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    /// Calibrated coefficients, including any history carried in by a restart.
    pub schedule: MuSchedule,
    pub windows: Vec<(u32, u32)>,
    pub per_window_rmse: Vec<f64>,
    pub final_bounds: BoundsTable,
    /// State on the first day of `restart_week`.
    pub restart_state: SimState,
    pub restart_week: u32,
    pub fit: FitSeries,
}

impl CalibrationResult {
    /// Schedule rows that no later window can revise: every week before
    /// `restart_week`.
    pub fn settled_schedule(&self) -> MuSchedule {
        let mut s = self.schedule.clone();
        s.truncate_after(self.restart_week - 1);
        s
    }
}

/// Progress report passed to the observer after each window.
#[derive(Debug)]
pub struct WindowReport<'a> {
    pub index: usize,
    pub start_week: u32,
    pub end_week: u32,
    pub best_rmse: f64,
    pub generations: usize,
    pub bounds: &'a BoundsTable,
    /// Week whose first day `state` sits on.
    pub checkpoint_week: u32,
    pub state: &'a SimState,
}

struct WindowSearch<'a, M> {
    settings: &'a CalibrationSettings,
    model: &'a M,
    obs: &'a ObservedSeries,
}

impl<M: CalibratableModel> WindowSearch<'_, M> {
    fn seed(&self, parts: &[u64]) -> u64 {
        derive_seed(self.settings.master_seed, parts)
    }

    /// GA over weeks `start..=end` from `state`, which sits on `start`'s
    /// first day.
    fn optimize(
        &self,
        state: &SimState,
        start: u32,
        end: u32,
        bounds: &BoundsTable,
    ) -> Result<GaOutcome> {
        let first_day = week_first_day(start);
        let last_day = week_first_day(end) + 6;
        let target = self.obs.window(first_day, last_day)?;
        let replicates = self.settings.replicates;

        let eval = |c: &Chromosome, ctx: EvalContext| -> Result<f64> {
            let schedule = MuSchedule::new(start, c.week_rows())?;
            let seed = self.seed(&[
                tag::EVAL,
                start as u64,
                ctx.generation as u64,
                ctx.index as u64,
            ]);
            let (sim, _) = self
                .model
                .run(state, &schedule, start, end, replicates, seed)?;
            Ok(fitness(rmse(&sim.values, target)?))
        };
        let mut rng = rng_from(self.settings.master_seed, &[tag::GA, start as u64]);
        run_ga_with(
            bounds,
            (end - start + 1) as usize,
            &self.settings.ga,
            &eval,
            &mut rng,
            self.settings.execution,
        )
    }

    /// Advance `state` through weeks `start..=through` on replicate 0's stream.
    fn advance(
        &self,
        state: &SimState,
        schedule: &MuSchedule,
        start: u32,
        through: u32,
        key: u64,
    ) -> Result<SimState> {
        let seed = self.seed(&[tag::CHECKPOINT, key]);
        let (_, next) = self.model.run(state, schedule, start, through, 1, seed)?;
        Ok(next)
    }

    fn fit(
        &self,
        state: &SimState,
        schedule: &MuSchedule,
        start: u32,
        end: u32,
    ) -> Result<FitSeries> {
        let seed = self.seed(&[tag::FIT, start as u64]);
        let (sim, _) = self.model.run(
            state,
            &schedule.slice(start, end)?,
            start,
            end,
            self.settings.replicates,
            seed,
        )?;
        Ok(FitSeries::new(sim, self.obs))
    }
}

fn check_regions<M: CalibratableModel>(
    model: &M,
    obs: &ObservedSeries,
    bounds: &BoundsTable,
    start: &StartPoint,
) -> Result<()> {
    let params = model.params();
    let n = params.num_regions;
    if obs.num_regions() != n || bounds.num_regions() != n {
        return Err(Error::Shape(format!(
            "model has {n} regions, observations {}, bounds {}",
            obs.num_regions(),
            bounds.num_regions()
        )));
    }
    start.state.check_against(
        params,
        1e-6 * params.population.iter().max().copied().unwrap_or(1) as f64,
    )?;
    if start.state.day != week_first_day(start.week) {
        return Err(Error::Shape(format!(
            "start state is on day {}, not the first day of week {}",
            start.state.day, start.week
        )));
    }
    if !start.history.is_empty()
        && (start.history.num_regions() != n || start.history.last_week() != Some(start.week - 1))
    {
        return Err(Error::Shape(
            "carried schedule must end the week before the start week".into(),
        ));
    }
    Ok(())
}

/// Automated calibration over every window of `settings.window`.
pub fn calibrate_auto<M: CalibratableModel>(
    settings: &CalibrationSettings,
    model: &M,
    obs: &ObservedSeries,
    bounds0: &BoundsTable,
    start: StartPoint,
) -> Result<CalibrationResult> {
    calibrate_auto_with(settings, model, obs, bounds0, start, |_| {
        ControlFlow::Continue(())
    })
}

/// [`calibrate_auto`] with an observer called after every window; returning
/// `Break` stops the loop and yields the result reached so far, whose restart
/// payload resumes exactly where it stopped.
pub fn calibrate_auto_with<M, F>(
    settings: &CalibrationSettings,
    model: &M,
    obs: &ObservedSeries,
    bounds0: &BoundsTable,
    start: StartPoint,
    mut on_window: F,
) -> Result<CalibrationResult>
where
    M: CalibratableModel,
    F: FnMut(&WindowReport<'_>) -> ControlFlow<()>,
{
    settings.validate()?;
    check_regions(model, obs, bounds0, &start)?;
    let wcfg = &settings.window;
    if wcfg.sim_reload {
        if start.week != wcfg.start_week {
            return Err(Error::validation(format!(
                "restart state is for week {}, but start_week is {}",
                start.week, wcfg.start_week
            )));
        }
    } else if start.week > wcfg.start_week {
        return Err(Error::validation(format!(
            "start state is for week {}, after start_week {}",
            start.week, wcfg.start_week
        )));
    }

    let search = WindowSearch {
        settings,
        model,
        obs,
    };
    let StartPoint {
        state: initial_state,
        week: initial_week,
        history,
    } = start;

    let mut schedule = history;
    let mut bounds = bounds0.clone();
    let mut state = initial_state.clone();
    let mut state_week = initial_week;

    // The first window starts at the first week fully covered by observations.
    let first_observed_week = obs.start_day().div_ceil(7) + 1;
    let first_window = wcfg.start_week.max(first_observed_week);
    if first_window > wcfg.current_week {
        return Err(Error::ObservedCoverage {
            first_day: week_first_day(wcfg.start_week),
            last_day: week_first_day(wcfg.current_week) + 6,
        });
    }
    if state_week < first_window {
        // Weeks before the first window are not calibrated; hold each region
        // at the centre of its initial bounds.
        let fill = vec![bounds.midpoints(); (first_window - state_week) as usize];
        schedule.overwrite(state_week, &fill);
        let gap = MuSchedule::new(state_week, fill)?;
        state = search.advance(&state, &gap, state_week, first_window - 1, 0)?;
        state_week = first_window;
    }

    let windows = window_schedule(&WindowConfig {
        start_week: first_window,
        ..wcfg.clone()
    });
    let mut done = Vec::with_capacity(windows.len());
    let mut per_window_rmse = Vec::with_capacity(windows.len());

    for (index, &(ws, we)) in windows.iter().enumerate() {
        debug_assert_eq!(ws, state_week);
        let outcome = search.optimize(&state, ws, we, &bounds)?;
        let best = MuSchedule::new(ws, outcome.best.week_rows())?;
        schedule.overwrite(ws, best.rows());
        per_window_rmse.push(-outcome.best_fitness);
        done.push((ws, we));

        let seed = search.seed(&[tag::ADJUST, ws as u64]);
        let (eval_icu, _) = model.run(&state, &best, ws, we, settings.replicates, seed)?;
        let diffs = directional_diff(&eval_icu, obs, we, &settings.adjust)?;
        for (s, d) in diffs.iter().enumerate() {
            let (lb, ub) = adjust_bounds(outcome.best.region_mean(s), d.diff, d.correct_coeff);
            bounds.set(s, lb, ub);
        }

        let through = (ws + wcfg.opt_shift_size - 1).min(we);
        state = search.advance(&state, &best, ws, through, ws as u64)?;
        state_week = through + 1;

        let report = WindowReport {
            index,
            start_week: ws,
            end_week: we,
            best_rmse: -outcome.best_fitness,
            generations: outcome.generations(),
            bounds: &bounds,
            checkpoint_week: state_week,
            state: &state,
        };
        if on_window(&report).is_break() {
            break;
        }
    }

    let last_week = schedule.last_week().expect("at least one window ran");
    let fit = search.fit(&initial_state, &schedule, initial_week, last_week)?;
    Ok(CalibrationResult {
        schedule,
        windows: done,
        per_window_rmse,
        final_bounds: bounds,
        restart_state: state,
        restart_week: state_week,
        fit,
    })
}

/// Single GA post-tune of weeks `start_window..=end_window` from a restart
/// point on `start_window`'s first day. Bounds are left unchanged.
pub fn calibrate_oneoff<M: CalibratableModel>(
    start_window: u32,
    end_window: u32,
    settings: &CalibrationSettings,
    model: &M,
    obs: &ObservedSeries,
    bounds: &BoundsTable,
    restart: StartPoint,
) -> Result<CalibrationResult> {
    settings.ga.validate()?;
    settings.adjust.validate()?;
    if settings.replicates == 0 {
        return Err(Error::validation("ensemble_replicates must be at least 1"));
    }
    if start_window == 0 || start_window > end_window {
        return Err(Error::validation(format!(
            "tune window {start_window}..{end_window} is empty"
        )));
    }
    check_regions(model, obs, bounds, &restart)?;
    if restart.week != start_window {
        return Err(Error::validation(format!(
            "restart state is for week {}, tune window starts at week {start_window}",
            restart.week
        )));
    }

    let search = WindowSearch {
        settings,
        model,
        obs,
    };
    let outcome = search.optimize(&restart.state, start_window, end_window, bounds)?;
    let best = MuSchedule::new(start_window, outcome.best.week_rows())?;
    let mut schedule = restart.history;
    schedule.overwrite(start_window, best.rows());

    let state = search.advance(
        &restart.state,
        &best,
        start_window,
        end_window,
        start_window as u64,
    )?;
    let fit = search.fit(&restart.state, &schedule, start_window, end_window)?;
    Ok(CalibrationResult {
        schedule,
        windows: vec![(start_window, end_window)],
        per_window_rmse: vec![-outcome.best_fitness],
        final_bounds: bounds.clone(),
        restart_state: state,
        restart_week: end_window + 1,
        fit,
    })
}
