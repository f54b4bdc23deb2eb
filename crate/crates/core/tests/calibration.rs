use std::ops::ControlFlow;

use oswcal_core::io::{load_restart, save_restart, RestartFile};
use oswcal_core::synthetic::{observe, truth_schedule, SyntheticConfig};
use oswcal_core::{
    calibrate_auto, calibrate_auto_with, calibrate_oneoff, init_state, rmse, simulate,
    AdjustConfig, BoundsTable, CalibrationSettings, Execution, GaConfig, ModelParams, MuSchedule,
    ObservedSeries, SeirIcuModel, StartPoint, WindowConfig, MU_MAX, MU_MIN,
};

const REGIONS: usize = 2;

fn setup(stochastic: bool, weeks: u32) -> (ModelParams, ObservedSeries) {
    let params = ModelParams {
        stochastic,
        ..ModelParams::with_population(vec![60_000, 40_000])
    };
    let truth = truth_schedule(REGIONS, weeks, &SyntheticConfig::default(), 3).unwrap();
    let obs = observe(
        &ModelParams {
            stochastic: false,
            ..params.clone()
        },
        &[300, 200],
        &truth,
        &SyntheticConfig::default(),
        3,
    )
    .unwrap();
    (params, obs)
}

fn settings(current_week: u32, replicates: usize) -> CalibrationSettings {
    CalibrationSettings {
        window: WindowConfig {
            start_week: 1,
            current_week,
            opt_window_size: 4,
            opt_shift_size: 1,
            auto_calibrate: true,
            sim_reload: false,
        },
        ga: GaConfig {
            pop_size: 12,
            max_generations: 4,
            elite_count: 2,
            ..GaConfig::default()
        },
        replicates,
        master_seed: 2024,
        adjust: AdjustConfig::default(),
        execution: Execution::Parallel,
    }
}

fn fresh(params: &ModelParams) -> StartPoint {
    StartPoint::fresh(init_state(params, &[300, 200], 1).unwrap()).unwrap()
}

fn full_bounds() -> BoundsTable {
    BoundsTable::uniform(REGIONS, MU_MIN, MU_MAX).unwrap()
}

#[test]
fn every_window_leaves_valid_bounds_and_threads_state() {
    let (params, obs) = setup(false, 8);
    let model = SeirIcuModel::new(params.clone()).unwrap();
    let s = settings(8, 1);
    let mut seen = Vec::new();
    let result = calibrate_auto_with(&s, &model, &obs, &full_bounds(), fresh(&params), |r| {
        for region in 0..REGIONS {
            let (lb, ub) = r.bounds.get(region);
            assert!(MU_MIN <= lb && lb <= ub && ub <= MU_MAX);
        }
        assert_eq!(r.checkpoint_week, r.start_week + 1);
        assert_eq!(r.state.day, 7 * r.start_week);
        seen.push((r.start_week, r.end_week));
        ControlFlow::Continue(())
    })
    .unwrap();

    assert_eq!(seen, result.windows);
    assert_eq!(seen.len(), 8);
    assert_eq!(result.per_window_rmse.len(), 8);
    assert!(result.per_window_rmse.iter().all(|&r| r >= 0.0));
    assert_eq!(result.schedule.first_week(), 1);
    assert_eq!(result.schedule.last_week(), Some(8));
    assert_eq!(result.restart_week, 9);
    assert_eq!(result.restart_state.day, 56);
    assert_eq!(result.fit.simulated.len(), 56);
}

#[test]
fn overlap_rows_come_from_the_latest_window() {
    let (params, obs) = setup(false, 6);
    let model = SeirIcuModel::new(params.clone()).unwrap();
    let s = settings(6, 1);
    let mut after_first = None;
    let result = calibrate_auto_with(&s, &model, &obs, &full_bounds(), fresh(&params), |r| {
        if r.index == 0 {
            after_first = Some(r.bounds.clone());
        }
        ControlFlow::Continue(())
    })
    .unwrap();
    let halted = calibrate_auto_with(&s, &model, &obs, &full_bounds(), fresh(&params), |_| {
        ControlFlow::Break(())
    })
    .unwrap();
    // Week 1 is written only by window 1; weeks 2..4 are rewritten later.
    assert_eq!(halted.schedule.week(1), result.schedule.week(1));
    assert_eq!(halted.schedule.last_week(), Some(4));
    assert_ne!(halted.schedule.week(2), result.schedule.week(2));
    assert_eq!(Some(halted.final_bounds), after_first);
}

#[test]
fn stochastic_run_resumes_exactly_from_a_restart_file() {
    let (params, obs) = setup(true, 7);
    let model = SeirIcuModel::new(params.clone()).unwrap();
    let s = settings(7, 3);
    let full = calibrate_auto(&s, &model, &obs, &full_bounds(), fresh(&params)).unwrap();

    let halted = calibrate_auto_with(&s, &model, &obs, &full_bounds(), fresh(&params), |r| {
        if r.index == 2 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
    .unwrap();
    assert_eq!(halted.restart_week, 4);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("restart.bin");
    save_restart(
        &RestartFile::new(
            halted.restart_week,
            halted.restart_state.clone(),
            halted.final_bounds.clone(),
            halted.settled_schedule(),
        ),
        &path,
    )
    .unwrap();
    let rf = load_restart(&path).unwrap();
    rf.validate_against(&params).unwrap();

    let mut resumed_settings = s.clone();
    resumed_settings.window.start_week = rf.week;
    resumed_settings.window.sim_reload = true;
    let start = StartPoint {
        state: rf.state,
        week: rf.week,
        history: rf.history,
    };
    let resumed = calibrate_auto(&resumed_settings, &model, &obs, &rf.bounds, start).unwrap();

    assert_eq!(resumed.schedule, full.schedule);
    assert_eq!(resumed.final_bounds, full.final_bounds);
    assert_eq!(resumed.restart_state, full.restart_state);
    assert_eq!(resumed.per_window_rmse[..], full.per_window_rmse[3..]);
}

#[test]
fn reload_requires_matching_start_week() {
    let (params, obs) = setup(false, 5);
    let model = SeirIcuModel::new(params.clone()).unwrap();
    let mut s = settings(5, 1);
    s.window.sim_reload = true;
    s.window.start_week = 2;
    let err = calibrate_auto(&s, &model, &obs, &full_bounds(), fresh(&params)).unwrap_err();
    assert!(err.is_validation(), "{err}");
}

#[test]
fn oneoff_matches_first_automated_window() {
    let (params, obs) = setup(false, 6);
    let model = SeirIcuModel::new(params.clone()).unwrap();
    let s = settings(6, 1);
    let auto = calibrate_auto_with(&s, &model, &obs, &full_bounds(), fresh(&params), |_| {
        ControlFlow::Break(())
    })
    .unwrap();
    let oneoff = calibrate_oneoff(1, 4, &s, &model, &obs, &full_bounds(), fresh(&params)).unwrap();
    assert_eq!(oneoff.schedule, auto.schedule);
    assert_eq!(oneoff.per_window_rmse, auto.per_window_rmse);
    assert_eq!(oneoff.final_bounds, full_bounds());
    assert_eq!(oneoff.restart_week, 5);
}

#[test]
fn oneoff_single_week_and_degenerate_bounds() {
    let (params, obs) = setup(false, 4);
    let model = SeirIcuModel::new(params.clone()).unwrap();
    let s = settings(4, 1);
    let fixed = BoundsTable::uniform(REGIONS, 0.55, 0.55).unwrap();
    let result = calibrate_oneoff(1, 1, &s, &model, &obs, &fixed, fresh(&params)).unwrap();
    assert_eq!(result.schedule.weeks(), 1);
    assert_eq!(result.schedule.week(1).unwrap(), &[0.55, 0.55]);

    let forced = MuSchedule::constant(1, 1, REGIONS, 0.55).unwrap();
    let (traj, _) = simulate(&fresh(&params).state, &forced, &params, 1, 1).unwrap();
    let expected = rmse(&traj.values, obs.window(0, 6).unwrap()).unwrap();
    assert_eq!(result.per_window_rmse, vec![expected]);
}

#[test]
fn oneoff_rejects_mismatched_restart_week() {
    let (params, obs) = setup(false, 4);
    let model = SeirIcuModel::new(params.clone()).unwrap();
    let err = calibrate_oneoff(
        2,
        3,
        &settings(4, 1),
        &model,
        &obs,
        &full_bounds(),
        fresh(&params),
    )
    .unwrap_err();
    assert!(err.is_validation(), "{err}");
}

#[test]
fn weeks_before_first_observation_hold_bound_midpoints() {
    let (params, obs) = setup(false, 6);
    // drop the first two weeks of observations
    let late = ObservedSeries::new(14, obs.rows()[14..].to_vec()).unwrap();
    let model = SeirIcuModel::new(params.clone()).unwrap();
    let bounds = BoundsTable::new(vec![0.2, 0.4], vec![0.6, 0.8]).unwrap();
    let result = calibrate_auto(&settings(6, 1), &model, &late, &bounds, fresh(&params)).unwrap();
    assert_eq!(result.windows[0], (3, 6));
    for w in 1..=2 {
        let row = result.schedule.week(w).unwrap();
        assert!((row[0] - 0.4).abs() < 1e-12 && (row[1] - 0.6).abs() < 1e-12);
    }
    assert_eq!(result.fit.observed[0], None);
    assert!(result.fit.observed[14].is_some());
}

#[test]
fn same_seed_same_result_across_execution_modes() {
    let (params, obs) = setup(true, 5);
    let model = SeirIcuModel::new(params.clone()).unwrap();
    let mut serial = settings(5, 2);
    serial.execution = Execution::Serial;
    let parallel = settings(5, 2);
    let a = calibrate_auto(&serial, &model, &obs, &full_bounds(), fresh(&params)).unwrap();
    let b = calibrate_auto(&parallel, &model, &obs, &full_bounds(), fresh(&params)).unwrap();
    assert_eq!(a, b);
}
