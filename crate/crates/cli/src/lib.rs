//! The `oswcal` command-line driver: configuration in, calibration through
//! the core crate, result tables and restart files out.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use oswcal_core::io::{self, output, Config, RestartFile};
use oswcal_core::seed::{derive_seed, tag};
use oswcal_core::synthetic::{observe, truth_schedule};
use oswcal_core::{
    calibrate_auto_with, calibrate_oneoff, CalibratableModel, CalibrationResult, Error, Execution,
    FitSeries, SeirIcuModel, StartPoint, WindowReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Default restart file name inside the output directory.
pub const RESTART_FILE: &str = "restart.bin";
/// Ground-truth schedule written by `gen-synthetic`.
pub const TRUTH_FILE: &str = "truth.csv";

#[derive(Debug, Parser)]
#[command(
    name = "oswcal",
    version,
    about = "Sliding-window calibration of transmission coefficients"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Automated calibration over every sliding window.
    Calibrate(CalibrateArgs),
    /// One-off GA post-tune of a week range from a restart file.
    Tune(TuneArgs),
    /// Forward run of a coefficient schedule, writing fit.csv.
    Simulate(SimulateArgs),
    /// Ground-truth schedule plus the observations it produces.
    GenSynthetic(GenSyntheticArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Override a configuration entry (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Master seed; takes precedence over `master_seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for fitness evaluation.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Suppress progress messages.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Resume from this restart file.
    #[arg(long, value_name = "PATH")]
    pub restart: Option<PathBuf>,
    #[arg(long)]
    pub start_week: Option<u32>,
    /// Overrides `current_week`.
    #[arg(long)]
    pub end_week: Option<u32>,
    /// Stop after this many windows and write a restart file for the rest.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub halt_after: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_name = "PATH")]
    pub restart: Option<PathBuf>,
    /// Defaults to the restart file's week.
    #[arg(long)]
    pub start_week: Option<u32>,
    /// Defaults to one window after `start_week`, capped at `current_week`.
    #[arg(long)]
    pub end_week: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Schedule to run; defaults to R0effects.csv in the output directory.
    #[arg(long, value_name = "PATH")]
    pub schedule: Option<PathBuf>,
    /// Start from this restart file instead of day 0.
    #[arg(long, value_name = "PATH")]
    pub restart: Option<PathBuf>,
    #[arg(long)]
    pub end_week: Option<u32>,
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Where to write the truth schedule; defaults to truth.csv in the output directory.
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
}

/// An error tagged with the part of the pipeline that raised it.
#[derive(Debug)]
pub struct Failure {
    pub component: &'static str,
    pub error: Error,
    /// Input problems that core does not classify as validation errors.
    pub force_validation: bool,
}

impl Failure {
    fn new(component: &'static str, error: Error) -> Self {
        Self {
            component,
            error,
            force_validation: false,
        }
    }

    fn input(component: &'static str, error: Error) -> Self {
        Self {
            component,
            error,
            force_validation: true,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.force_validation || self.error.is_validation() {
            EXIT_VALIDATION
        } else {
            EXIT_RUNTIME
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.component, self.error)
    }
}

trait Context<T> {
    fn at(self, component: &'static str) -> Result<T, Failure>;
}

impl<T> Context<T> for oswcal_core::Result<T> {
    fn at(self, component: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(component, e))
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("oswcal: {f}");
            f.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Calibrate(a) => &a.common,
        Command::Tune(a) => &a.common,
        Command::Simulate(a) => &a.common,
        Command::GenSynthetic(a) => &a.common,
    };
    let threads = common.threads;
    let work = move || match &cli.command {
        Command::Calibrate(a) => calibrate(a),
        Command::Tune(a) => tune(a),
        Command::Simulate(a) => simulate(a),
        Command::GenSynthetic(a) => gen_synthetic(a),
    };
    match threads {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(|e| Failure::new("threads", Error::validation(e.to_string())))?
            .install(work),
    }
}

/// Read, override and validate the configuration. Relative paths in the file
/// resolve against the file's directory.
pub fn load_config(common: &CommonArgs) -> Result<Config, Failure> {
    let text = fs::read_to_string(&common.config).map_err(|e| {
        Failure::input(
            "config",
            Error::Io {
                path: common.config.clone(),
                source: e,
            },
        )
    })?;
    let mut overrides = common
        .overrides
        .iter()
        .map(|s| io::parse_override(s))
        .collect::<oswcal_core::Result<Vec<_>>>()
        .at("config")?;
    if let Some(seed) = common.seed {
        overrides.push(("master_seed".into(), seed.to_string()));
    }
    let mut cfg = io::parse_config_with(&text, &overrides).at("config")?;

    let base = common.config.parent().unwrap_or(Path::new(""));
    cfg.paths.observed = base.join(&cfg.paths.observed);
    cfg.paths.output_dir = match &common.out_dir {
        Some(d) => d.clone(),
        None => base.join(&cfg.paths.output_dir),
    };
    cfg.paths.restart = cfg.paths.restart.map(|p| base.join(p));
    Ok(cfg)
}

fn execution(common: &CommonArgs) -> Execution {
    match common.threads {
        Some(1) => Execution::Serial,
        _ => Execution::Parallel,
    }
}

fn load_restart(path: &Path, model: &SeirIcuModel) -> Result<RestartFile, Failure> {
    let rf = io::load_restart(path).at("restart")?;
    rf.validate_against(model.params()).at("restart")?;
    Ok(rf)
}

fn report_window(r: &WindowReport<'_>) {
    eprintln!(
        "window {}: weeks {}-{} rmse {:.4} after {} generations",
        r.index + 1,
        r.start_week,
        r.end_week,
        r.best_rmse,
        r.generations
    );
}

fn write_result(
    result: &CalibrationResult,
    cfg: &Config,
    out_dir: &Path,
    quiet: bool,
) -> Result<(), Failure> {
    let files = io::write_outputs(result, out_dir).at("output")?;
    let restart_path = cfg
        .paths
        .restart
        .clone()
        .unwrap_or_else(|| out_dir.join(RESTART_FILE));
    let rf = RestartFile::new(
        result.restart_week,
        result.restart_state.clone(),
        result.final_bounds.clone(),
        result.settled_schedule(),
    );
    io::save_restart(&rf, &restart_path).at("restart")?;
    if quiet {
        return Ok(());
    }
    eprintln!(
        "wrote {}, {}, {} and {} (restart week {})",
        files.schedule.display(),
        files.bounds.display(),
        files.fit.display(),
        restart_path.display(),
        result.restart_week
    );
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> Result<(), Failure> {
    let mut cfg = load_config(&args.common)?;
    if !cfg.window.auto_calibrate {
        return Err(Failure::new(
            "config",
            Error::validation("calibrate needs auto_calibrate = true; use tune for one-off runs"),
        ));
    }
    if let Some(end) = args.end_week {
        cfg.window.current_week = end;
    }
    let model = SeirIcuModel::new(cfg.model.clone()).at("model")?;
    let obs = io::load_observed(&cfg.paths.observed).at("observed data")?;

    let restart_path = args.restart.clone().or_else(|| {
        cfg.window
            .sim_reload
            .then(|| cfg.paths.restart.clone())
            .flatten()
    });
    let (start, bounds) = match restart_path {
        Some(path) => {
            let rf = load_restart(&path, &model)?;
            cfg.window.sim_reload = true;
            cfg.window.start_week = args.start_week.unwrap_or(rf.week);
            let start = StartPoint {
                state: rf.state,
                week: rf.week,
                history: rf.history,
            };
            (start, rf.bounds)
        }
        None if cfg.window.sim_reload => {
            return Err(Failure::new(
                "restart",
                Error::validation("sim_reload is set but no restart file was given"),
            ));
        }
        None => {
            if let Some(w) = args.start_week {
                cfg.window.start_week = w;
            }
            let state = cfg.initial_state().at("model")?;
            (StartPoint::fresh(state).at("model")?, cfg.bounds.clone())
        }
    };
    cfg.window.validate().at("config")?;

    let settings = cfg.settings(execution(&args.common));
    let halt_after = args.halt_after.map(|k| k as usize);
    let result = calibrate_auto_with(&settings, &model, &obs, &bounds, start, |r| {
        if !args.common.quiet {
            report_window(r);
        }
        match halt_after {
            Some(k) if r.index + 1 >= k => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    })
    .at("calibration")?;
    write_result(&result, &cfg, &cfg.paths.output_dir, args.common.quiet)
}

fn tune(args: &TuneArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let Some(path) = &args.restart else {
        return Err(Failure::new(
            "restart",
            Error::validation("tune requires --restart <PATH>"),
        ));
    };
    let model = SeirIcuModel::new(cfg.model.clone()).at("model")?;
    let obs = io::load_observed(&cfg.paths.observed).at("observed data")?;
    let rf = load_restart(path, &model)?;

    let start_week = args.start_week.unwrap_or(rf.week);
    let end_week = args.end_week.unwrap_or_else(|| {
        (start_week + cfg.window.opt_window_size - 1)
            .min(cfg.window.current_week)
            .max(start_week)
    });
    let start = StartPoint {
        state: rf.state,
        week: rf.week,
        history: rf.history,
    };
    let settings = cfg.settings(execution(&args.common));
    let result = calibrate_oneoff(
        start_week,
        end_week,
        &settings,
        &model,
        &obs,
        &cfg.bounds,
        start,
    )
    .at("tune")?;
    if !args.common.quiet {
        eprintln!(
            "tuned weeks {}-{} rmse {:.4}",
            start_week, end_week, result.per_window_rmse[0]
        );
    }
    write_result(&result, &cfg, &cfg.paths.output_dir, args.common.quiet)
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let out_dir = &cfg.paths.output_dir;
    let model = SeirIcuModel::new(cfg.model.clone()).at("model")?;
    let obs = io::load_observed(&cfg.paths.observed).at("observed data")?;
    let schedule_path = args
        .schedule
        .clone()
        .unwrap_or_else(|| out_dir.join(output::SCHEDULE_FILE));
    let schedule = io::read_schedule(&schedule_path).at("schedule")?;

    let (state, start_week) = match &args.restart {
        Some(path) => {
            let rf = load_restart(path, &model)?;
            (rf.state, rf.week)
        }
        None => (cfg.initial_state().at("model")?, 1),
    };
    let end_week = match args.end_week.or(schedule.last_week()) {
        Some(w) => w,
        None => {
            return Err(Failure::new(
                "schedule",
                Error::validation("schedule is empty"),
            ));
        }
    };
    let seed = derive_seed(cfg.master_seed, &[tag::FIT, start_week as u64]);
    let (sim, _) = model
        .run(
            &state,
            &schedule.slice(start_week, end_week).at("schedule")?,
            start_week,
            end_week,
            cfg.ensemble_replicates,
            seed,
        )
        .at("simulation")?;
    let fit = FitSeries::new(sim, &obs);
    fs::create_dir_all(out_dir).map_err(|e| {
        Failure::new(
            "output",
            Error::Io {
                path: out_dir.clone(),
                source: e,
            },
        )
    })?;
    let path = out_dir.join(output::FIT_FILE);
    io::write_fit(&path, &fit).at("output")?;
    if !args.common.quiet {
        match fit.rmse() {
            Some(r) => eprintln!("wrote {} (rmse {r:.4})", path.display()),
            None => eprintln!("wrote {}", path.display()),
        }
    }
    Ok(())
}

fn gen_synthetic(args: &GenSyntheticArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.common)?;
    let weeks = cfg.window.current_week;
    let truth = truth_schedule(
        cfg.model.num_regions,
        weeks,
        &cfg.synthetic,
        cfg.master_seed,
    )
    .at("synthetic")?;
    let obs = observe(
        &cfg.model,
        &cfg.initial_infected,
        &truth,
        &cfg.synthetic,
        cfg.master_seed,
    )
    .at("synthetic")?;

    let truth_path = args
        .truth
        .clone()
        .unwrap_or_else(|| cfg.paths.output_dir.join(TRUTH_FILE));
    for p in [&truth_path, &cfg.paths.observed] {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| {
                Failure::new(
                    "output",
                    Error::Io {
                        path: dir.to_path_buf(),
                        source: e,
                    },
                )
            })?;
        }
    }
    io::write_observed(&cfg.paths.observed, &obs).at("observed data")?;
    io::write_schedule(&truth_path, &truth).at("output")?;
    if args.common.quiet {
        return Ok(());
    }
    eprintln!(
        "wrote {} ({} days) and {}",
        cfg.paths.observed.display(),
        obs.days(),
        truth_path.display()
    );
    Ok(())
}
