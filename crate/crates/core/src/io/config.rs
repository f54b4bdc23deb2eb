//! Plain-text configuration: one `key = value` per line, `#`
//! starts a comment. List values are comma separated; a single value is
//! broadcast to every region. Matrix rows (`mixing`) are separated by `;`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::bounds::BoundsTable;
use crate::calibrator::{AdjustConfig, CalibrationSettings, WindowConfig};
use crate::error::{Error, Result};
use crate::ga::{Execution, GaConfig};
use crate::model::{blended_mixing, init_state, ModelParams, SimState};
use crate::seed::{derive_seed, tag};
use crate::synthetic::SyntheticConfig;

/// Every recognized key, in rendering order.
pub const KEYS: &[&str] = &[
    "auto_calibrate",
    "sim_reload",
    "start_week",
    "current_week",
    "opt_window_size",
    "opt_shift_size",
    "opt_pop_size",
    "opt_max_size",
    "opt_lb",
    "opt_ub",
    "p_crossover",
    "p_mutation",
    "elite_count",
    "convergence_epsilon",
    "convergence_patience",
    "scaling_epsilon",
    "scaling_delta",
    "num_regions",
    "population",
    "initial_infected",
    "beta0",
    "latent_days",
    "infectious_days",
    "preicu_delay_days",
    "icu_stay_days",
    "p_icu",
    "mixing",
    "mixing_epsilon",
    "stochastic",
    "ensemble_replicates",
    "master_seed",
    "correct_kappa",
    "correct_coeff_min",
    "correct_coeff_max",
    "observed_path",
    "output_dir",
    "restart_path",
    "synthetic_mu_min",
    "synthetic_mu_max",
    "synthetic_block_weeks",
    "synthetic_noise",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub observed: PathBuf,
    pub output_dir: PathBuf,
    pub restart: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub window: WindowConfig,
    pub ga: GaConfig,
    pub model: ModelParams,
    pub initial_infected: Vec<u64>,
    pub bounds: BoundsTable,
    pub adjust: AdjustConfig,
    pub ensemble_replicates: usize,
    pub master_seed: u64,
    pub paths: Paths,
    pub synthetic: SyntheticConfig,
}

impl Config {
    pub fn settings(&self, execution: Execution) -> CalibrationSettings {
        CalibrationSettings {
            window: self.window.clone(),
            ga: self.ga.clone(),
            replicates: self.ensemble_replicates,
            master_seed: self.master_seed,
            adjust: self.adjust,
            execution,
        }
    }

    /// Day-0 state for a fresh run.
    pub fn initial_state(&self) -> Result<SimState> {
        init_state(
            &self.model,
            &self.initial_infected,
            derive_seed(self.master_seed, &[tag::INIT]),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.ga.validate()?;
        self.model.validate()?;
        self.adjust.validate()?;
        self.synthetic.validate()?;
        if self.bounds.num_regions() != self.model.num_regions {
            return Err(Error::validation("opt_lb/opt_ub need one value per region"));
        }
        if self.initial_infected.len() != self.model.num_regions {
            return Err(Error::validation(
                "initial_infected needs one value per region",
            ));
        }
        if let Some(s) = self
            .initial_infected
            .iter()
            .zip(&self.model.population)
            .position(|(i, p)| i > p)
        {
            return Err(Error::validation(format!(
                "initial_infected exceeds population in region {}",
                s + 1
            )));
        }
        if self.ensemble_replicates == 0 {
            return Err(Error::validation("ensemble_replicates must be at least 1"));
        }
        if self.paths.observed.as_os_str().is_empty()
            || self.paths.output_dir.as_os_str().is_empty()
        {
            return Err(Error::validation(
                "observed_path and output_dir must be non-empty",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Line(usize),
    Override,
}

#[derive(Debug)]
struct Entry {
    value: String,
    origin: Origin,
}

fn value_error(key: &str, origin: Origin, message: impl std::fmt::Display) -> Error {
    match origin {
        Origin::Line(line) => Error::ConfigParse {
            line,
            message: format!("{key}: {message}"),
        },
        Origin::Override => Error::validation(format!("--set {key}: {message}")),
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | ".true." | "1" | "yes" => Some(true),
        "false" | ".false." | "0" | "no" => Some(false),
        _ => None,
    }
}

struct Entries(BTreeMap<String, Entry>);

impl Entries {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.0.remove(key)
    }

    fn scalar<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.take(key)
            .map(|e| {
                e.value
                    .parse::<T>()
                    .map_err(|err| value_error(key, e.origin, format!("'{}': {err}", e.value)))
            })
            .transpose()
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.scalar(key)?
            .ok_or_else(|| Error::validation(format!("missing required key {key}")))
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        self.take(key)
            .map(|e| {
                parse_bool(&e.value).ok_or_else(|| {
                    value_error(key, e.origin, format!("'{}' is not a boolean", e.value))
                })
            })
            .transpose()
    }

    /// Comma-separated list; a single value is broadcast to `n` entries.
    fn list<T: FromStr + Clone>(&mut self, key: &str, n: usize) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.take(key) else {
            return Ok(None);
        };
        let items = e
            .value
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<T>()
                    .map_err(|err| value_error(key, e.origin, format!("'{}': {err}", v.trim())))
            })
            .collect::<Result<Vec<T>>>()?;
        match items.len() {
            1 => Ok(Some(vec![items[0].clone(); n])),
            len if len == n => Ok(Some(items)),
            len => Err(value_error(
                key,
                e.origin,
                format!("expected 1 or {n} values, got {len}"),
            )),
        }
    }

    fn matrix(&mut self, key: &str, n: usize) -> Result<Option<Vec<Vec<f64>>>> {
        let Some(e) = self.take(key) else {
            return Ok(None);
        };
        let rows = e
            .value
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|v| {
                        v.trim().parse::<f64>().map_err(|err| {
                            value_error(key, e.origin, format!("'{}': {err}", v.trim()))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(value_error(
                key,
                e.origin,
                format!("expected a {n}x{n} matrix"),
            ));
        }
        Ok(Some(rows))
    }
}

fn collect_entries(text: &str, overrides: &[(String, String)]) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigParse {
            line,
            message: format!("expected key = value, found '{content}'"),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::ConfigParse {
                line,
                message: format!("unknown key '{key}'"),
            });
        }
        let entry = Entry {
            value: value.trim().to_string(),
            origin: Origin::Line(line),
        };
        if map.insert(key.to_string(), entry).is_some() {
            return Err(Error::ConfigParse {
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
    }
    for (key, value) in overrides {
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::validation(format!("--set: unknown key '{key}'")));
        }
        map.insert(
            key.clone(),
            Entry {
                value: value.trim().to_string(),
                origin: Origin::Override,
            },
        );
    }
    Ok(Entries(map))
}

/// Split a `key=value` override.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| Error::validation(format!("--set expects key=value, got '{arg}'")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

pub fn parse_config(text: &str) -> Result<Config> {
    parse_config_with(text, &[])
}

/// Parse `text`, apply `overrides` on top, and validate the result.
pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<Config> {
    let mut e = collect_entries(text, overrides)?;

    let window = WindowConfig {
        auto_calibrate: e.boolean("auto_calibrate")?.unwrap_or(true),
        sim_reload: e.boolean("sim_reload")?.unwrap_or(false),
        start_week: e.required("start_week")?,
        current_week: e.required("current_week")?,
        opt_window_size: e.required("opt_window_size")?,
        opt_shift_size: e.required("opt_shift_size")?,
    };

    let defaults = GaConfig::default();
    let ga = GaConfig {
        pop_size: e.required("opt_pop_size")?,
        max_generations: e.required("opt_max_size")?,
        p_crossover: e.scalar("p_crossover")?.unwrap_or(defaults.p_crossover),
        p_mutation: e.scalar("p_mutation")?.unwrap_or(defaults.p_mutation),
        elite_count: e.scalar("elite_count")?.unwrap_or(defaults.elite_count),
        convergence_epsilon: e
            .scalar("convergence_epsilon")?
            .unwrap_or(defaults.convergence_epsilon),
        convergence_patience: e
            .scalar("convergence_patience")?
            .unwrap_or(defaults.convergence_patience),
        scaling_epsilon: e
            .scalar("scaling_epsilon")?
            .unwrap_or(defaults.scaling_epsilon),
        scaling_delta: e.scalar("scaling_delta")?.unwrap_or(defaults.scaling_delta),
    };

    let n: usize = e.required("num_regions")?;
    if n == 0 {
        return Err(Error::validation("num_regions must be at least 1"));
    }
    let population: Vec<u64> = e
        .list("population", n)?
        .ok_or_else(|| Error::validation("missing required key population"))?;
    let mut model = ModelParams::with_population(population);
    if let Some(v) = e.scalar("beta0")? {
        model.beta0 = v;
    }
    for (key, slot) in [
        ("latent_days", &mut model.latent_days),
        ("infectious_days", &mut model.infectious_days),
        ("preicu_delay_days", &mut model.preicu_delay_days),
        ("icu_stay_days", &mut model.icu_stay_days),
    ] {
        if let Some(v) = e.scalar(key)? {
            *slot = v;
        }
    }
    if let Some(v) = e.scalar("p_icu")? {
        model.p_icu = v;
    }
    if let Some(v) = e.boolean("stochastic")? {
        model.stochastic = v;
    }
    let explicit = e.matrix("mixing", n)?;
    let epsilon: Option<f64> = e.scalar("mixing_epsilon")?;
    model.mixing = match (explicit, epsilon) {
        (Some(_), Some(_)) => {
            return Err(Error::validation(
                "give either mixing or mixing_epsilon, not both",
            ))
        }
        (Some(m), None) => m,
        (None, Some(eps)) if eps >= 0.0 => blended_mixing(n, eps),
        (None, Some(_)) => return Err(Error::validation("mixing_epsilon must be non-negative")),
        (None, None) => blended_mixing(n, ModelParams::DEFAULT_MIXING_EPSILON),
    };

    let initial_infected = e.list("initial_infected", n)?.unwrap_or_else(|| vec![0; n]);
    let lb: Vec<f64> = e
        .list("opt_lb", n)?
        .ok_or_else(|| Error::validation("missing required key opt_lb"))?;
    let ub: Vec<f64> = e
        .list("opt_ub", n)?
        .ok_or_else(|| Error::validation("missing required key opt_ub"))?;
    let bounds = BoundsTable::new(lb, ub)?;

    let ad = AdjustConfig::default();
    let adjust = AdjustConfig {
        kappa: e.scalar("correct_kappa")?.unwrap_or(ad.kappa),
        coeff_min: e.scalar("correct_coeff_min")?.unwrap_or(ad.coeff_min),
        coeff_max: e.scalar("correct_coeff_max")?.unwrap_or(ad.coeff_max),
    };

    let sd = SyntheticConfig::default();
    let synthetic = SyntheticConfig {
        mu_min: e.scalar("synthetic_mu_min")?.unwrap_or(sd.mu_min),
        mu_max: e.scalar("synthetic_mu_max")?.unwrap_or(sd.mu_max),
        block_weeks: e.scalar("synthetic_block_weeks")?.unwrap_or(sd.block_weeks),
        noise: e.scalar("synthetic_noise")?.unwrap_or(sd.noise),
    };

    let paths = Paths {
        observed: e.required::<String>("observed_path")?.into(),
        output_dir: e.required::<String>("output_dir")?.into(),
        restart: e
            .scalar::<String>("restart_path")?
            .filter(|s| !s.is_empty())
            .map(PathBuf::from),
    };

    let config = Config {
        window,
        ga,
        model,
        initial_infected,
        bounds,
        adjust,
        ensemble_replicates: e.scalar("ensemble_replicates")?.unwrap_or(1),
        master_seed: e.scalar("master_seed")?.unwrap_or(0),
        paths,
        synthetic,
    };
    debug_assert!(e.0.is_empty(), "unconsumed keys: {:?}", e.0.keys());
    config.validate()?;
    Ok(config)
}

fn join<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Render a configuration so that [`parse_config`] reproduces it exactly.
pub fn render_config(c: &Config) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        writeln!(out, "{k} = {v}").expect("writing to a String");
    };
    kv("auto_calibrate", c.window.auto_calibrate.to_string());
    kv("sim_reload", c.window.sim_reload.to_string());
    kv("start_week", c.window.start_week.to_string());
    kv("current_week", c.window.current_week.to_string());
    kv("opt_window_size", c.window.opt_window_size.to_string());
    kv("opt_shift_size", c.window.opt_shift_size.to_string());
    kv("opt_pop_size", c.ga.pop_size.to_string());
    kv("opt_max_size", c.ga.max_generations.to_string());
    kv("opt_lb", join(c.bounds.lb()));
    kv("opt_ub", join(c.bounds.ub()));
    kv("p_crossover", c.ga.p_crossover.to_string());
    kv("p_mutation", c.ga.p_mutation.to_string());
    kv("elite_count", c.ga.elite_count.to_string());
    kv("convergence_epsilon", c.ga.convergence_epsilon.to_string());
    kv(
        "convergence_patience",
        c.ga.convergence_patience.to_string(),
    );
    kv("scaling_epsilon", c.ga.scaling_epsilon.to_string());
    kv("scaling_delta", c.ga.scaling_delta.to_string());
    kv("num_regions", c.model.num_regions.to_string());
    kv("population", join(&c.model.population));
    kv("initial_infected", join(&c.initial_infected));
    kv("beta0", c.model.beta0.to_string());
    kv("latent_days", c.model.latent_days.to_string());
    kv("infectious_days", c.model.infectious_days.to_string());
    kv("preicu_delay_days", c.model.preicu_delay_days.to_string());
    kv("icu_stay_days", c.model.icu_stay_days.to_string());
    kv("p_icu", c.model.p_icu.to_string());
    kv(
        "mixing",
        c.model
            .mixing
            .iter()
            .map(|r| join(r))
            .collect::<Vec<_>>()
            .join(";"),
    );
    kv("stochastic", c.model.stochastic.to_string());
    kv("ensemble_replicates", c.ensemble_replicates.to_string());
    kv("master_seed", c.master_seed.to_string());
    kv("correct_kappa", c.adjust.kappa.to_string());
    kv("correct_coeff_min", c.adjust.coeff_min.to_string());
    kv("correct_coeff_max", c.adjust.coeff_max.to_string());
    kv("observed_path", c.paths.observed.display().to_string());
    kv("output_dir", c.paths.output_dir.display().to_string());
    if let Some(r) = &c.paths.restart {
        kv("restart_path", r.display().to_string());
    }
    kv("synthetic_mu_min", c.synthetic.mu_min.to_string());
    kv("synthetic_mu_max", c.synthetic.mu_max.to_string());
    kv("synthetic_block_weeks", c.synthetic.block_weeks.to_string());
    kv("synthetic_noise", c.synthetic.noise.to_string());
    out
}
