//! Synthetic ground truth for recovery tests: a piecewise-constant
//! coefficient schedule and the ICU occupancy it produces.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::bounds::{MU_MAX, MU_MIN};
use crate::error::{Error, Result};
use crate::model::{init_state, simulate_ensemble, ModelParams, MuSchedule};
use crate::objective::ObservedSeries;
use crate::seed::{derive_seed, rng_from, tag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub mu_min: f64,
    pub mu_max: f64,
    /// Weeks between changes of each region's coefficient.
    pub block_weeks: u32,
    /// Standard deviation of multiplicative Gaussian observation noise.
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            mu_min: 0.4,
            mu_max: 0.8,
            block_weeks: 4,
            noise: 0.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(MU_MIN <= self.mu_min && self.mu_min <= self.mu_max && self.mu_max <= MU_MAX) {
            return Err(Error::validation(format!(
                "synthetic coefficient range must satisfy {MU_MIN} <= min <= max <= {MU_MAX}"
            )));
        }
        if self.block_weeks == 0 {
            return Err(Error::validation(
                "synthetic_block_weeks must be at least 1",
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::validation("synthetic_noise must be non-negative"));
        }
        Ok(())
    }
}

/// Weeks `1..=weeks`, each region redrawn uniformly from
/// `[mu_min, mu_max]` every `block_weeks` weeks.
pub fn truth_schedule(
    num_regions: usize,
    weeks: u32,
    cfg: &SyntheticConfig,
    seed: u64,
) -> Result<MuSchedule> {
    cfg.validate()?;
    let mut rng = rng_from(seed, &[tag::SYNTHETIC, 0]);
    let mut current = vec![0.0; num_regions];
    let rows = (0..weeks)
        .map(|k| {
            if k % cfg.block_weeks == 0 {
                for v in &mut current {
                    *v = if cfg.mu_min < cfg.mu_max {
                        rng.random_range(cfg.mu_min..=cfg.mu_max)
                    } else {
                        cfg.mu_min
                    };
                }
            }
            current.clone()
        })
        .collect();
    MuSchedule::new(1, rows)
}

/// Observed series produced by `truth` from a fresh start, rounded to whole
/// patients after optional multiplicative noise.
pub fn observe(
    params: &ModelParams,
    initial_infected: &[u64],
    truth: &MuSchedule,
    cfg: &SyntheticConfig,
    seed: u64,
) -> Result<ObservedSeries> {
    cfg.validate()?;
    let last = truth
        .last_week()
        .ok_or_else(|| Error::validation("truth schedule is empty"))?;
    let state = init_state(
        params,
        initial_infected,
        derive_seed(seed, &[tag::SYNTHETIC, 1]),
    )?;
    let (traj, _) = simulate_ensemble(
        &state,
        truth,
        params,
        truth.first_week(),
        last,
        1,
        derive_seed(seed, &[tag::SYNTHETIC, 2]),
    )?;

    let mut rng = rng_from(seed, &[tag::SYNTHETIC, 3]);
    let normal = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).expect("valid sd");
    let values = traj
        .values
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|v| {
                    let noisy = if cfg.noise > 0.0 {
                        v * (1.0 + normal.sample(&mut rng))
                    } else {
                        v
                    };
                    noisy.max(0.0).round()
                })
                .collect()
        })
        .collect();
    ObservedSeries::new(traj.start_day, values)
}
