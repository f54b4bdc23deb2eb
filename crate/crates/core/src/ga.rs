//! Elitist real-coded genetic algorithm.
//!
//! One generation keeps the `elite_count` best members verbatim and fills the
//! remaining slots with offspring: two parents from a roulette wheel over
//! linearly scaled fitness, whole arithmetic crossover with probability
//! `p_crossover`, then single-gene uniform mutation of each child with
//! probability `p_mutation`.
//!
//! Fitness evaluation is the only parallel step. Each evaluation receives an
//! [`EvalContext`] naming its generation and population slot, from which the
//! caller derives any randomness it needs; results are gathered by index.

use std::cmp::Ordering;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::bounds::BoundsTable;
use crate::error::{Error, Result};

/// Candidate coefficients for one window, laid out week by week:
/// gene `k` belongs to week offset `k / num_regions` and region
/// `k % num_regions`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chromosome {
    genes: Vec<f64>,
    num_regions: usize,
}

impl Chromosome {
    pub fn new(genes: Vec<f64>, num_regions: usize) -> Result<Self> {
        if num_regions == 0 || genes.is_empty() || !genes.len().is_multiple_of(num_regions) {
            return Err(Error::Shape(format!(
                "{} genes cannot be split into weeks of {num_regions} regions",
                genes.len()
            )));
        }
        Ok(Self { genes, num_regions })
    }

    pub fn genes(&self) -> &[f64] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn num_regions(&self) -> usize {
        self.num_regions
    }

    pub fn weeks(&self) -> usize {
        self.genes.len() / self.num_regions
    }

    pub fn region_of(&self, gene: usize) -> usize {
        gene % self.num_regions
    }

    /// Genes split into one row per week.
    pub fn week_rows(&self) -> Vec<Vec<f64>> {
        self.genes
            .chunks(self.num_regions)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Mean over weeks of one region's genes.
    pub fn region_mean(&self, region: usize) -> f64 {
        let sum: f64 = self
            .genes
            .iter()
            .skip(region)
            .step_by(self.num_regions)
            .sum();
        sum / self.weeks() as f64
    }

    pub fn within(&self, bounds: &BoundsTable) -> bool {
        self.genes.iter().enumerate().all(|(k, &g)| {
            let (lb, ub) = bounds.get(self.region_of(k));
            lb <= g && g <= ub
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub pop_size: usize,
    pub max_generations: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub elite_count: usize,
    /// Relative improvement of the best fitness below which a generation
    /// counts as stalled.
    pub convergence_epsilon: f64,
    pub convergence_patience: usize,
    /// Linear-scaling offset: the worst member keeps weight
    /// `scaling_epsilon * (max - min + scaling_delta)`.
    pub scaling_epsilon: f64,
    pub scaling_delta: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            pop_size: 80,
            max_generations: 10,
            p_crossover: 0.8,
            p_mutation: 0.1,
            elite_count: 5,
            convergence_epsilon: 1e-3,
            convergence_patience: 3,
            scaling_epsilon: 0.1,
            scaling_delta: 1e-12,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size == 0 {
            return Err(Error::validation("opt_pop_size must be at least 1"));
        }
        if self.max_generations == 0 {
            return Err(Error::validation("opt_max_size must be at least 1"));
        }
        if self.elite_count >= self.pop_size {
            return Err(Error::validation(format!(
                "elite_count ({}) must be smaller than opt_pop_size ({})",
                self.elite_count, self.pop_size
            )));
        }
        for (name, p) in [
            ("p_crossover", self.p_crossover),
            ("p_mutation", self.p_mutation),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(format!("{name} must lie within [0, 1]")));
            }
        }
        if !(self.convergence_epsilon >= 0.0 && self.convergence_epsilon.is_finite()) {
            return Err(Error::validation(
                "convergence_epsilon must be a non-negative number",
            ));
        }
        if self.convergence_patience == 0 {
            return Err(Error::validation("convergence_patience must be at least 1"));
        }
        if !(self.scaling_epsilon > 0.0 && self.scaling_delta >= 0.0) {
            return Err(Error::validation(
                "scaling_epsilon must be positive and scaling_delta non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<Chromosome>,
    pub fitnesses: Option<Vec<f64>>,
    /// Fitness of the leading members copied over as elites; they are not
    /// re-evaluated.
    elite_fitness: Vec<f64>,
}

impl Population {
    pub fn new(members: Vec<Chromosome>) -> Self {
        Self {
            members,
            fitnesses: None,
            elite_fitness: Vec::new(),
        }
    }

    pub fn with_fitnesses(members: Vec<Chromosome>, fitnesses: Vec<f64>) -> Result<Self> {
        if members.len() != fitnesses.len() {
            return Err(Error::Shape(format!(
                "{} members but {} fitness values",
                members.len(),
                fitnesses.len()
            )));
        }
        Ok(Self {
            members,
            fitnesses: Some(fitnesses),
            elite_fitness: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Fitness values carried by the leading elite members.
    pub fn elite_fitness(&self) -> &[f64] {
        &self.elite_fitness
    }

    /// Index and fitness of the best member, ties going to the lower index.
    pub fn best(&self) -> Option<(usize, f64)> {
        let fit = self.fitnesses.as_ref()?;
        ranking(fit).first().map(|&i| (i, fit[i]))
    }

    fn require_fitnesses(&self) -> Result<&[f64]> {
        self.fitnesses
            .as_deref()
            .ok_or_else(|| Error::Shape("population has not been evaluated".into()))
    }
}

/// Indices sorted from best to worst fitness; ties keep index order.
fn ranking(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| match fitness[b].total_cmp(&fitness[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx
}

/// Where an evaluation sits in the run, used to derive its random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalContext {
    pub generation: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

pub fn init_population<R: Rng + ?Sized>(
    bounds: &BoundsTable,
    window_weeks: usize,
    cfg: &GaConfig,
    rng: &mut R,
) -> Population {
    let n = bounds.num_regions();
    let members = (0..cfg.pop_size)
        .map(|_| {
            let genes = (0..window_weeks * n)
                .map(|k| uniform_in(rng, bounds.get(k % n)))
                .collect();
            Chromosome {
                genes,
                num_regions: n,
            }
        })
        .collect();
    Population::new(members)
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, (lb, ub): (f64, f64)) -> f64 {
    if lb < ub {
        rng.random_range(lb..=ub)
    } else {
        lb
    }
}

/// Evaluate every member of `pop` in parallel.
pub fn evaluate<F>(pop: &Population, generation: usize, eval_fn: &F) -> Result<Vec<f64>>
where
    F: Fn(&Chromosome, EvalContext) -> Result<f64> + Sync,
{
    evaluate_with(&pop.members, generation, 0, eval_fn, Execution::Parallel)
}

/// Evaluate `members`, the first of which occupies population slot
/// `first_index`. The first failing slot (by index) is reported.
pub fn evaluate_with<F>(
    members: &[Chromosome],
    generation: usize,
    first_index: usize,
    eval_fn: &F,
    execution: Execution,
) -> Result<Vec<f64>>
where
    F: Fn(&Chromosome, EvalContext) -> Result<f64> + Sync,
{
    let one = |(offset, c): (usize, &Chromosome)| {
        let index = first_index + offset;
        eval_fn(c, EvalContext { generation, index }).map_err(|e| Error::Evaluation {
            index,
            source: Box::new(e),
        })
    };
    let results: Vec<Result<f64>> = match execution {
        Execution::Serial => members.iter().enumerate().map(one).collect(),
        Execution::Parallel => members.par_iter().enumerate().map(one).collect(),
    };
    results.into_iter().collect()
}

/// Roulette wheel over linearly scaled fitness
/// `f' = f - min(f) + eps * (max(f) - min(f) + delta)`.
#[derive(Debug, Clone)]
pub struct RouletteWheel {
    weights: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl RouletteWheel {
    pub fn new(fitness: &[f64], epsilon: f64, delta: f64) -> Result<Self> {
        let finite = || fitness.iter().copied().filter(|f| f.is_finite());
        let min = finite().fold(f64::INFINITY, f64::min);
        let max = finite().fold(f64::NEG_INFINITY, f64::max);
        if !min.is_finite() {
            return Err(Error::Shape("no finite fitness to select from".into()));
        }
        let floor = epsilon * (max - min + delta);
        let weights: Vec<f64> = fitness
            .iter()
            .map(|&f| if f.is_finite() { f - min + floor } else { 0.0 })
            .collect();
        let index = WeightedIndex::new(&weights)
            .map_err(|e| Error::Shape(format!("roulette weights: {e}")))?;
        Ok(Self { weights, index })
    }

    pub fn scaled(&self) -> &[f64] {
        &self.weights
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }

    pub fn spin<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

/// Two parent indices drawn independently from the roulette wheel.
pub fn select_parents<R: Rng + ?Sized>(
    pop: &Population,
    cfg: &GaConfig,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let wheel = RouletteWheel::new(
        pop.require_fitnesses()?,
        cfg.scaling_epsilon,
        cfg.scaling_delta,
    )?;
    Ok((wheel.spin(rng), wheel.spin(rng)))
}

/// Whole arithmetic crossover with one random weight per mating.
pub fn crossover<R: Rng + ?Sized>(
    a: &Chromosome,
    b: &Chromosome,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome)> {
    let weight: f64 = rng.random();
    crossover_with_weight(a, b, weight)
}

/// `(w a + (1-w) b, w b + (1-w) a)`, each gene kept inside the parents'
/// envelope.
pub fn crossover_with_weight(
    a: &Chromosome,
    b: &Chromosome,
    weight: f64,
) -> Result<(Chromosome, Chromosome)> {
    if a.genes.len() != b.genes.len() || a.num_regions != b.num_regions {
        return Err(Error::Shape(format!(
            "cannot cross chromosomes of length {} and {}",
            a.genes.len(),
            b.genes.len()
        )));
    }
    let mix = |x: f64, y: f64| {
        let v = weight * x + (1.0 - weight) * y;
        v.clamp(x.min(y), x.max(y))
    };
    let (c1, c2) = a
        .genes
        .iter()
        .zip(&b.genes)
        .map(|(&x, &y)| (mix(x, y), mix(y, x)))
        .unzip();
    Ok((
        Chromosome {
            genes: c1,
            num_regions: a.num_regions,
        },
        Chromosome {
            genes: c2,
            num_regions: a.num_regions,
        },
    ))
}

/// Resample one uniformly chosen gene within its region's bounds.
pub fn mutate<R: Rng + ?Sized>(c: &Chromosome, bounds: &BoundsTable, rng: &mut R) -> Chromosome {
    let mut out = c.clone();
    let k = rng.random_range(0..out.genes.len());
    out.genes[k] = uniform_in(rng, bounds.get(out.region_of(k)));
    out
}

/// Build the next population from an evaluated one. Elites occupy the first
/// `elite_count` slots, best first, and keep their fitness.
pub fn next_generation<R: Rng + ?Sized>(
    pop: &Population,
    bounds: &BoundsTable,
    cfg: &GaConfig,
    rng: &mut R,
) -> Result<Population> {
    let fitness = pop.require_fitnesses()?;
    let order = ranking(fitness);
    let elites = cfg.elite_count.min(pop.len());

    let mut members: Vec<Chromosome> = order[..elites]
        .iter()
        .map(|&i| pop.members[i].clone())
        .collect();
    let elite_fitness = order[..elites].iter().map(|&i| fitness[i]).collect();

    let wheel = RouletteWheel::new(fitness, cfg.scaling_epsilon, cfg.scaling_delta)?;
    while members.len() < cfg.pop_size {
        let (i, j) = (wheel.spin(rng), wheel.spin(rng));
        let (a, b) = (&pop.members[i], &pop.members[j]);
        let (mut c1, mut c2) = if rng.random::<f64>() < cfg.p_crossover {
            crossover(a, b, rng)?
        } else {
            (a.clone(), b.clone())
        };
        if rng.random::<f64>() < cfg.p_mutation {
            c1 = mutate(&c1, bounds, rng);
        }
        if rng.random::<f64>() < cfg.p_mutation {
            c2 = mutate(&c2, bounds, rng);
        }
        members.push(c1);
        if members.len() < cfg.pop_size {
            members.push(c2);
        }
    }

    Ok(Population {
        members,
        fitnesses: None,
        elite_fitness,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub best: Chromosome,
    pub best_fitness: f64,
    /// Best fitness of each evaluated generation.
    pub history: Vec<f64>,
}

impl GaOutcome {
    pub fn generations(&self) -> usize {
        self.history.len()
    }
}

fn relative_improvement(prev: f64, cur: f64) -> f64 {
    let gain = cur - prev;
    if prev == 0.0 {
        gain
    } else {
        gain / prev.abs()
    }
}

/// Run the GA until `max_generations` populations have been evaluated or the
/// best fitness stalls for `convergence_patience` consecutive generations.
pub fn run_ga<F, R>(
    bounds: &BoundsTable,
    window_weeks: usize,
    cfg: &GaConfig,
    eval_fn: &F,
    rng: &mut R,
) -> Result<GaOutcome>
where
    F: Fn(&Chromosome, EvalContext) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    run_ga_with(bounds, window_weeks, cfg, eval_fn, rng, Execution::Parallel)
}

pub fn run_ga_with<F, R>(
    bounds: &BoundsTable,
    window_weeks: usize,
    cfg: &GaConfig,
    eval_fn: &F,
    rng: &mut R,
    execution: Execution,
) -> Result<GaOutcome>
where
    F: Fn(&Chromosome, EvalContext) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if window_weeks == 0 {
        return Err(Error::validation("window must span at least one week"));
    }

    let mut pop = init_population(bounds, window_weeks, cfg, rng);
    let mut history = Vec::with_capacity(cfg.max_generations);
    let mut stalled = 0;

    for generation in 0..cfg.max_generations {
        if generation > 0 {
            pop = next_generation(&pop, bounds, cfg, rng)?;
        }
        let carried = pop.elite_fitness.len();
        let mut fit = pop.elite_fitness.clone();
        fit.extend(evaluate_with(
            &pop.members[carried..],
            generation,
            carried,
            eval_fn,
            execution,
        )?);
        pop.fitnesses = Some(fit);

        let (_, best) = pop.best().expect("population is non-empty");
        if let Some(&prev) = history.last() {
            if relative_improvement(prev, best) < cfg.convergence_epsilon {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        history.push(best);
        if stalled >= cfg.convergence_patience {
            break;
        }
    }

    let (i, best_fitness) = pop.best().expect("population is non-empty");
    Ok(GaOutcome {
        best: pop.members[i].clone(),
        best_fitness,
        history,
    })
}
