use oswcal_core::{
    crossover, evaluate, evaluate_with, init_population, mutate, next_generation, run_ga,
    run_ga_with, select_parents, BoundsTable, Chromosome, EvalContext, Execution, GaConfig,
    Population, RouletteWheel,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bounds_strategy() -> impl Strategy<Value = BoundsTable> {
    prop::collection::vec((0.1f64..=0.9, 0.1f64..=0.9), 1..6).prop_map(|pairs| {
        let (lb, ub): (Vec<f64>, Vec<f64>) =
            pairs.into_iter().map(|(a, b)| (a.min(b), a.max(b))).unzip();
        BoundsTable::new(lb, ub).unwrap()
    })
}

fn sphere(target: f64) -> impl Fn(&Chromosome, EvalContext) -> oswcal_core::Result<f64> + Sync {
    move |c, _| Ok(-c.genes().iter().map(|g| (g - target).powi(2)).sum::<f64>())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn every_generation_stays_within_bounds(
        bounds in bounds_strategy(),
        weeks in 1usize..5,
        seed in any::<u64>(),
        pm in 0.0f64..=1.0,
    ) {
        let cfg = GaConfig { pop_size: 12, elite_count: 2, p_mutation: pm, ..GaConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pop = init_population(&bounds, weeks, &cfg, &mut rng);
        let eval = sphere(0.5);
        for generation in 0..5 {
            prop_assert!(pop.members.iter().all(|c| c.within(&bounds)));
            prop_assert!(pop.members.iter().all(|c| c.len() == weeks * bounds.num_regions()));
            pop.fitnesses = Some(evaluate(&pop, generation, &eval).unwrap());
            pop = next_generation(&pop, &bounds, &cfg, &mut rng).unwrap();
        }
    }

    #[test]
    fn crossover_children_lie_between_parents(
        pairs in prop::collection::vec((0.1f64..=0.9, 0.1f64..=0.9), 1..20),
        seed in any::<u64>(),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (a, b) = (Chromosome::new(a, 1).unwrap(), Chromosome::new(b, 1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c1, c2) = crossover(&a, &b, &mut rng).unwrap();
        for child in [&c1, &c2] {
            for ((g, x), y) in child.genes().iter().zip(a.genes()).zip(b.genes()) {
                prop_assert!(x.min(*y) <= *g && *g <= x.max(*y));
            }
        }
        // One weight per mating: the children sum to the parents gene by gene.
        for (((g1, g2), x), y) in c1.genes().iter().zip(c2.genes()).zip(a.genes()).zip(b.genes()) {
            prop_assert!((g1 + g2 - x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mutation_changes_at_most_one_gene(
        bounds in bounds_strategy(),
        weeks in 1usize..5,
        seed in any::<u64>(),
    ) {
        let cfg = GaConfig { pop_size: 1, elite_count: 0, ..GaConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = init_population(&bounds, weeks, &cfg, &mut rng).members.remove(0);
        let m = mutate(&c, &bounds, &mut rng);
        let changed = c.genes().iter().zip(m.genes()).filter(|(x, y)| x != y).count();
        prop_assert!(changed <= 1);
        prop_assert!(m.within(&bounds));
    }

    #[test]
    fn same_seed_same_outcome(seed in any::<u64>(), bounds in bounds_strategy()) {
        let cfg = GaConfig { pop_size: 10, max_generations: 4, elite_count: 1, ..GaConfig::default() };
        let eval = sphere(0.3);
        let a = run_ga(&bounds, 2, &cfg, &eval, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = run_ga(&bounds, 2, &cfg, &eval, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a.best, b.best);
        prop_assert_eq!(a.history, b.history);
    }
}

#[test]
fn roulette_frequencies_match_scaled_fitness() {
    let fitness = [-10.0, -4.0, -2.5, -1.0, -7.0];
    let wheel = RouletteWheel::new(&fitness, 0.1, 1e-12).unwrap();

    // f - min + 0.1 * (max - min + 1e-12), normalized
    let (min, max) = (-10.0f64, -1.0f64);
    let weights: Vec<f64> = fitness
        .iter()
        .map(|f| f - min + 0.1 * (max - min + 1e-12))
        .collect();
    let total: f64 = weights.iter().sum();
    let expected: Vec<f64> = weights.iter().map(|w| w / total).collect();
    for (p, e) in wheel.probabilities().iter().zip(&expected) {
        assert!((p - e).abs() < 1e-12);
    }

    let draws = 100_000;
    let mut counts = [0usize; 5];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..draws {
        counts[wheel.spin(&mut rng)] += 1;
    }
    for (k, &p) in expected.iter().enumerate() {
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let dev = (counts[k] as f64 - draws as f64 * p).abs();
        assert!(
            dev <= 3.0 * sigma,
            "slot {k}: {} vs {}",
            counts[k],
            draws as f64 * p
        );
    }
}

#[test]
fn equal_fitness_gives_uniform_wheel() {
    let wheel = RouletteWheel::new(&[-3.0; 4], 0.1, 1e-12).unwrap();
    for p in wheel.probabilities() {
        assert!((p - 0.25).abs() < 1e-12);
    }
}

#[test]
fn selection_needs_evaluated_population() {
    let bounds = BoundsTable::uniform(2, 0.1, 0.9).unwrap();
    let cfg = GaConfig {
        pop_size: 4,
        elite_count: 1,
        ..GaConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pop = init_population(&bounds, 1, &cfg, &mut rng);
    assert!(select_parents(&pop, &cfg, &mut rng).is_err());
}

#[test]
fn serial_and_parallel_evaluation_agree() {
    let bounds = BoundsTable::uniform(3, 0.1, 0.9).unwrap();
    let cfg = GaConfig {
        pop_size: 30,
        max_generations: 6,
        ..GaConfig::default()
    };
    // Noise keyed by the evaluation coordinates, as a stochastic model would be.
    let eval = |c: &Chromosome, ctx: EvalContext| {
        let noise = ((ctx.generation * 31 + ctx.index) % 7) as f64 * 1e-3;
        Ok(-c.genes().iter().sum::<f64>() - noise)
    };
    let members = init_population(&bounds, 2, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).members;
    assert_eq!(
        evaluate_with(&members, 0, 0, &eval, Execution::Serial).unwrap(),
        evaluate_with(&members, 0, 0, &eval, Execution::Parallel).unwrap()
    );

    let serial = run_ga_with(
        &bounds,
        2,
        &cfg,
        &eval,
        &mut ChaCha8Rng::seed_from_u64(9),
        Execution::Serial,
    )
    .unwrap();
    let parallel = run_ga_with(
        &bounds,
        2,
        &cfg,
        &eval,
        &mut ChaCha8Rng::seed_from_u64(9),
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(serial.best, parallel.best);
    assert_eq!(serial.history, parallel.history);
}

#[test]
fn evaluation_error_names_lowest_failing_index() {
    let bounds = BoundsTable::uniform(1, 0.1, 0.9).unwrap();
    let cfg = GaConfig {
        pop_size: 20,
        elite_count: 1,
        ..GaConfig::default()
    };
    let pop = init_population(&bounds, 1, &cfg, &mut ChaCha8Rng::seed_from_u64(2));
    let eval = |_: &Chromosome, ctx: EvalContext| {
        if ctx.index % 5 == 3 {
            Err(oswcal_core::Error::Shape("boom".into()))
        } else {
            Ok(0.0)
        }
    };
    match evaluate(&pop, 0, &eval) {
        Err(oswcal_core::Error::Evaluation { index, .. }) => assert_eq!(index, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn elites_keep_their_stored_fitness() {
    let bounds = BoundsTable::uniform(1, 0.1, 0.9).unwrap();
    let cfg = GaConfig {
        pop_size: 6,
        elite_count: 2,
        ..GaConfig::default()
    };
    let members: Vec<Chromosome> = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
        .iter()
        .map(|&g| Chromosome::new(vec![g], 1).unwrap())
        .collect();
    let pop =
        Population::with_fitnesses(members, vec![-6.0, -1.0, -5.0, -1.0, -3.0, -4.0]).unwrap();
    let next = next_generation(&pop, &bounds, &cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    // ties resolve to the lower index
    assert_eq!(next.members[0].genes(), &[0.2]);
    assert_eq!(next.members[1].genes(), &[0.4]);
    assert_eq!(next.elite_fitness(), &[-1.0, -1.0]);
    assert_eq!(next.len(), 6);
}
