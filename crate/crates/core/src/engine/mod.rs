//! Generational evolution of expression trees.
//!
//! Per generation: sample the training rows, evaluate every individual in
//! parallel, record statistics, then breed the next population (elitism,
//! tournament selection, subtree crossover, point mutation). All randomness
//! comes from streams keyed by (seed, generation, slot), so results do not
//! depend on how many threads evaluate or breed.

mod init;
mod operators;
mod regime;

use std::io::{self, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{BacktestError, BacktestResult, Backtester, Fitness};
use crate::market_data::FeatureTable;
use crate::variants::{ExprTree, Kind, PrimitiveSet, Variant};

pub use init::TreeGenerator;
pub use operators::{best_index, point_mutation, rank_order, subtree_crossover, tournament_select};
pub use regime::{sample_training_window, segment, TrainingRegime, TrainingWindow};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no {kind} tree fits within depth {depth}")]
    Unreachable { kind: Kind, depth: usize },
    #[error("training range of {rows} rows is too short (need at least {needed})")]
    TrainingTooShort { rows: usize, needed: usize },
    #[error("generation {generation}: {message}")]
    Invariant { generation: usize, message: String },
    #[error(transparent)]
    Backtest(#[from] BacktestError),
}

/// Depth and size caps every individual must respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_depth: usize,
    pub max_size: usize,
}

impl Limits {
    pub fn admits(&self, tree: &ExprTree) -> bool {
        tree.depth() <= self.max_depth && tree.size() <= self.max_size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub variant: Variant,
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub elitism: usize,
    pub max_depth: usize,
    pub max_size: usize,
    pub init_min_depth: usize,
    pub init_max_depth: usize,
    pub seed: u64,
    pub regime: TrainingRegime,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            variant: Variant::Stvgp,
            population_size: 3000,
            generations: 50,
            tournament_size: 30,
            mutation_rate: 0.001,
            crossover_rate: 0.9,
            elitism: 1,
            max_depth: 13,
            max_size: 90,
            init_min_depth: 2,
            init_max_depth: 6,
            seed: 0,
            regime: TrainingRegime::default(),
        }
    }
}

impl EvolutionConfig {
    pub fn limits(&self) -> Limits {
        Limits {
            max_depth: self.max_depth,
            max_size: self.max_size,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let fail = |m: &str| Err(EngineError::Config(m.to_string()));
        if self.population_size == 0 {
            return fail("population_size must be positive");
        }
        if self.generations == 0 {
            return fail("generations must be at least 1");
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return fail("tournament_size must be in 1..=population_size");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) || !(0.0..=1.0).contains(&self.crossover_rate)
        {
            return fail("rates must lie in [0, 1]");
        }
        if self.elitism > self.population_size {
            return fail("elitism exceeds population_size");
        }
        if self.init_min_depth > self.init_max_depth || self.init_max_depth > self.max_depth {
            return fail("init depth range must be ordered and within max_depth");
        }
        if self.regime.segments == 0 {
            return fail("regime needs at least one segment");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub rows: Range<usize>,
    pub is_super: bool,
    pub best: Fitness,
    pub median: Fitness,
    pub mean_size: f64,
    pub mean_depth: f64,
}

/// Metrics of one backtest, without the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    #[serde(with = "fitness_text")]
    pub fitness: Fitness,
    pub roi: f64,
    pub win_rate: f64,
    pub n_trades: usize,
}

impl From<&BacktestResult> for Performance {
    fn from(r: &BacktestResult) -> Self {
        Performance {
            fitness: r.fitness,
            roi: r.roi,
            win_rate: r.win_rate,
            n_trades: r.n_trades,
        }
    }
}

pub(crate) mod fitness_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::backtest::Fitness;

    pub fn serialize<S: Serializer>(f: &Fitness, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&f.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Fitness, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub variant: Variant,
    pub generations: Vec<GenerationStats>,
    pub champion: ExprTree,
    /// Champion measured on every evaluable training row.
    pub train: Performance,
    /// Champion measured once on the test rows.
    pub test: Performance,
}

impl RunResult {
    /// `generation,best,median,mean_size,mean_depth` per generation.
    pub fn write_log<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["generation", "best", "median", "mean_size", "mean_depth"])?;
        for g in &self.generations {
            w.write_record([
                g.generation.to_string(),
                g.best.to_string(),
                g.median.to_string(),
                g.mean_size.to_string(),
                g.mean_depth.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Rows of `table` on which every terminal is defined.
pub fn evaluable_rows(table: &FeatureTable, variant: Variant) -> Range<usize> {
    let start = match variant {
        Variant::Gp => 0,
        _ => table.first_window_row(),
    };
    start.min(table.len())..table.len()
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy)]
enum Stream {
    Init = 1,
    Generation = 2,
    Breed = 3,
}

fn stream_rng(seed: u64, stream: Stream, generation: usize, slot: usize) -> ChaCha8Rng {
    let key = splitmix(splitmix(splitmix(seed ^ stream as u64) ^ generation as u64) ^ slot as u64);
    ChaCha8Rng::seed_from_u64(key)
}

/// `population_size` ramped half-and-half trees; alternate individuals use
/// the full and grow methods.
pub fn init_population(
    config: &EvolutionConfig,
    set: &PrimitiveSet,
) -> Result<Vec<ExprTree>, EngineError> {
    config.validate()?;
    let generator = TreeGenerator::new(set);
    let depths = (config.init_min_depth, config.init_max_depth);
    (0..config.population_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, Stream::Init, 0, i);
            generator.ramped(depths, i % 2 == 0, config.limits(), &mut rng)
        })
        .collect()
}

fn check_population(
    population: &[ExprTree],
    set: &PrimitiveSet,
    limits: Limits,
    generation: usize,
) -> Result<(), EngineError> {
    for (i, tree) in population.iter().enumerate() {
        let broken = if !limits.admits(tree) {
            Some(format!(
                "individual {i} has depth {} and size {}",
                tree.depth(),
                tree.size()
            ))
        } else {
            tree.typecheck(set)
                .err()
                .map(|v| format!("individual {i}: {v}"))
        };
        if let Some(message) = broken {
            return Err(EngineError::Invariant {
                generation,
                message,
            });
        }
    }
    Ok(())
}

fn evaluate_all(
    population: &[ExprTree],
    variant: Variant,
    table: &FeatureTable,
    rows: Range<usize>,
    backtester: &Backtester,
) -> Result<Vec<Fitness>, EngineError> {
    population
        .par_iter()
        .map(|t| {
            backtester
                .fitness(t, variant, table, rows.clone())
                .map_err(EngineError::from)
        })
        .collect()
}

fn generation_stats(
    generation: usize,
    window: &TrainingWindow,
    population: &[ExprTree],
    fitness: &[Fitness],
) -> GenerationStats {
    let mut sorted = fitness.to_vec();
    sorted.sort();
    let n = population.len() as f64;
    GenerationStats {
        generation,
        rows: window.rows.clone(),
        is_super: window.is_super,
        best: *sorted.last().expect("non-empty"),
        median: sorted[(sorted.len() - 1) / 2],
        mean_size: population.iter().map(|t| t.size() as f64).sum::<f64>() / n,
        mean_depth: population.iter().map(|t| t.depth() as f64).sum::<f64>() / n,
    }
}

fn breed(
    config: &EvolutionConfig,
    set: &PrimitiveSet,
    population: &[ExprTree],
    fitness: &[Fitness],
    generation: usize,
) -> Vec<ExprTree> {
    let sizes: Vec<usize> = population.iter().map(ExprTree::size).collect();
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| rank_order(fitness, &sizes, a, b));
    let mut next: Vec<ExprTree> = order[..config.elitism]
        .iter()
        .map(|&i| population[i].clone())
        .collect();
    let remaining = config.population_size - config.elitism;
    let limits = config.limits();
    let offspring: Vec<ExprTree> = (0..remaining.div_ceil(2))
        .into_par_iter()
        .flat_map_iter(|pair| {
            let mut rng = stream_rng(config.seed, Stream::Breed, generation, pair);
            let a = &population[tournament_select(fitness, &sizes, config.tournament_size, &mut rng)];
            let b = &population[tournament_select(fitness, &sizes, config.tournament_size, &mut rng)];
            let (x, y) = if rng.random::<f64>() < config.crossover_rate {
                subtree_crossover(a, b, set, limits, &mut rng)
            } else {
                (a.clone(), b.clone())
            };
            let x = point_mutation(&x, set, config.mutation_rate, &mut rng);
            let y = point_mutation(&y, set, config.mutation_rate, &mut rng);
            [x, y]
        })
        .collect();
    next.extend(offspring.into_iter().take(remaining));
    next
}

/// Runs one evolutionary search. `observe` sees every evaluated
/// population before it is replaced.
pub fn evolve_observed<F>(
    config: &EvolutionConfig,
    train: &FeatureTable,
    test: &FeatureTable,
    backtester: &Backtester,
    mut observe: F,
) -> Result<RunResult, EngineError>
where
    F: FnMut(&GenerationStats, &[ExprTree], &[Fitness]),
{
    config.validate()?;
    let variant = config.variant;
    let set = PrimitiveSet::new(variant);
    let available = evaluable_rows(train, variant);
    let mut population = init_population(config, &set)?;
    let mut last_fitness = Vec::new();
    let mut traces = Vec::with_capacity(config.generations);
    for generation in 1..=config.generations {
        check_population(&population, &set, config.limits(), generation)?;
        let mut rng = stream_rng(config.seed, Stream::Generation, generation, 0);
        let window =
            sample_training_window(available.clone(), generation, &config.regime, &mut rng)?;
        let fitness = evaluate_all(&population, variant, train, window.rows.clone(), backtester)?;
        let stats = generation_stats(generation, &window, &population, &fitness);
        observe(&stats, &population, &fitness);
        traces.push(stats);
        if generation < config.generations {
            population = breed(config, &set, &population, &fitness, generation);
        } else {
            last_fitness = fitness;
        }
    }
    debug_assert_eq!(last_fitness.len(), population.len());

    // champion: best of the final population over all training rows
    let full_fitness = evaluate_all(&population, variant, train, available.clone(), backtester)?;
    let sizes: Vec<usize> = population.iter().map(ExprTree::size).collect();
    let champion = population.swap_remove(best_index(&full_fitness, &sizes));
    let train_result = backtester.run(&champion, variant, train, available, false)?;
    let test_result =
        backtester.run(&champion, variant, test, evaluable_rows(test, variant), false)?;
    Ok(RunResult {
        seed: config.seed,
        variant,
        generations: traces,
        champion,
        train: Performance::from(&train_result),
        test: Performance::from(&test_result),
    })
}

pub fn evolve(
    config: &EvolutionConfig,
    train: &FeatureTable,
    test: &FeatureTable,
    backtester: &Backtester,
) -> Result<RunResult, EngineError> {
    evolve_observed(config, train, test, backtester, |_, _, _| {})
}
