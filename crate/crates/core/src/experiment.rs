//! Multi-seed experiments: enrich data, evolve champions, backtest them and
//! compare methods.
//!
//! Artifacts live under `<out>/<dataset>/<variant>/seed_<n>/`:
//! `log.csv` (per-generation trace), `champion.txt` (tree, seed and the
//! configuration that produced it) and `summary.json` (train/test metrics).
//! `<out>/index.json` lists every completed run and `<out>/failures.json`
//! lists runs that did not complete.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{BacktestResult, Backtester};
use crate::engine::{evaluable_rows, evolve, EvolutionConfig, Performance, RunResult};
use crate::market_data::{enrich, load_ohlcv, FeatureTable, OHLCV_HEADER};
use crate::stats::{kruskal_wallis_p, mean_ranks, quartiles};
use crate::variants::{ExprTree, PrimitiveSet, Variant};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "GPTRADE_OUT";
pub const DEFAULT_OUT: &str = "runs";
pub const DEFAULT_RUNS: usize = 10;

const LOG_FILE: &str = "log.csv";
const CHAMPION_FILE: &str = "champion.txt";
const SUMMARY_FILE: &str = "summary.json";
const INDEX_FILE: &str = "index.json";
const FAILURES_FILE: &str = "failures.json";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, configuration or input files.
    #[error("{0:#}")]
    Input(anyhow::Error),
    /// Failures while running an otherwise valid request.
    #[error("{0:#}")]
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn input<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Input(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> anyhow::Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> anyhow::Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

/// Applies one configuration key to an evolution config. Returns false for
/// keys that are not evolution parameters.
fn apply_config_key(config: &mut EvolutionConfig, key: &str, value: &str) -> anyhow::Result<bool> {
    match key {
        "variant" => config.variant = parse_value(key, value)?,
        "seed" => config.seed = parse_value(key, value)?,
        "population" | "population_size" => config.population_size = parse_value(key, value)?,
        "generations" => config.generations = parse_value(key, value)?,
        "tournament_size" => config.tournament_size = parse_value(key, value)?,
        "mutation_rate" => config.mutation_rate = parse_value(key, value)?,
        "crossover_rate" => config.crossover_rate = parse_value(key, value)?,
        "elitism" => config.elitism = parse_value(key, value)?,
        "max_depth" => config.max_depth = parse_value(key, value)?,
        "max_size" => config.max_size = parse_value(key, value)?,
        "init_min_depth" => config.init_min_depth = parse_value(key, value)?,
        "init_max_depth" => config.init_max_depth = parse_value(key, value)?,
        "buffer_days" => config.regime.buffer_days = parse_value(key, value)?,
        "segments" => config.regime.segments = parse_value(key, value)?,
        "super_every" => config.regime.super_every = parse_value(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn config_lines(config: &EvolutionConfig) -> String {
    let c = config;
    let mut s = String::new();
    let pairs: [(&str, String); 15] = [
        ("variant", c.variant.to_string()),
        ("seed", c.seed.to_string()),
        ("population_size", c.population_size.to_string()),
        ("generations", c.generations.to_string()),
        ("tournament_size", c.tournament_size.to_string()),
        ("mutation_rate", c.mutation_rate.to_string()),
        ("crossover_rate", c.crossover_rate.to_string()),
        ("elitism", c.elitism.to_string()),
        ("max_depth", c.max_depth.to_string()),
        ("max_size", c.max_size.to_string()),
        ("init_min_depth", c.init_min_depth.to_string()),
        ("init_max_depth", c.init_max_depth.to_string()),
        ("buffer_days", c.regime.buffer_days.to_string()),
        ("segments", c.regime.segments.to_string()),
        ("super_every", c.regime.super_every.to_string()),
    ];
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

/// Everything needed to run a batch of evolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub datasets: Vec<PathBuf>,
    pub variants: Vec<Variant>,
    pub runs: usize,
    pub base_seed: u64,
    /// Template for every run; `variant` and `seed` are overwritten.
    pub config: EvolutionConfig,
    pub out: PathBuf,
    pub jobs: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            datasets: Vec::new(),
            variants: Variant::ALL.to_vec(),
            runs: DEFAULT_RUNS,
            base_seed: 0,
            config: EvolutionConfig::default(),
            out: PathBuf::from(DEFAULT_OUT),
            jobs: 1,
        }
    }
}

impl ExperimentSpec {
    /// Reads a key-value experiment file. Relative data paths resolve
    /// against the file's directory.
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut spec = ExperimentSpec::default();
        for (key, value) in parse_key_values(&text)? {
            spec.set(&key, &value, base)
                .with_context(|| format!("in {}", path.display()))?;
        }
        Ok(spec)
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> anyhow::Result<()> {
        match key {
            "data" | "datasets" => {
                self.datasets = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| base.join(s))
                    .collect()
            }
            "variants" | "variant" => {
                self.variants = value
                    .split(',')
                    .map(|s| parse_value(key, s.trim()))
                    .collect::<anyhow::Result<_>>()?
            }
            "runs" => self.runs = parse_value(key, value)?,
            "seed" | "base_seed" => self.base_seed = parse_value(key, value)?,
            "out" => self.out = base.join(value),
            "jobs" => self.jobs = parse_value(key, value)?,
            _ => {
                if !apply_config_key(&mut self.config, key, value)? {
                    bail!("unknown configuration key {key:?}");
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.runs == 0 {
            bail!("runs must be at least 1");
        }
        if self.variants.is_empty() {
            bail!("at least one variant is required");
        }
        if self.datasets.is_empty() {
            bail!("at least one dataset is required");
        }
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        for d in &self.datasets {
            if !d.is_file() {
                bail!("dataset {} does not exist", d.display());
            }
        }
        let names: BTreeSet<String> = self.datasets.iter().map(|d| dataset_name(d)).collect();
        if names.len() != self.datasets.len() {
            bail!("dataset file names must be distinct");
        }
        self.config.validate()?;
        Ok(())
    }

    pub fn run_config(&self, variant: Variant, run: usize) -> EvolutionConfig {
        EvolutionConfig {
            variant,
            seed: self.base_seed + run as u64,
            ..self.config.clone()
        }
    }
}

pub fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_string())
}

/// Loads a feature table from either a raw OHLCV file (enriched on the fly)
/// or an already enriched file.
pub fn load_table(path: &Path) -> anyhow::Result<FeatureTable> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = reader
        .headers()
        .with_context(|| format!("reading header of {}", path.display()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let table = if header == OHLCV_HEADER {
        enrich(&load_ohlcv(path)?)?
    } else {
        FeatureTable::read_csv(path)?
    };
    Ok(table)
}

/// Enriches a raw OHLCV file into a feature file.
pub fn cmd_enrich(input_path: &Path, output: &Path) -> Result<usize, CliError> {
    let candles = load_ohlcv(input_path).map_err(input)?;
    let table = enrich(&candles).map_err(input)?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(runtime)?;
    }
    table.write_csv(output).map_err(runtime)?;
    Ok(table.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dataset: String,
    pub variant: Variant,
    pub seed: u64,
    pub champion: String,
    pub champion_size: usize,
    pub champion_depth: usize,
    pub train: Performance,
    pub test: Performance,
    pub config: EvolutionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub dataset: String,
    pub variant: Variant,
    pub seed: u64,
    /// Run directory relative to the output root.
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub dataset: String,
    pub variant: Variant,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOutcome {
    pub completed: Vec<IndexEntry>,
    pub reused: usize,
    pub failures: Vec<FailureEntry>,
}

pub fn run_dir(dataset: &str, variant: Variant, seed: u64) -> PathBuf {
    PathBuf::from(dataset)
        .join(variant.name())
        .join(format!("seed_{seed}"))
}

/// Text of a champion file.
pub fn champion_text(tree: &ExprTree, dataset: &str, config: &EvolutionConfig) -> String {
    format!("tree = {tree}\ndataset = {dataset}\n{}", config_lines(config))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Champion {
    pub tree: ExprTree,
    pub variant: Variant,
    pub seed: Option<u64>,
    pub dataset: Option<String>,
}

/// Parses a champion file and typechecks the tree against its variant.
pub fn read_champion(path: &Path) -> anyhow::Result<Champion> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let map = parse_key_values(&text)?;
    let tree_text = map.get("tree").ok_or_else(|| anyhow!("champion file has no tree"))?;
    let variant: Variant = parse_value(
        "variant",
        map.get("variant")
            .ok_or_else(|| anyhow!("champion file has no variant"))?,
    )?;
    let tree = ExprTree::parse(tree_text).context("parsing champion tree")?;
    tree.typecheck(&PrimitiveSet::new(variant))
        .map_err(|v| anyhow!("champion is not a valid {variant} tree: {v}"))?;
    let seed = map.get("seed").map(|s| parse_value("seed", s)).transpose()?;
    Ok(Champion {
        tree,
        variant,
        seed,
        dataset: map.get("dataset").cloned(),
    })
}

fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_run(dir: &Path, dataset: &str, config: &EvolutionConfig, result: &RunResult) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut log = Vec::new();
    result.write_log(&mut log)?;
    write_atomic(&dir.join(LOG_FILE), &log)?;
    write_atomic(
        &dir.join(CHAMPION_FILE),
        champion_text(&result.champion, dataset, config).as_bytes(),
    )?;
    let summary = RunSummary {
        dataset: dataset.to_string(),
        variant: result.variant,
        seed: result.seed,
        champion: result.champion.to_string(),
        champion_size: result.champion.size(),
        champion_depth: result.champion.depth(),
        train: result.train,
        test: result.test,
        config: config.clone(),
    };
    let json = serde_json::to_string_pretty(&summary)?;
    write_atomic(&dir.join(SUMMARY_FILE), json.as_bytes())
}

pub fn read_summary(dir: &Path) -> anyhow::Result<RunSummary> {
    let path = dir.join(SUMMARY_FILE);
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn is_complete(dir: &Path, config: &EvolutionConfig) -> bool {
    dir.join(LOG_FILE).is_file()
        && dir.join(CHAMPION_FILE).is_file()
        && read_summary(dir).is_ok_and(|s| &s.config == config)
}

struct Job {
    dataset: usize,
    entry: IndexEntry,
    config: EvolutionConfig,
}

/// Runs every (dataset, variant, seed) combination of `spec`, skipping runs
/// whose artifacts already exist for the same configuration.
pub fn cmd_evolve(spec: &ExperimentSpec) -> Result<EvolveOutcome, CliError> {
    spec.validate().map_err(input)?;
    let mut splits = Vec::new();
    for path in &spec.datasets {
        let table = load_table(path).map_err(input)?;
        let (train, test) = table
            .split_train_test()
            .with_context(|| format!("splitting {}", path.display()))
            .map_err(input)?;
        splits.push((dataset_name(path), train, test));
    }
    fs::create_dir_all(&spec.out).map_err(runtime)?;

    let mut jobs = Vec::new();
    for (d, (name, _, _)) in splits.iter().enumerate() {
        for &variant in &spec.variants {
            for run in 0..spec.runs {
                let config = spec.run_config(variant, run);
                let dir = run_dir(name, variant, config.seed);
                jobs.push(Job {
                    dataset: d,
                    entry: IndexEntry {
                        dataset: name.clone(),
                        variant,
                        seed: config.seed,
                        dir: dir.to_string_lossy().into_owned(),
                    },
                    config,
                });
            }
        }
    }
    let (done, todo): (Vec<Job>, Vec<Job>) = jobs
        .into_iter()
        .partition(|j| is_complete(&spec.out.join(&j.entry.dir), &j.config));

    // outstanding runs are listed as missing until the batch finishes
    let pending: Vec<FailureEntry> = todo
        .iter()
        .map(|j| FailureEntry {
            dataset: j.entry.dataset.clone(),
            variant: j.entry.variant,
            seed: j.entry.seed,
            error: "not completed".to_string(),
        })
        .collect();
    write_json(&spec.out.join(FAILURES_FILE), &pending).map_err(runtime)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(runtime)?;
    let backtester = Backtester::default();
    let results: Vec<(IndexEntry, Result<(), String>)> = pool.install(|| {
        todo.par_iter()
            .map(|job| {
                let (name, train, test) = &splits[job.dataset];
                let outcome = evolve(&job.config, train, test, &backtester)
                    .map_err(anyhow::Error::from)
                    .and_then(|result| {
                        write_run(&spec.out.join(&job.entry.dir), name, &job.config, &result)
                    })
                    .map_err(|e| format!("{e:#}"));
                (job.entry.clone(), outcome)
            })
            .collect()
    });

    let mut completed: Vec<IndexEntry> = done.iter().map(|j| j.entry.clone()).collect();
    let mut failures = Vec::new();
    for (entry, outcome) in results {
        match outcome {
            Ok(()) => completed.push(entry),
            Err(error) => failures.push(FailureEntry {
                dataset: entry.dataset,
                variant: entry.variant,
                seed: entry.seed,
                error,
            }),
        }
    }
    completed.sort_by(|a, b| (&a.dataset, a.variant, a.seed).cmp(&(&b.dataset, b.variant, b.seed)));
    write_json(&spec.out.join(INDEX_FILE), &completed).map_err(runtime)?;
    write_json(&spec.out.join(FAILURES_FILE), &failures).map_err(runtime)?;
    let outcome = EvolveOutcome {
        completed,
        reused: done.len(),
        failures,
    };
    if !outcome.failures.is_empty() {
        let first = &outcome.failures[0];
        return Err(runtime(anyhow!(
            "{} of {} runs failed; first: {} {} seed {}: {}",
            outcome.failures.len(),
            outcome.failures.len() + outcome.completed.len(),
            first.dataset,
            first.variant,
            first.seed,
            first.error
        )));
    }
    Ok(outcome)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    write_atomic(path, json.as_bytes())
}

pub fn read_index(path: &Path) -> anyhow::Result<Vec<IndexEntry>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Which rows of a data file to backtest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowSelection {
    Train,
    Test,
    All,
    Rows(Range<usize>),
}

impl std::str::FromStr for RowSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(RowSelection::Train),
            "test" => Ok(RowSelection::Test),
            "all" => Ok(RowSelection::All),
            _ => {
                let (a, b) = s
                    .split_once("..")
                    .ok_or_else(|| format!("expected train, test, all or START..END, got {s:?}"))?;
                let a = a.parse().map_err(|_| format!("bad range start {a:?}"))?;
                let b = b.parse().map_err(|_| format!("bad range end {b:?}"))?;
                Ok(RowSelection::Rows(a..b))
            }
        }
    }
}

/// Backtests a saved champion. With a ledger path the per-row ledger is
/// written as CSV.
pub fn cmd_backtest(
    champion_path: &Path,
    data: &Path,
    selection: &RowSelection,
    ledger: Option<&Path>,
) -> Result<BacktestResult, CliError> {
    let champion = read_champion(champion_path).map_err(input)?;
    let full = load_table(data).map_err(input)?;
    let variant = champion.variant;
    let (table, rows) = match selection {
        RowSelection::All => {
            let rows = evaluable_rows(&full, variant);
            (full, rows)
        }
        RowSelection::Rows(r) => {
            if r.end > full.len() || r.start >= r.end {
                return Err(input(anyhow!(
                    "row range {}..{} outside 0..{}",
                    r.start,
                    r.end,
                    full.len()
                )));
            }
            (full, r.clone())
        }
        RowSelection::Train | RowSelection::Test => {
            let (train, test) = full.split_train_test().map_err(input)?;
            let table = if *selection == RowSelection::Train { train } else { test };
            let rows = evaluable_rows(&table, variant);
            (table, rows)
        }
    };
    let result = Backtester::default()
        .run(&champion.tree, variant, &table, rows, ledger.is_some())
        .map_err(runtime)?;
    if let Some(path) = ledger {
        let file = fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))
            .map_err(runtime)?;
        result.write_ledger(file).map_err(runtime)?;
    }
    Ok(result)
}

/// Files written by [`cmd_report`] for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetReport {
    pub dataset: String,
    pub methods: Vec<Variant>,
    pub quartiles: PathBuf,
    pub pvalues: Option<PathBuf>,
    pub ranks: Option<PathBuf>,
}

fn fmt_f64(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "inactive".to_string()
    } else {
        v.to_string()
    }
}

/// Writes per-dataset comparison tables next to the index: test-fitness
/// quartiles, the pairwise Kruskal-Wallis p-value matrix and mean ranks
/// with the critical difference.
pub fn cmd_report(index_path: &Path, out_dir: Option<&Path>) -> Result<Vec<DatasetReport>, CliError> {
    let index = read_index(index_path).map_err(input)?;
    let root = index_path.parent().unwrap_or(Path::new("."));
    let out_dir = out_dir.map_or_else(|| root.join("report"), Path::to_path_buf);
    fs::create_dir_all(&out_dir).map_err(runtime)?;

    // dataset -> variant -> seed -> test fitness
    let mut data: BTreeMap<String, BTreeMap<Variant, BTreeMap<u64, f64>>> = BTreeMap::new();
    for entry in &index {
        let summary = read_summary(&root.join(&entry.dir)).map_err(input)?;
        data.entry(summary.dataset)
            .or_default()
            .entry(summary.variant)
            .or_default()
            .insert(summary.seed, summary.test.fitness.as_f64());
    }
    if data.is_empty() {
        return Err(input(anyhow!("index {} lists no runs", index_path.display())));
    }

    let mut reports = Vec::new();
    for (dataset, by_method) in &data {
        let methods: Vec<Variant> = by_method.keys().copied().collect();
        for (m, seeds) in by_method {
            if seeds.len() < 2 {
                return Err(input(anyhow!(
                    "{dataset}: {m} has {} seed(s); at least 2 are needed",
                    seeds.len()
                )));
            }
        }
        let samples: Vec<Vec<f64>> = by_method.values().map(|s| s.values().copied().collect()).collect();

        let quartile_path = out_dir.join(format!("{dataset}_quartiles.csv"));
        let mut w = csv::Writer::from_path(&quartile_path).map_err(runtime)?;
        w.write_record(["method", "n", "min", "q1", "median", "q3", "max"])
            .map_err(runtime)?;
        for (m, s) in methods.iter().zip(&samples) {
            let q = quartiles(s).expect("at least two values");
            w.write_record([
                m.to_string(),
                s.len().to_string(),
                fmt_f64(q.min),
                fmt_f64(q.q1),
                fmt_f64(q.median),
                fmt_f64(q.q3),
                fmt_f64(q.max),
            ])
            .map_err(runtime)?;
        }
        w.flush().map_err(runtime)?;

        let mut report = DatasetReport {
            dataset: dataset.clone(),
            methods: methods.clone(),
            quartiles: quartile_path,
            pvalues: None,
            ranks: None,
        };
        if methods.len() >= 2 {
            let path = out_dir.join(format!("{dataset}_pvalues.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(runtime)?;
            let mut header = vec![String::new()];
            header.extend(methods.iter().map(Variant::to_string));
            w.write_record(&header).map_err(runtime)?;
            for (i, a) in samples.iter().enumerate() {
                let mut row = vec![methods[i].to_string()];
                for (j, b) in samples.iter().enumerate() {
                    row.push(if i == j {
                        String::new()
                    } else {
                        kruskal_wallis_p(a, b).map_err(runtime)?.to_string()
                    });
                }
                w.write_record(&row).map_err(runtime)?;
            }
            w.flush().map_err(runtime)?;
            report.pvalues = Some(path);

            // ranks use the seeds every method completed
            let common: Vec<u64> = by_method
                .values()
                .map(|s| s.keys().copied().collect::<BTreeSet<u64>>())
                .reduce(|a, b| a.intersection(&b).copied().collect())
                .unwrap_or_default()
                .into_iter()
                .collect();
            let matrix: Vec<Vec<f64>> = by_method
                .values()
                .map(|s| common.iter().map(|seed| s[seed]).collect())
                .collect();
            if methods.len() <= 10 && common.len() >= 2 {
                let summary = mean_ranks(&matrix).map_err(runtime)?;
                let path = out_dir.join(format!("{dataset}_ranks.csv"));
                let mut w = csv::Writer::from_path(&path).map_err(runtime)?;
                w.write_record(["method", "mean_rank", "position", "critical_difference", "seeds", "groups"])
                    .map_err(runtime)?;
                for (position, &m) in summary.order.iter().enumerate() {
                    let groups: Vec<String> = summary
                        .groups
                        .iter()
                        .enumerate()
                        .filter(|(_, g)| g.contains(&m))
                        .map(|(g, _)| g.to_string())
                        .collect();
                    w.write_record([
                        methods[m].to_string(),
                        summary.mean_ranks[m].to_string(),
                        (position + 1).to_string(),
                        summary.critical_difference.to_string(),
                        common.len().to_string(),
                        groups.join(" "),
                    ])
                    .map_err(runtime)?;
                }
                w.flush().map_err(runtime)?;
                report.ranks = Some(path);
            }
        }
        reports.push(report);
    }
    Ok(reports)
}
