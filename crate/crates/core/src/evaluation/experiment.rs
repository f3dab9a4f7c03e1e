//! Experiment protocols. Every unit of work is a cell keyed by
//! (experiment, dataset, parameter, method, repeat). Cells draw their
//! randomness from hashes of the key, run in parallel, and are merged in key
//! order, so results do not depend on scheduling.
//!
//! Data draws depend only on (dataset, repeat): all methods and all
//! parameter values of one repeat see the same data, which pairs the
//! comparisons.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{gen_sim, train_test_split, Dataset, Manifest, SimFunction};
use crate::error::{Error, Result};
use crate::tree::SplitCriteria;

use super::grid::{grid_search_lambda, GridSearch};
use super::metrics::{mse, r2};
use super::ranksum::rank_sum_test;
use super::records::{cell_seed, CellTiming, ReferenceScore, ResultRecord};
use super::Method;

pub const DEFAULT_LAMBDA_GRID: [f64; 8] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0];

/// Declarative description of an experiment run. Unset `methods` and
/// `datasets` fall back to the defaults of the protocol being run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub methods: Option<Vec<Method>>,
    pub datasets: Option<Vec<String>>,
    pub repeats: usize,
    pub seed_base: u64,
    pub lambda_grid: Vec<f64>,
    /// Skip the grid search and use this λ everywhere.
    pub fixed_lambda: Option<f64>,
    pub folds: usize,
    /// Split criteria; `max_depth` is overridden by the depth sweep.
    pub criteria: SplitCriteria,
    pub depths: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    /// Training size of the depth sweep.
    pub train_size: usize,
    /// Noise-free test size of both sweeps.
    pub test_size: usize,
    pub noise_sigma: f64,
    /// Size of each simulated dataset in the benchmark.
    pub sim_size: usize,
    pub train_fraction: f64,
    /// Min-max scale features using training-split bounds (benchmark only).
    pub min_max_scale: bool,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: None,
            datasets: None,
            repeats: 10,
            seed_base: 0,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            fixed_lambda: None,
            folds: 5,
            criteria: SplitCriteria::default(),
            depths: vec![2, 3, 4, 5, 6],
            sample_sizes: vec![50, 100, 200, 500, 1000, 2000],
            train_size: 2000,
            test_size: 500,
            noise_sigma: 0.01,
            sim_size: 2000,
            train_fraction: 0.6,
            min_max_scale: false,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.criteria.validate()?;
        let fail = |m: &str| Err(Error::invalid(m.to_string()));
        if self.repeats < 1 {
            return fail("repeats must be at least 1");
        }
        if self.lambda_grid.is_empty() || self.depths.is_empty() || self.sample_sizes.is_empty() {
            return fail("lambda_grid, depths and sample_sizes must be nonempty");
        }
        if self.lambda_grid.iter().chain(&self.fixed_lambda).any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return fail("lambda values must be finite and >= 0");
        }
        if self.folds < 2 {
            return fail("folds must be at least 2");
        }
        if self.depths.contains(&0) {
            return fail("depths must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail("train_fraction must lie in (0, 1)");
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return fail("noise_sigma must be finite and >= 0");
        }
        if self.train_size < 1 || self.test_size < 2 || self.sim_size < 2 || self.sample_sizes.contains(&0) {
            return fail("dataset sizes must be positive (test sets need 2 rows)");
        }
        if matches!(&self.methods, Some(m) if m.is_empty()) || matches!(&self.datasets, Some(d) if d.is_empty()) {
            return fail("methods and datasets, when given, must be nonempty");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, for provenance stamps.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        crate::datasets::sha256_hex(json.as_bytes())
    }

    fn methods_or(&self, default: &[Method]) -> Vec<Method> {
        self.methods.clone().unwrap_or_else(|| default.to_vec())
    }

    fn datasets_or(&self, default: &[&str]) -> Vec<String> {
        self.datasets
            .clone()
            .unwrap_or_else(|| default.iter().map(|s| s.to_string()).collect())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Depth,
    Samples,
    Benchmark,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Depth => "depth",
            ExperimentKind::Samples => "samples",
            ExperimentKind::Benchmark => "benchmark",
        }
    }

    pub fn param_name(self) -> &'static str {
        match self {
            ExperimentKind::Samples => "n",
            _ => "depth",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depth" => Ok(ExperimentKind::Depth),
            "samples" => Ok(ExperimentKind::Samples),
            "benchmark" => Ok(ExperimentKind::Benchmark),
            other => Err(Error::invalid(format!("unknown experiment {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub experiment: ExperimentKind,
    pub dataset: String,
    pub param: u64,
    pub method: Method,
    pub repeat: usize,
}

impl CellKey {
    fn from_record(r: &ResultRecord) -> Result<Self> {
        Ok(CellKey {
            experiment: r.experiment.parse()?,
            dataset: r.dataset.clone(),
            param: r.param_value,
            method: r.method.parse()?,
            repeat: r.repeat,
        })
    }

    /// Seed for the cell's cross-validation folds.
    pub fn seed(&self, base: u64) -> u64 {
        cell_seed(
            base,
            &[
                self.experiment.name(),
                &self.dataset,
                self.method.name(),
                &self.param.to_string(),
                &self.repeat.to_string(),
            ],
        )
    }
}

/// Everything one finished cell produced.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub key: CellKey,
    pub records: Vec<ResultRecord>,
    pub timing: CellTiming,
    pub search: Option<GridSearch>,
}

/// Resume state and progress hook for a run.
#[derive(Default)]
pub struct RunControl<'a> {
    /// Records from an interrupted run; their cells are not recomputed.
    pub completed: Vec<ResultRecord>,
    /// Called once per freshly computed cell, from worker threads.
    pub on_cell: Option<&'a (dyn Fn(&CellOutput) + Sync)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSkip {
    pub dataset: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentResult {
    /// Sorted by cell key, then metric.
    pub records: Vec<ResultRecord>,
    /// Timings of the cells computed in this run, sorted by cell key.
    pub timings: Vec<CellTiming>,
    pub skipped: Vec<DatasetSkip>,
    pub reused_cells: usize,
}

fn data_seed(base: u64, dataset: &str, role: &str, repeat: usize) -> u64 {
    cell_seed(base, &["data", dataset, role, &repeat.to_string()])
}

fn sim_function(name: &str) -> Result<SimFunction> {
    SimFunction::from_name(name).ok_or_else(|| Error::invalid(format!("{name:?} is not a simulated dataset")))
}

fn sweep_methods(config: &ExperimentConfig) -> Result<Vec<Method>> {
    let methods = config.methods_or(&[Method::FcOdt, Method::RidgeOdt]);
    if methods.contains(&Method::Cart) {
        return Err(Error::invalid("sweeps compare fc_odt and ridge_odt only"));
    }
    Ok(methods)
}

/// Picks λ (grid search unless fixed), fits, and scores on `test`.
fn fit_and_score(
    key: &CellKey,
    config: &ExperimentConfig,
    criteria: &SplitCriteria,
    train: &Dataset,
    test: &Dataset,
    test_targets: &[f64],
    metrics: &[&str],
) -> Result<CellOutput> {
    let seed = key.seed(config.seed_base);
    let start = Instant::now();
    let (lambda, search) = match (key.method.uses_lambda(), config.fixed_lambda) {
        (false, _) => (None, None),
        (true, Some(l)) => (Some(l), None),
        (true, None) => {
            let g = grid_search_lambda(train, key.method, criteria, &config.lambda_grid, config.folds, seed)?;
            (Some(g.best_lambda), Some(g))
        }
    };
    let searched = start.elapsed().as_secs_f64();
    let fit_start = Instant::now();
    let model = key.method.fit(train, lambda.unwrap_or(0.0), criteria)?;
    let fit_seconds = fit_start.elapsed().as_secs_f64();
    let pred = model.predict_batch(&test.features)?;
    let total = start.elapsed().as_secs_f64();

    let mut records = Vec::with_capacity(metrics.len());
    for &metric in metrics {
        let value = match metric {
            "mse" => mse(&pred, test_targets)?,
            "r2" => r2(&pred, test_targets)?,
            other => unreachable!("unknown metric {other}"),
        };
        records.push(ResultRecord {
            experiment: key.experiment.name().into(),
            dataset: key.dataset.clone(),
            method: key.method.name().into(),
            repeat: key.repeat,
            seed,
            param_name: key.experiment.param_name().into(),
            param_value: key.param,
            metric: metric.into(),
            value,
            lambda,
        });
    }
    Ok(CellOutput {
        timing: CellTiming {
            experiment: key.experiment.name().into(),
            dataset: key.dataset.clone(),
            method: key.method.name().into(),
            repeat: key.repeat,
            param_name: key.experiment.param_name().into(),
            param_value: key.param,
            search_seconds: searched,
            fit_seconds,
            total_seconds: total,
        },
        key: key.clone(),
        records,
        search,
    })
}

/// Runs `work` on every key not already present in `control.completed`,
/// then merges old and new records in key order.
fn execute(
    config: &ExperimentConfig,
    keys: Vec<CellKey>,
    control: RunControl<'_>,
    skipped: Vec<DatasetSkip>,
    work: impl Fn(&CellKey) -> Result<CellOutput> + Sync,
) -> Result<ExperimentResult> {
    let wanted: BTreeSet<CellKey> = keys.iter().cloned().collect();
    let mut done: BTreeMap<CellKey, Vec<ResultRecord>> = BTreeMap::new();
    for r in control.completed {
        let k = CellKey::from_record(&r)?;
        if wanted.contains(&k) {
            done.entry(k).or_default().push(r);
        }
    }
    let reused_cells = done.len();
    let todo: Vec<&CellKey> = keys.iter().filter(|k| !done.contains_key(*k)).collect();
    let hook = control.on_cell;
    let outputs: Vec<CellOutput> = config.pool()?.install(|| {
        todo.par_iter()
            .map(|k| {
                let out = work(k)?;
                if let Some(f) = hook {
                    f(&out);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut timings = Vec::with_capacity(outputs.len());
    for out in outputs {
        timings.push((out.key.clone(), out.timing));
        done.insert(out.key, out.records);
    }
    timings.sort_by(|a, b| a.0.cmp(&b.0));
    let records = done
        .into_values()
        .flat_map(|mut v| {
            v.sort_by(|a, b| a.metric.cmp(&b.metric));
            v
        })
        .collect();
    Ok(ExperimentResult {
        records,
        timings: timings.into_iter().map(|t| t.1).collect(),
        skipped,
        reused_cells,
    })
}

fn sweep_keys(kind: ExperimentKind, datasets: &[String], params: &[u64], methods: &[Method], repeats: usize) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for d in datasets {
        for &p in params {
            for &m in methods {
                for repeat in 0..repeats {
                    keys.push(CellKey {
                        experiment: kind,
                        dataset: d.clone(),
                        param: p,
                        method: m,
                        repeat,
                    });
                }
            }
        }
    }
    keys.sort();
    keys
}

/// Test MSE against noise-free targets for every depth in `config.depths`,
/// training on `train_size` fresh noisy draws per repeat.
pub fn run_depth_sweep(config: &ExperimentConfig, control: RunControl<'_>) -> Result<ExperimentResult> {
    config.validate()?;
    let methods = sweep_methods(config)?;
    let datasets = config.datasets_or(&["sim1", "sim2"]);
    for d in &datasets {
        sim_function(d)?;
    }
    let depths: Vec<u64> = config.depths.iter().map(|&k| k as u64).collect();
    let keys = sweep_keys(ExperimentKind::Depth, &datasets, &depths, &methods, config.repeats);
    execute(config, keys, control, Vec::new(), |key| {
        let f = sim_function(&key.dataset)?;
        let train = gen_sim(f, config.train_size, config.noise_sigma, data_seed(config.seed_base, &key.dataset, "train", key.repeat));
        let test = gen_sim(f, config.test_size, config.noise_sigma, data_seed(config.seed_base, &key.dataset, "test", key.repeat));
        let criteria = SplitCriteria {
            max_depth: key.param as usize,
            ..config.criteria
        };
        fit_and_score(key, config, &criteria, &train, &test, test.evaluation_targets(), &["mse"])
    })
}

/// Test MSE against noise-free targets for every size in
/// `config.sample_sizes`. Training sets of one repeat are nested prefixes
/// of a single draw and share one test set.
pub fn run_sample_sweep(config: &ExperimentConfig, control: RunControl<'_>) -> Result<ExperimentResult> {
    config.validate()?;
    let methods = sweep_methods(config)?;
    let datasets = config.datasets_or(&["sim1", "sim2"]);
    for d in &datasets {
        sim_function(d)?;
    }
    let sizes: Vec<u64> = config.sample_sizes.iter().map(|&n| n as u64).collect();
    let keys = sweep_keys(ExperimentKind::Samples, &datasets, &sizes, &methods, config.repeats);
    execute(config, keys, control, Vec::new(), |key| {
        let f = sim_function(&key.dataset)?;
        // Rows are drawn sequentially, so a smaller draw is a prefix of a
        // larger one with the same seed.
        let train = gen_sim(f, key.param as usize, config.noise_sigma, data_seed(config.seed_base, &key.dataset, "pool", key.repeat));
        let test = gen_sim(f, config.test_size, config.noise_sigma, data_seed(config.seed_base, &key.dataset, "test", key.repeat));
        fit_and_score(key, config, &config.criteria, &train, &test, test.evaluation_targets(), &["mse"])
    })
}

/// Test R² (and MSE) on repeated train/test splits at the configured depth.
/// Simulated datasets are drawn once per repeat; others are read through
/// the manifest and skipped with a report entry when unavailable.
pub fn run_benchmark(
    config: &ExperimentConfig,
    manifest: Option<&Manifest>,
    control: RunControl<'_>,
) -> Result<ExperimentResult> {
    config.validate()?;
    let methods = config.methods_or(&Method::ALL);
    let datasets = config.datasets_or(&[
        "sim1", "sim2", "abalone", "bodyfat", "cadata", "cpusmall", "housing", "space_ga", "mg", "mpg",
    ]);
    let mut loaded: BTreeMap<String, Dataset> = BTreeMap::new();
    let mut skipped = Vec::new();
    for name in &datasets {
        if SimFunction::from_name(name).is_some() {
            continue;
        }
        let result = match manifest {
            None => Err(Error::invalid("no dataset manifest given")),
            Some(m) => m.load_dataset(name),
        };
        match result {
            Ok(d) if d.len() >= 5 => {
                loaded.insert(name.clone(), d);
            }
            Ok(d) => skipped.push(DatasetSkip {
                dataset: name.clone(),
                reason: format!("only {} rows", d.len()),
            }),
            Err(e) => skipped.push(DatasetSkip {
                dataset: name.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let usable: Vec<String> = datasets
        .iter()
        .filter(|d| SimFunction::from_name(d).is_some() || loaded.contains_key(*d))
        .cloned()
        .collect();
    let depth = [config.criteria.max_depth as u64];
    let keys = sweep_keys(ExperimentKind::Benchmark, &usable, &depth, &methods, config.repeats);
    execute(config, keys, control, skipped, |key| {
        let base = config.seed_base;
        let owned;
        let data = match SimFunction::from_name(&key.dataset) {
            Some(f) => {
                owned = gen_sim(f, config.sim_size, config.noise_sigma, data_seed(base, &key.dataset, "bench", key.repeat));
                &owned
            }
            None => &loaded[&key.dataset],
        };
        let split = train_test_split(data.len(), config.train_fraction, data_seed(base, &key.dataset, "split", key.repeat))?;
        if !split.is_partition_of(data.len()) {
            return Err(Error::invalid("train and test rows overlap"));
        }
        let mut train = data.subset(&split.train_indices);
        let mut test = data.subset(&split.test_indices);
        if config.min_max_scale {
            let bounds = train.min_max_bounds();
            train = train.scaled(&bounds)?;
            test = test.scaled(&bounds)?;
        }
        fit_and_score(key, config, &config.criteria, &train, &test, &test.targets, &["mse", "r2"])
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCell {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; 0 for one repeat).
    pub std: f64,
    pub count: usize,
    /// `•` when FC-ODT is significantly better, `◦` when significantly
    /// worse, at the configured level of the two-sided rank-sum test.
    pub marker: Option<char>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub dataset: String,
    /// Aligned with [`BenchmarkSummary::methods`].
    pub cells: Vec<Option<AggregateCell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSummary {
    pub methods: Vec<String>,
    pub rows: Vec<AggregateRow>,
    /// Mean rank by mean R² (1 = best, ties averaged) over the datasets
    /// where the method has a score.
    pub average_ranks: Vec<Option<f64>>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Table of mean±std test R² per dataset and method, significance markers
/// against `fc_odt`, and average ranks. Reference scores join as extra
/// method columns for datasets that were run.
pub fn aggregate_benchmark(records: &[ResultRecord], reference: &[ReferenceScore], alpha: f64) -> BenchmarkSummary {
    let mut scores: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    let mut datasets: Vec<String> = Vec::new();
    let mut implemented: Vec<String> = Vec::new();
    for r in records.iter().filter(|r| r.metric == "r2") {
        scores.entry((r.dataset.clone(), r.method.clone())).or_default().push(r.value);
        if !datasets.contains(&r.dataset) {
            datasets.push(r.dataset.clone());
        }
        if !implemented.contains(&r.method) {
            implemented.push(r.method.clone());
        }
    }
    implemented.sort_by_key(|m| m.parse::<Method>().map(|x| x as usize).unwrap_or(usize::MAX));
    let mut methods = implemented.clone();
    for s in reference {
        if datasets.contains(&s.dataset) && !methods.contains(&s.method) {
            methods.push(s.method.clone());
        }
    }

    let fc = Method::FcOdt.name().to_string();
    let mut rank_sums = vec![(0.0, 0usize); methods.len()];
    let mut rows = Vec::with_capacity(datasets.len());
    for d in &datasets {
        let reference_fc = scores.get(&(d.clone(), fc.clone()));
        let cells: Vec<Option<AggregateCell>> = methods
            .iter()
            .map(|m| {
                if let Some(v) = scores.get(&(d.clone(), m.clone())) {
                    let (mean, std) = mean_std(v);
                    let (marker, p_value) = match reference_fc {
                        Some(fc_scores) if *m != fc => {
                            let p = rank_sum_test(fc_scores, v).map(|r| r.p_value).ok();
                            let fc_mean = mean_std(fc_scores).0;
                            let marker = match p {
                                Some(p) if p < alpha && fc_mean > mean => Some('•'),
                                Some(p) if p < alpha && fc_mean < mean => Some('◦'),
                                _ => None,
                            };
                            (marker, p)
                        }
                        _ => (None, None),
                    };
                    Some(AggregateCell {
                        mean,
                        std,
                        count: v.len(),
                        marker,
                        p_value,
                    })
                } else {
                    reference
                        .iter()
                        .find(|s| &s.dataset == d && &s.method == m)
                        .map(|s| AggregateCell {
                            mean: s.mean,
                            std: s.std,
                            count: 0,
                            marker: None,
                            p_value: None,
                        })
                }
            })
            .collect();
        // Average ranks with ties sharing the mean of their positions.
        for (i, c) in cells.iter().enumerate() {
            let Some(c) = c else { continue };
            let better = cells.iter().flatten().filter(|o| o.mean > c.mean).count() as f64;
            let equal = cells.iter().flatten().filter(|o| o.mean == c.mean).count() as f64;
            rank_sums[i].0 += better + (equal + 1.0) / 2.0;
            rank_sums[i].1 += 1;
        }
        rows.push(AggregateRow {
            dataset: d.clone(),
            cells,
        });
    }
    BenchmarkSummary {
        methods,
        rows,
        average_ranks: rank_sums
            .into_iter()
            .map(|(s, n)| (n > 0).then(|| s / n as f64))
            .collect(),
    }
}
