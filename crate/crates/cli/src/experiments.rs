//! `sweep` and `bench`: run configuration, resumable partial results and
//! output files.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use fcodt::datasets::Manifest;
use fcodt::evaluation::{
    aggregate_benchmark, read_reference_csv, run_benchmark, run_depth_sweep, run_sample_sweep, write_aggregate_csv,
    write_records_csv, write_timings_csv, CellOutput, ExperimentConfig, ExperimentKind, ExperimentResult,
    ResultRecord, RunControl, PUBLISHED_REFERENCE_CSV,
};
use serde::{Deserialize, Serialize};

use crate::data::write_atomic;

pub const MANIFEST_ENV: &str = "FCODT_MANIFEST";
const DEFAULT_MANIFEST: &str = "data/manifest.toml";
const PARTIAL: &str = "partial.jsonl";
const PARTIAL_STAMP: &str = "partial.stamp";

/// Run configuration file. Relative paths resolve against the file's
/// directory. Every key is optional; unknown keys are rejected.
///
/// ```toml
/// manifest = "../data/manifest.toml"
/// output_dir = "runs/depth"
/// alpha = 0.1
///
/// [experiment]
/// repeats = 10
/// workers = 0
/// [experiment.criteria]
/// max_depth = 4
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub manifest: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Significance level of the benchmark markers (default 0.1).
    pub alpha: Option<f64>,
    pub experiment: ExperimentConfig,
}

impl RunConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfigFile::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut cfg: RunConfigFile =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.manifest = cfg.manifest.map(|p| base.join(p));
        cfg.output_dir = cfg.output_dir.map(|p| base.join(p));
        Ok(cfg)
    }
}

/// Command-line overrides shared by `sweep` and `bench`.
#[derive(Debug, Clone, clap::Args)]
pub struct RunOverrides {
    /// Run configuration file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config file.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed_base: Option<u64>,
    /// Use this λ instead of the cross-validated grid search.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Discard partial results left in the output directory.
    #[arg(long)]
    pub fresh: bool,
}

impl RunOverrides {
    fn resolve(&self) -> Result<(RunConfigFile, PathBuf)> {
        let mut file = RunConfigFile::load(self.config.as_deref())?;
        let c = &mut file.experiment;
        if let Some(w) = self.workers {
            c.workers = w;
        }
        if let Some(r) = self.repeats {
            c.repeats = r;
        }
        if let Some(s) = self.seed_base {
            c.seed_base = s;
        }
        if self.lambda.is_some() {
            c.fixed_lambda = self.lambda;
        }
        c.validate()?;
        let out = self
            .output_dir
            .clone()
            .or_else(|| file.output_dir.clone())
            .ok_or_else(|| anyhow!("no output directory: pass --output-dir or set output_dir in the config"))?;
        Ok((file, out))
    }
}

/// Hash of the configuration with the worker count removed, since results
/// do not depend on it.
fn config_hash(config: &ExperimentConfig) -> String {
    ExperimentConfig {
        workers: 0,
        ..config.clone()
    }
    .fingerprint()
}

#[derive(Serialize)]
struct CellSeed<'a> {
    dataset: &'a str,
    method: &'a str,
    param_name: &'a str,
    param_value: u64,
    repeat: usize,
    seed: u64,
}

#[derive(Serialize)]
struct Stamp<'a> {
    tool_version: &'a str,
    experiment: &'a str,
    config_sha256: String,
    config: &'a ExperimentConfig,
    manifest: Option<String>,
    reused_cells: usize,
    cells: Vec<CellSeed<'a>>,
}

/// Partial records from an earlier run of the same configuration.
fn load_partial(dir: &Path, stamp: &str, fresh: bool) -> Result<Vec<ResultRecord>> {
    let (partial, stamp_path) = (dir.join(PARTIAL), dir.join(PARTIAL_STAMP));
    if fresh || !partial.exists() {
        let _ = fs::remove_file(&partial);
        fs::write(&stamp_path, stamp)?;
        return Ok(Vec::new());
    }
    let found = fs::read_to_string(&stamp_path).unwrap_or_default();
    if found.trim() != stamp {
        bail!(
            "{} holds partial results of a different configuration; rerun with --fresh to discard them",
            dir.display()
        );
    }
    let mut records = Vec::new();
    let mut intact = String::new();
    for line in BufReader::new(File::open(&partial)?).lines() {
        let line = line?;
        // One line per cell; a run killed mid-write can leave a truncated
        // last line, whose cell is simply recomputed.
        match serde_json::from_str::<Vec<ResultRecord>>(&line) {
            Ok(cell) => records.extend(cell),
            Err(_) => break,
        }
        intact.push_str(&line);
        intact.push('\n');
    }
    // Drop the damaged tail so new cells append after a clean line.
    fs::write(&partial, intact)?;
    Ok(records)
}

fn run_resumable(
    kind: ExperimentKind,
    config: &ExperimentConfig,
    dir: &Path,
    fresh: bool,
    run: impl FnOnce(RunControl<'_>) -> fcodt::Result<ExperimentResult>,
) -> Result<ExperimentResult> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let stamp = format!("{} {}", kind.name(), config_hash(config));
    let completed = load_partial(dir, &stamp, fresh)?;
    if !completed.is_empty() {
        eprintln!("resuming: {} records from {}", completed.len(), dir.join(PARTIAL).display());
    }
    let sink = Mutex::new(OpenOptions::new().create(true).append(true).open(dir.join(PARTIAL))?);
    let sink_error: Mutex<Option<String>> = Mutex::new(None);
    let hook = |cell: &CellOutput| {
        let mut buf = serde_json::to_string(&cell.records).expect("records serialize");
        buf.push('\n');
        let mut f = sink.lock().unwrap();
        if let Err(e) = f.write_all(buf.as_bytes()).and_then(|_| f.flush()) {
            sink_error.lock().unwrap().get_or_insert(e.to_string());
        }
    };
    let result = run(RunControl {
        completed,
        on_cell: Some(&hook),
    })?;
    if let Some(e) = sink_error.into_inner().unwrap() {
        bail!("cannot record partial results: {e}");
    }
    Ok(result)
}

fn write_outputs(
    kind: ExperimentKind,
    config: &ExperimentConfig,
    dir: &Path,
    manifest: Option<&Path>,
    result: &ExperimentResult,
) -> Result<()> {
    write_atomic(&dir.join("results.csv"), |w| Ok(write_records_csv(&result.records, w)?))?;
    write_atomic(&dir.join("timings.csv"), |w| Ok(write_timings_csv(&result.timings, w)?))?;
    let mut seen = BTreeSet::new();
    let cells = result
        .records
        .iter()
        .filter(|r| seen.insert((&r.dataset, &r.method, r.param_value, r.repeat)))
        .map(|r| CellSeed {
            dataset: &r.dataset,
            method: &r.method,
            param_name: &r.param_name,
            param_value: r.param_value,
            repeat: r.repeat,
            seed: r.seed,
        })
        .collect();
    let stamp = Stamp {
        tool_version: env!("CARGO_PKG_VERSION"),
        experiment: kind.name(),
        config_sha256: config_hash(config),
        config,
        manifest: manifest.map(|p| p.display().to_string()),
        reused_cells: result.reused_cells,
        cells,
    };
    write_atomic(&dir.join("stamp.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &stamp)?;
        writeln!(w)?;
        Ok(())
    })?;
    Ok(())
}

fn finish(dir: &Path) {
    let _ = fs::remove_file(dir.join(PARTIAL));
    let _ = fs::remove_file(dir.join(PARTIAL_STAMP));
}

pub fn sweep(kind: ExperimentKind, overrides: &RunOverrides) -> Result<()> {
    let (file, dir) = overrides.resolve()?;
    let config = &file.experiment;
    let result = run_resumable(kind, config, &dir, overrides.fresh, |control| match kind {
        ExperimentKind::Depth => run_depth_sweep(config, control),
        ExperimentKind::Samples => run_sample_sweep(config, control),
        ExperimentKind::Benchmark => unreachable!("sweeps are depth or samples"),
    })?;
    write_outputs(kind, config, &dir, None, &result)?;
    finish(&dir);
    print_means(&result.records, "mse");
    eprintln!(
        "{} records ({} cells reused) written to {}",
        result.records.len(),
        result.reused_cells,
        dir.display()
    );
    Ok(())
}

/// Manifest path by precedence: flag, environment, config file, default.
fn manifest_path(flag: Option<&Path>, file: &RunConfigFile) -> (Option<PathBuf>, bool) {
    if let Some(p) = flag {
        return (Some(p.to_path_buf()), true);
    }
    if let Some(p) = std::env::var_os(MANIFEST_ENV).filter(|v| !v.is_empty()) {
        return (Some(PathBuf::from(p)), true);
    }
    if let Some(p) = &file.manifest {
        return (Some(p.clone()), true);
    }
    let default = PathBuf::from(DEFAULT_MANIFEST);
    (default.exists().then_some(default), false)
}

pub fn bench(overrides: &RunOverrides, manifest_flag: Option<&Path>, alpha: Option<f64>, reference: Option<&Path>) -> Result<()> {
    let (file, dir) = overrides.resolve()?;
    let alpha = alpha.or(file.alpha).unwrap_or(0.1);
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!("alpha must lie in (0, 1)");
    }
    let (manifest_path, explicit) = manifest_path(manifest_flag, &file);
    let manifest = match &manifest_path {
        Some(p) => Some(Manifest::load(p).with_context(|| format!("cannot load manifest {}", p.display()))?),
        None => None,
    };
    if manifest.is_none() && !explicit {
        eprintln!("no manifest found; only simulated datasets will run (set --manifest or {MANIFEST_ENV})");
    }
    let references = match reference {
        Some(p) => read_reference_csv(File::open(p).with_context(|| format!("cannot open {}", p.display()))?)?,
        None => read_reference_csv(PUBLISHED_REFERENCE_CSV.as_bytes())?,
    };

    let config = &file.experiment;
    let result = run_resumable(ExperimentKind::Benchmark, config, &dir, overrides.fresh, |control| {
        run_benchmark(config, manifest.as_ref(), control)
    })?;
    write_outputs(ExperimentKind::Benchmark, config, &dir, manifest_path.as_deref(), &result)?;
    let summary = aggregate_benchmark(&result.records, &references, alpha);
    write_atomic(&dir.join("aggregate.csv"), |w| Ok(write_aggregate_csv(&summary, w)?))?;
    write_atomic(&dir.join("skipped.csv"), |w| {
        writeln!(w, "dataset,reason")?;
        for s in &result.skipped {
            writeln!(w, "{},\"{}\"", s.dataset, s.reason.replace('"', "\"\""))?;
        }
        Ok(())
    })?;
    finish(&dir);

    let mut table = Vec::new();
    write_aggregate_csv(&summary, &mut table)?;
    print!("{}", String::from_utf8_lossy(&table));
    for s in &result.skipped {
        eprintln!("skipped {}: {}", s.dataset, s.reason);
    }
    eprintln!("{} records written to {}", result.records.len(), dir.display());
    Ok(())
}

/// Prints the mean of `metric` per dataset, method and parameter.
fn print_means(records: &[ResultRecord], metric: &str) {
    let mut groups: std::collections::BTreeMap<(&str, &str, u64), (f64, usize)> = Default::default();
    let mut param = "";
    for r in records.iter().filter(|r| r.metric == metric) {
        let e = groups.entry((&r.dataset, &r.method, r.param_value)).or_default();
        e.0 += r.value;
        e.1 += 1;
        param = &r.param_name;
    }
    println!("dataset,method,{param},mean_{metric},repeats");
    for ((d, m, p), (sum, n)) in groups {
        println!("{d},{m},{p},{:.6},{n}", sum / n as f64);
    }
}
