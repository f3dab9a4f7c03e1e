mod data;
mod experiments;

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fcodt::datasets::{gen_sim, write_csv, SimFunction};
use fcodt::evaluation::{grid_search_lambda, mse, ExperimentKind, Method, DEFAULT_LAMBDA_GRID};
use fcodt::tree::{compute_stumps, verify_orthogonal_expansion};
use fcodt::{DenseMatrix, Node, ObliqueTree, SplitCriteria, SplitDirection, VariantFlags};

use data::{ensure_nonempty, write_atomic, DataOptions};
use experiments::{RunOverrides, MANIFEST_ENV};

#[derive(Parser)]
#[command(name = "fcodt", version, about = "Oblique regression trees with ridge splits and feature concatenation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a tree and write the model file.
    Train(TrainArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Write a simulated dataset as CSV (with a noise-free `f` column).
    Simulate(SimulateArgs),
    /// Run the depth or sample-size sweep on the simulated functions.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        #[command(flatten)]
        run: RunOverrides,
    },
    /// Run the repeated train/test benchmark and aggregate the results.
    Bench {
        #[command(flatten)]
        run: RunOverrides,
        /// Dataset manifest (TOML). Falls back to $FCODT_MANIFEST, the
        /// config file, then data/manifest.toml.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Significance level of the rank-sum markers.
        #[arg(long)]
        alpha: Option<f64>,
        /// Reference score CSV (dataset,method,mean,std) replacing the
        /// built-in table.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Print a saved model.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Depth,
    Samples,
}

#[derive(Clone, Copy)]
enum LambdaChoice {
    Fixed(f64),
    Cv,
}

impl FromStr for LambdaChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "cv" {
            return Ok(LambdaChoice::Cv);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(LambdaChoice::Fixed(v)),
            _ => Err(format!("expected a non-negative number or \"cv\", got {s:?}")),
        }
    }
}

#[derive(clap::Args)]
struct CriteriaArgs {
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
    #[arg(long, default_value_t = 20)]
    min_split: usize,
    #[arg(long, default_value_t = 8)]
    min_leaf: usize,
    #[arg(long, default_value_t = 0.0)]
    min_gain: f64,
}

impl CriteriaArgs {
    fn criteria(&self) -> Result<SplitCriteria> {
        let c = SplitCriteria {
            max_depth: self.max_depth,
            min_samples_split: self.min_split,
            min_samples_leaf: self.min_leaf,
            min_gain: self.min_gain,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Training data file.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    source: DataOptions,
    #[arg(long, default_value = "fc_odt")]
    method: Method,
    /// Ridge penalty, or `cv` for a cross-validated grid search.
    #[arg(long, default_value = "cv")]
    lambda: LambdaChoice,
    /// Candidate λ values for `--lambda cv`.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDA_GRID.to_vec())]
    lambda_grid: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Seed of the cross-validation folds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    criteria: CriteriaArgs,
    /// Model file to write (JSON).
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(clap::Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Without `--target`, every CSV column except `--drop` is a feature.
    #[command(flatten)]
    source: DataOptions,
    /// Predictions CSV; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Add the leaf index and the decision path (node indices and scores).
    #[arg(long)]
    explain: bool,
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    function: SimName,
    #[arg(long, short)]
    n: usize,
    /// Standard deviation of the Gaussian target noise.
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimName {
    Sim1,
    Sim2,
}

#[derive(clap::Args)]
struct InspectArgs {
    model: PathBuf,
    /// Print the orthonormal stump decomposition on the training data.
    #[arg(long, requires = "data")]
    stumps: bool,
    /// Training data for `--stumps`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    source: DataOptions,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep { kind, run } => experiments::sweep(
            match kind {
                SweepKind::Depth => ExperimentKind::Depth,
                SweepKind::Samples => ExperimentKind::Samples,
            },
            &run,
        ),
        Command::Bench {
            run,
            manifest,
            alpha,
            reference,
        } => experiments::bench(&run, manifest.as_deref(), alpha, reference.as_deref()),
        Command::Inspect(a) => inspect(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if format!("{e:#}").contains("manifest") {
                eprintln!("hint: the manifest path can also be set with {MANIFEST_ENV}");
            }
            ExitCode::FAILURE
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "failed".to_string(), |v| format!("{v:.6}"))
}

fn train(a: TrainArgs) -> Result<()> {
    let criteria = a.criteria.criteria()?;
    let data = a.source.load(&a.data)?;
    ensure_nonempty(&data, &a.data)?;
    let lambda = match (a.method.uses_lambda(), a.lambda) {
        (false, _) => 0.0,
        (true, LambdaChoice::Fixed(l)) => l,
        (true, LambdaChoice::Cv) => {
            let g = grid_search_lambda(&data, a.method, &criteria, &a.lambda_grid, a.folds, a.seed)?;
            println!("lambda cross-validation ({} folds, seed {})", a.folds, a.seed);
            println!("{:>12}  {:>12}  folds", "lambda", "mean_mse");
            for row in &g.table {
                let folds: Vec<String> = row.fold_mse.iter().map(|m| fmt_opt(*m)).collect();
                println!("{:>12e}  {:>12}  {}", row.lambda, fmt_opt(row.mean_mse), folds.join(" "));
            }
            println!("chosen lambda: {:e}", g.best_lambda);
            g.best_lambda
        }
    };
    let model = a.method.fit(&data, lambda, &criteria)?;
    let pred = model.predict_batch(&data.features)?;
    let training_mse = mse(&pred, &data.targets)?;
    write_atomic(&a.output, |w| Ok(model.write_json(w)?))?;
    println!("training MSE: {training_mse:.6}");
    println!(
        "depth: {} ({} internal nodes, {} leaves)",
        model.realized_depth(),
        model.n_internal(),
        model.n_leaves()
    );
    eprintln!("model written to {}", a.output.display());
    Ok(())
}

fn load_model(path: &Path) -> Result<ObliqueTree> {
    let f = File::open(path).with_context(|| format!("cannot open model {}", path.display()))?;
    ObliqueTree::read_json(BufReader::new(f)).with_context(|| format!("cannot read model {}", path.display()))
}

fn write_predictions(model: &ObliqueTree, x: &DenseMatrix, explain: bool, w: &mut dyn Write) -> Result<()> {
    if x.rows() == 0 {
        return Ok(());
    }
    if explain {
        writeln!(w, "prediction,leaf,path_nodes,path_scores")?;
    } else {
        writeln!(w, "prediction")?;
    }
    for row in x.iter_rows() {
        let p = model.predict(row)?;
        if explain {
            let path = model.decision_path(row)?;
            let nodes: Vec<String> = path.iter().map(|s| s.node.to_string()).collect();
            let scores: Vec<String> = path.iter().map(|s| s.score.to_string()).collect();
            writeln!(w, "{p},{},{},{}", model.leaf_index(row)?, nodes.join(";"), scores.join(";"))?;
        } else {
            writeln!(w, "{p}")?;
        }
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (x, targets) = a.source.load_features(&a.data, model.input_dim)?;
    if x.rows() > 0 && x.cols() != model.input_dim {
        bail!(
            "dimension mismatch: the model expects {} features, {} has {}",
            model.input_dim,
            a.data.display(),
            x.cols()
        );
    }
    match &a.output {
        Some(path) => write_atomic(path, |w| write_predictions(&model, &x, a.explain, w))?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_predictions(&model, &x, a.explain, &mut lock)?;
            lock.flush()?;
        }
    }
    if let Some(y) = targets.filter(|y| !y.is_empty()) {
        let pred = model.predict_batch(&x)?;
        eprintln!("MSE against targets: {:.6}", mse(&pred, &y)?);
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    if a.sigma.is_nan() || a.sigma < 0.0 || a.sigma.is_infinite() {
        bail!("sigma must be finite and non-negative");
    }
    let func = match a.function {
        SimName::Sim1 => SimFunction::Sim1,
        SimName::Sim2 => SimFunction::Sim2,
    };
    let data = gen_sim(func, a.n, a.sigma, a.seed);
    write_atomic(&a.output, |w| Ok(write_csv(&data, w)?))?;
    eprintln!("{} rows written to {}", a.n, a.output.display());
    Ok(())
}

fn variant_name(m: &ObliqueTree) -> &'static str {
    match (m.direction, m.flags) {
        (SplitDirection::AxisParallel, _) => "cart",
        (SplitDirection::Ridge, VariantFlags::FC_ODT) => "fc_odt",
        (SplitDirection::Ridge, VariantFlags::PLAIN) => "ridge_odt",
        (SplitDirection::Ridge, _) => "ridge tree (ablation)",
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn inspect(a: InspectArgs) -> Result<()> {
    let m = load_model(&a.model)?;
    let on_off = |b: bool| if b { "on" } else { "off" };
    println!(
        "{}: concatenation {}, residual path {}",
        variant_name(&m),
        on_off(m.flags.concatenate),
        on_off(m.flags.residual_path)
    );
    println!(
        "input dim {}, lambda {:e}, max depth {}, min split {}, min leaf {}, min gain {}",
        m.input_dim, m.lambda, m.criteria.max_depth, m.criteria.min_samples_split, m.criteria.min_samples_leaf, m.criteria.min_gain
    );
    println!(
        "{} nodes ({} internal, {} leaves), realized depth {}",
        m.nodes.len(),
        m.n_internal(),
        m.n_leaves(),
        m.realized_depth()
    );
    println!();
    println!("{:>5} {:>5} {:>6} {:>8} {:>14} {:>14} {:>9}", "node", "depth", "kind", "samples", "gain", "threshold", "children");
    for (i, node) in m.nodes.iter().enumerate() {
        match node {
            Node::Split(s) => {
                println!(
                    "{i:>5} {:>5} {:>6} {:>8} {:>14.6e} {:>14.6} {:>9}",
                    s.depth,
                    "split",
                    s.sample_count,
                    s.gain,
                    s.threshold,
                    format!("{},{}", s.left, s.right)
                );
                println!("      projection (bias last): {}", fmt_vec(&s.projection));
            }
            Node::Leaf(l) => println!(
                "{i:>5} {:>5} {:>6} {:>8} {:>14} {:>14} {:>9}   value {:.6}",
                l.depth, "leaf", l.sample_count, "", "", "", l.value
            ),
        }
    }

    if a.stumps {
        let path = a.data.as_deref().expect("clap enforces --data");
        let data = a.source.load(path)?;
        ensure_nonempty(&data, path)?;
        let basis = compute_stumps(&m, &data)?;
        let report = verify_orthogonal_expansion(&m, &data)?;
        println!();
        println!("stump decomposition on {} ({} rows)", path.display(), data.len());
        println!("{:>6} {:>14} {:>18} {:>14}", "node", "coefficient", "impurity_decrease", "recorded_gain");
        for s in &basis.info {
            let node = s.node.map_or_else(|| "root".to_string(), |n| n.to_string());
            println!(
                "{node:>6} {:>14.6e} {:>18.6e} {:>14.6e}",
                s.coefficient, s.linear_impurity_decrease, s.recorded_gain
            );
        }
        if !basis.dropped.is_empty() {
            println!("dropped (zero norm): {:?}", basis.dropped);
        }
        println!("max |prediction - expansion|: {:.3e} (relative {:.3e})", report.max_abs_deviation, report.relative_deviation());
        println!("max |leaf linear fit - expansion|: {:.3e}", report.linear_output_deviation);
        println!("Gram matrix deviation from identity: {:.3e}", report.orthonormality_error);
        println!("max relative impurity identity gap: {:.3e}", report.impurity_identity_error);
    }
    Ok(())
}
