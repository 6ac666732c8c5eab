use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use grafted_forest::data::io::{load_csv, load_features};
use grafted_forest::eval::experiment::{preset, run_experiment, ExperimentSpec};
use grafted_forest::eval::Learner;
use grafted_forest::{
    classify_value, Algorithm, BandwidthRule, Error, ForestModel, GrowthConfig, LeafRegressorSpec, ResampleMode,
    SampleSize,
};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "grafted-forest", version, about = "Train, apply, and evaluate grafted regression forests")]
#[command(args_override_self = true)]
struct Cli {
    /// Worker threads for tree growing [default: available parallelism]
    #[arg(long, global = true, env = "GRAFTED_FOREST_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a forest on a CSV file and write the model as JSON
    Train(TrainArgs),
    /// Predict every row of a CSV file with a saved model
    Predict(PredictArgs),
    /// Run an experiment preset or spec file
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Resample {
    With,
    Without,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Key-value file (`key = value` per line) supplying defaults for the flags below
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training CSV with a header row
    #[arg(long)]
    data: PathBuf,
    /// Target column name
    #[arg(long, default_value = "y")]
    target: String,
    /// Where to write the model
    #[arg(long, short = 'o', default_value = "model.json")]
    model_out: PathBuf,
    /// cart, centered, grafted, or grafted_general
    #[arg(long, default_value = "grafted")]
    algorithm: String,
    /// Number of trees M
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Fixed resample size a_n
    #[arg(long, conflicts_with = "an_divisor")]
    an: Option<usize>,
    /// Resample size ceil(n / divisor)
    #[arg(long)]
    an_divisor: Option<f64>,
    /// Resampling scheme [default: with for cart, without otherwise]
    #[arg(long, value_enum)]
    resample: Option<Resample>,
    /// Minimum resampled points per child
    #[arg(long, default_value_t = 1)]
    qn: u64,
    /// CART-phase leaf-size inflation for grafted trees
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Candidate features per CART split [default: all]
    #[arg(long)]
    mtry: Option<usize>,
    /// Depth cap for centered trees
    #[arg(long)]
    max_depth: Option<u32>,
    /// Leaf estimator for grafted_general: constant, nadaraya_watson, kernel_ridge
    #[arg(long, default_value = "constant")]
    leaf_regressor: String,
    /// Fixed kernel bandwidth [default: rate rule]
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Ridge penalty for kernel_ridge leaves
    #[arg(long)]
    lambda: Option<f64>,
    /// Restrict scions to the features split on by the CART phase
    #[arg(long)]
    restrict_features: bool,
    /// Master seed [default: generated and printed]
    #[arg(long)]
    seed: Option<u64>,
    /// Min-max rescale features onto the unit cube before fitting
    #[arg(long)]
    normalize: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model JSON written by `train`
    #[arg(long)]
    model: PathBuf,
    /// CSV with a header row; columns are matched by name when the model knows them
    #[arg(long)]
    data: PathBuf,
    /// Output CSV [default: stdout]
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    /// Emit 0/1 labels, thresholding predictions at one half
    #[arg(long)]
    classify: bool,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Built-in preset: fig2..fig10, sparsity, kernel_sparsity, boston, biau
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    preset: Option<String>,
    /// JSON experiment spec
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory
    #[arg(long, short = 'o', default_value = "experiment-out")]
    out_dir: PathBuf,
    /// Replicate seed [default: generated and printed]
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated replicate seeds
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated dimensions for sparsity sweeps
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<usize>>,
    /// Comma-separated training sizes
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Trees per forest
    #[arg(long)]
    trees: Option<usize>,
    /// Data file for the boston preset
    #[arg(long, env = "BOSTON_CSV")]
    data: Option<PathBuf>,
}

fn generated_seed() -> u64 {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
    nanos ^ (u64::from(std::process::id()) << 32)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Lookup { .. } | Error::Unsupported(_) | Error::InvalidSplit(_) => EXIT_USAGE,
        Error::Input(_) | Error::Ingest { .. } | Error::Io(_) | Error::Json(_) | Error::Csv(_) => EXIT_DATA,
        Error::Invariant(_) => EXIT_INTERNAL,
    }
}

/// Turn `key = value` lines into `--key value` arguments. `true` becomes a
/// bare flag and `false` drops it.
fn config_args(path: &Path) -> Result<Vec<String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut args = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected `key = value`", path.display(), k + 1))?;
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(format!("{}:{}: nested config files are not supported", path.display(), k + 1));
        }
        match value.trim() {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            v => {
                args.push(format!("--{key}"));
                args.push(v.to_string());
            }
        }
    }
    Ok(args)
}

/// Splice config-file arguments in front of the command line's own, so that
/// explicit flags win.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(sub) = argv.iter().position(|a| a == "train") else {
        return Ok(argv);
    };
    let mut path = None;
    for (i, a) in argv.iter().enumerate().skip(sub + 1) {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let mut out = argv[..=sub].to_vec();
    out.extend(config_args(Path::new(&path))?);
    out.extend(argv[sub + 1..].iter().cloned());
    Ok(out)
}

fn growth_config(args: &TrainArgs, seed: u64) -> Result<GrowthConfig, Error> {
    let algorithm = Algorithm::from_name(&args.algorithm)?;
    let mut config = GrowthConfig::new(algorithm)
        .trees(args.trees)
        .q_n(args.qn)
        .alpha(args.alpha)
        .seed(seed)
        .restrict_features(args.restrict_features);
    if let Some(size) = args.an {
        config = config.sample_size(SampleSize::Fixed { size });
    }
    if let Some(divisor) = args.an_divisor {
        config = config.sample_size(SampleSize::Divided { divisor });
    }
    if let Some(mode) = args.resample {
        config = config.resample(match mode {
            Resample::With => ResampleMode::WithReplacement,
            Resample::Without => ResampleMode::WithoutReplacement,
        });
    }
    if let Some(m) = args.mtry {
        config = config.mtry(m);
    }
    if let Some(d) = args.max_depth {
        config = config.max_depth(d);
    }
    let bandwidth = args.bandwidth.map(|h| BandwidthRule::Fixed { h });
    let leaf = LeafRegressorSpec::from_name(&args.leaf_regressor, bandwidth, args.lambda)?;
    if leaf != LeafRegressorSpec::Constant && algorithm != Algorithm::GraftedGeneral {
        return Err(Error::Config(format!(
            "--leaf-regressor {} needs --algorithm grafted_general",
            args.leaf_regressor
        )));
    }
    Ok(config.leaf_regressor(leaf))
}

fn train(args: TrainArgs) -> Result<(), Error> {
    let seed = args.seed.unwrap_or_else(|| {
        let s = generated_seed();
        eprintln!("seed: {s}");
        s
    });
    let config = growth_config(&args, seed)?;
    let loaded = load_csv(&args.data, &args.target, false)?;
    let start = Instant::now();
    let forest = if args.normalize {
        ForestModel::fit_normalized(&loaded.dataset, &config)?
    } else {
        ForestModel::fit(&loaded.dataset, &config)?
    };
    let elapsed = start.elapsed().as_secs_f64();
    forest.save(&args.model_out)?;
    println!("algorithm: {}", config.algorithm);
    println!("trees: {}", forest.trees().len());
    println!("training rows: {}", forest.n_train());
    println!("mean leaf size: {:.3}", forest.mean_leaf_size());
    let fallbacks = forest.fallback_leaves();
    if fallbacks > 0 {
        println!("leaf regressors that fell back to the mean: {fallbacks}");
    }
    println!("elapsed: {elapsed:.3}s");
    println!("seed: {seed}");
    println!("model: {}", args.model_out.display());
    Ok(())
}

fn predict(args: PredictArgs) -> Result<(), Error> {
    let forest = ForestModel::load(&args.model)?;
    let rows = load_features(&args.data, forest.feature_names())?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    };
    writeln!(out, "{}", if args.classify { "class" } else { "prediction" })?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != forest.dim() {
            return Err(Error::Input(format!(
                "row {} has {} features, model expects {}",
                i + 1,
                row.len(),
                forest.dim()
            )));
        }
        let value = forest.predict(row)?;
        if args.classify {
            writeln!(out, "{}", classify_value(value))?;
        } else {
            writeln!(out, "{value}")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<(), Error> {
    let seeds = match (&args.seeds, args.seed) {
        (Some(s), _) => s.clone(),
        (None, Some(s)) => vec![s],
        (None, None) if args.spec.is_some() => vec![],
        (None, None) => {
            let s = generated_seed();
            eprintln!("seed: {s}");
            vec![s]
        }
    };
    let mut spec: ExperimentSpec = match (&args.preset, &args.spec) {
        (Some(name), _) => preset(name, seeds.first().copied().unwrap_or(0))?,
        (None, Some(path)) => serde_json::from_str(&fs::read_to_string(path)?)?,
        (None, None) => return Err(Error::Config("need --preset or --spec".into())),
    };
    if !seeds.is_empty() {
        spec.seeds = seeds;
    }
    if let Some(p) = args.p_grid {
        spec.p_grid = p;
    }
    if let Some(n) = args.n_grid {
        spec.n_grid = n;
    }
    if let Some(t) = args.trees {
        for run in &mut spec.runs {
            if let Learner::Forest { config } = &mut run.learner {
                config.trees = t;
            }
        }
    }
    if args.data.is_some() {
        spec.data_path = args.data;
    }
    let output = run_experiment(&spec, &args.out_dir)?;
    let mut by_config: BTreeMap<(String, usize, usize, String), Vec<f64>> = BTreeMap::new();
    for r in &output.rows {
        by_config
            .entry((r.run.clone(), r.n, r.p, r.region.clone()))
            .or_default()
            .push(r.error);
    }
    println!("experiment: {} ({} rows)", spec.name, output.rows.len());
    for ((run, n, p, region), errs) in by_config {
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        println!("  {run:<22} n={n:<6} p={p:<4} {region:<14} mean error {mean:.6}");
    }
    println!("results: {}", output.results_csv.display());
    println!("manifest: {}", output.manifest.display());
    println!("chart: {}", output.chart.display());
    if let Some(g) = output.grid_csv {
        println!("grid: {}", g.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
