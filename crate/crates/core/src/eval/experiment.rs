//! Declarative experiment specifications and the runner that executes them.
//!
//! A run writes into its output directory:
//!
//! | file            | contents                                                      |
//! |-----------------|---------------------------------------------------------------|
//! | `results.csv`   | one row per (configuration, replicate); see [`ResultRow`]     |
//! | `timings.csv`   | wall-clock seconds per row; not reproducible                  |
//! | `manifest.json` | the spec, derived seeds, crate version, and output file names |
//! | `chart.svg`     | medians over replicates                                       |
//! | `grid.csv`      | contour experiments only: truth and estimates on a grid       |
//!
//! The first line of `results.csv` is a `#` comment carrying the generation
//! time; everything after it is a deterministic function of the spec.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, GrowthConfig, SampleSize};
use crate::data::biau::center_cell;
use crate::data::io::{load_csv, validate_boston_profile};
use crate::data::synthetic::{cef_catalog, sample_model, SyntheticModel, ALPHA_STUDY};
use crate::data::{build_mesh, train_test_split, Mesh, MeshSpec};
use crate::dataset::{Dataset, MinMaxScaler};
use crate::error::{Error, Result};
use crate::eval::chart::{bar_chart, heatmaps, line_chart, Panel, Series};
use crate::eval::cv::{random_search_cv, CvPlan, CvResult, Learner, SearchSpace};
use crate::eval::metrics::{mesh_l2_error, test_error};
use crate::eval::Predictor;
use crate::leaf::{BandwidthRule, LeafRegressorSpec};
use crate::resample::ResampleMode;
use crate::rng::child_seed;

/// Default cap on the number of trees an experiment may grow, CV included.
pub const DEFAULT_MAX_TOTAL_TREES: u64 = 5_000_000;

/// Named presets accepted by [`preset`].
pub const PRESETS: [&str; 13] = [
    "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "sparsity", "kernel_sparsity", "boston",
    "biau",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Mesh error as the training size grows.
    ErrorVsN,
    /// Mesh error across the grafting inflation `alpha`.
    AlphaSweep,
    /// Mesh error as irrelevant features are added.
    SparsitySweep,
    /// As `SparsitySweep`, with kernel leaf regressors and a plain kernel
    /// ridge baseline.
    KernelSparsitySweep,
    /// Held-out error on a real dataset with CV-tuned parameters.
    Boston,
    /// Estimates of the striped/checkerboard function on a grid.
    BiauContours,
}

/// Where errors are measured. The dimension comes from the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshPlan {
    Grid { resolution: usize },
    LowDiscrepancy { count: usize },
    /// Grid over `active` coordinates, the rest held at `fill`.
    Slice {
        active: Vec<usize>,
        resolution: usize,
        fill: f64,
    },
    /// Grid over the center cell of the two-dimensional striped function.
    CenterCell { resolution: usize },
    /// Grid for `p <= 3`, low-discrepancy points otherwise.
    Auto { budget: usize },
}

impl MeshPlan {
    pub fn build(&self, p: usize) -> Result<Mesh> {
        let spec = match self {
            MeshPlan::Grid { resolution } => MeshSpec::Grid {
                dim: p,
                resolution: *resolution,
            },
            MeshPlan::LowDiscrepancy { count } => MeshSpec::LowDiscrepancy { dim: p, count: *count },
            MeshPlan::Slice {
                active,
                resolution,
                fill,
            } => MeshSpec::Slice {
                dim: p,
                active: active.clone(),
                resolution: *resolution,
                fill: *fill,
            },
            MeshPlan::CenterCell { resolution } => {
                if p != 2 {
                    return Err(Error::Config("center-cell mesh needs p = 2".into()));
                }
                let (lo, hi) = center_cell();
                MeshSpec::BoxGrid {
                    lower: lo.to_vec(),
                    upper: hi.to_vec(),
                    resolution: *resolution,
                }
            }
            MeshPlan::Auto { budget } => MeshSpec::default_for(p, *budget),
        };
        build_mesh(&spec)
    }

    fn label(&self) -> &'static str {
        match self {
            MeshPlan::Grid { .. } => "grid",
            MeshPlan::LowDiscrepancy { .. } => "low_discrepancy",
            MeshPlan::Slice { .. } => "slice",
            MeshPlan::CenterCell { .. } => "center_cell",
            MeshPlan::Auto { .. } => "auto",
        }
    }
}

/// One estimator to evaluate, optionally tuned by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub label: String,
    pub learner: Learner,
    /// Grids searched when the experiment has a CV plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSpace>,
}

impl RunSpec {
    pub fn forest(label: &str, config: GrowthConfig) -> Self {
        RunSpec {
            label: label.to_string(),
            learner: Learner::Forest { config },
            search: None,
        }
    }

    pub fn searched(mut self, space: SearchSpace) -> Self {
        self.search = Some(space);
        self
    }

    fn algorithm(&self) -> &'static str {
        match &self.learner {
            Learner::Forest { config } => config.algorithm.name(),
            Learner::KernelRidge { .. } => "kernel_ridge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    /// Catalog models; sweeps over `p` use the first.
    #[serde(default)]
    pub models: Vec<String>,
    /// Overrides the catalog noise level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub p_grid: Vec<usize>,
    #[serde(default)]
    pub alpha_grid: Vec<f64>,
    pub runs: Vec<RunSpec>,
    /// Replicate seeds; every stochastic step derives from these.
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshPlan>,
    /// Cross-validation applied to runs that carry a search space. The
    /// plan's own seed is replaced by one derived from the replicate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    /// Resolution of the contour grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<usize>,
    #[serde(default = "default_max_trees")]
    pub max_total_trees: u64,
}

fn default_max_trees() -> u64 {
    DEFAULT_MAX_TOTAL_TREES
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub model: String,
    pub run: String,
    pub algorithm: String,
    pub n: usize,
    pub p: usize,
    /// Final values after any CV.
    pub q_n: Option<u64>,
    pub alpha: Option<f64>,
    pub bandwidth: Option<f64>,
    pub lambda: Option<f64>,
    pub trees: Option<usize>,
    pub replicate_seed: u64,
    pub data_seed: u64,
    pub fit_seed: u64,
    /// Mesh (or `test` for held-out rows) the error was measured on.
    pub region: String,
    pub error: f64,
    /// Mean validation MSE of the chosen candidate, when tuned.
    pub cv_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub results_csv: PathBuf,
    pub timings_csv: PathBuf,
    pub manifest: PathBuf,
    pub chart: PathBuf,
    pub grid_csv: Option<PathBuf>,
}

/// Seeds for one replicate: `(data_seed, fit_seed)`. Sampling uses
/// `data_seed`; forests, CV folds, and splits use `fit_seed`.
pub fn replicate_seeds(seed: u64, n: usize, p: usize) -> (u64, u64) {
    let data_seed = child_seed(child_seed(seed, n as u64), p as u64);
    (data_seed, child_seed(data_seed, u64::MAX))
}

fn simulation_config(algorithm: Algorithm, q_n: u64, alpha: f64) -> GrowthConfig {
    GrowthConfig::new(algorithm)
        .trees(100)
        .q_n(q_n)
        .alpha(alpha)
        .sample_size(SampleSize::Divided { divisor: 1.3 })
        .resample(ResampleMode::WithoutReplacement)
}

fn simulation_cv() -> CvPlan {
    CvPlan {
        folds: 5,
        budget: 12,
        seed: 0,
    }
}

/// Kernel hyperparameter grid shared by the grafted and plain kernel runs.
pub fn kernel_search_space() -> SearchSpace {
    SearchSpace {
        bandwidth: vec![0.1, 0.3, 1.0, 3.0],
        lambda: vec![1e-3, 1e-2, 1e-1],
        ..Default::default()
    }
}

/// Built-in experiment definitions. `seed` becomes the single replicate.
pub fn preset(name: &str, seed: u64) -> Result<ExperimentSpec> {
    let base = |kind, models: Vec<String>, runs| ExperimentSpec {
        name: name.to_string(),
        kind,
        models,
        noise_sd: None,
        n_grid: vec![],
        p_grid: vec![],
        alpha_grid: vec![],
        runs,
        seeds: vec![seed],
        mesh: None,
        cv: None,
        data_path: None,
        target_column: None,
        test_fraction: None,
        grid_resolution: None,
        max_total_trees: DEFAULT_MAX_TOTAL_TREES,
    };
    let sparsity_runs = || {
        vec![
            RunSpec::forest("breiman", simulation_config(Algorithm::Cart, 1, 1.0)),
            RunSpec::forest("centered", simulation_config(Algorithm::Centered, 10, 1.0)),
            RunSpec::forest(
                "grafted",
                simulation_config(Algorithm::Grafted, 10, 10.0).restrict_features(true),
            ),
        ]
    };
    let p_grid: Vec<usize> = (2..=102).step_by(10).collect();
    let spec = match name {
        "fig2" | "fig3" | "fig4" | "fig5" | "fig6" | "fig7" => {
            let mut s = base(
                ExperimentKind::ErrorVsN,
                vec![name.to_string()],
                vec![
                    RunSpec::forest("breiman", simulation_config(Algorithm::Cart, 1, 1.0))
                        .searched(SearchSpace::leaf_size()),
                    RunSpec::forest("grafted", simulation_config(Algorithm::Grafted, 5, 4.0))
                        .searched(SearchSpace::grafted()),
                ],
            );
            s.n_grid = vec![500, 1000, 2000, 4000, 8000];
            s.mesh = Some(MeshPlan::Grid { resolution: 20 });
            s.cv = Some(simulation_cv());
            s
        }
        "fig8" => {
            let mut s = base(
                ExperimentKind::AlphaSweep,
                ALPHA_STUDY.iter().map(|m| m.to_string()).collect(),
                vec![RunSpec::forest(
                    "grafted",
                    simulation_config(Algorithm::Grafted, 10, 1.0).sample_size(SampleSize::Fixed { size: 8000 }),
                )],
            );
            s.n_grid = vec![10_000];
            s.alpha_grid = vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
            s.mesh = Some(MeshPlan::Grid { resolution: 20 });
            s
        }
        "fig9" | "sparsity" => {
            let mut s = base(
                ExperimentKind::SparsitySweep,
                vec!["sparse_x1x2".into()],
                sparsity_runs(),
            );
            s.n_grid = vec![1000];
            s.p_grid = p_grid;
            s
        }
        "fig10" | "kernel_sparsity" => {
            let krr = LeafRegressorSpec::KernelRidge {
                bandwidth: BandwidthRule::Fixed { h: 0.3 },
                lambda: 1e-2,
            };
            let mut s = base(
                ExperimentKind::KernelSparsitySweep,
                vec!["sparse_x1x2".into()],
                vec![
                    RunSpec::forest("breiman", simulation_config(Algorithm::Cart, 1, 1.0)),
                    RunSpec::forest(
                        "grafted_kernel_ridge",
                        simulation_config(Algorithm::GraftedGeneral, 10, 10.0)
                            .leaf_regressor(krr)
                            .restrict_features(true),
                    )
                    .searched(kernel_search_space()),
                    RunSpec {
                        label: "kernel_ridge".into(),
                        learner: Learner::kernel_ridge_default(),
                        search: Some(kernel_search_space()),
                    },
                ],
            );
            s.n_grid = vec![1000];
            s.p_grid = p_grid;
            s.cv = Some(simulation_cv());
            s
        }
        "boston" => {
            let bagged = |algorithm, q_n, alpha| {
                GrowthConfig::new(algorithm)
                    .trees(100)
                    .q_n(q_n)
                    .alpha(alpha)
                    .sample_size(SampleSize::Fixed { size: 400 })
                    .resample(ResampleMode::WithReplacement)
            };
            let mut s = base(
                ExperimentKind::Boston,
                vec!["boston".into()],
                vec![
                    RunSpec::forest("breiman", bagged(Algorithm::Cart, 1, 1.0)).searched(SearchSpace::leaf_size()),
                    RunSpec::forest("centered", bagged(Algorithm::Centered, 3, 1.0))
                        .searched(SearchSpace::leaf_size()),
                    RunSpec::forest("grafted", bagged(Algorithm::Grafted, 5, 4.0)).searched(SearchSpace::grafted()),
                ],
            );
            s.target_column = Some("MEDV".into());
            s.test_fraction = Some(102.0 / 506.0);
            s.cv = Some(CvPlan {
                folds: 50,
                budget: 64,
                seed: 0,
            });
            s
        }
        "biau" => {
            let mut s = base(
                ExperimentKind::BiauContours,
                vec!["biau".into()],
                vec![
                    RunSpec::forest("breiman", simulation_config(Algorithm::Cart, 1, 1.0)),
                    RunSpec::forest("grafted", simulation_config(Algorithm::Grafted, 5, 16.0)),
                ],
            );
            s.n_grid = vec![20_000];
            s.mesh = Some(MeshPlan::CenterCell { resolution: 64 });
            s.grid_resolution = Some(100);
            s
        }
        other => {
            return Err(Error::Lookup {
                kind: "experiment preset",
                name: other.to_string(),
            })
        }
    };
    Ok(spec)
}

fn increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("experiment `{}`: {m}", self.name)));
        if self.runs.is_empty() {
            return fail("no runs");
        }
        if self.seeds.is_empty() {
            return fail("no replicate seeds");
        }
        let needs_n = !matches!(self.kind, ExperimentKind::Boston);
        if needs_n && (self.n_grid.is_empty() || !increasing(&self.n_grid)) {
            return fail("n grid must be nonempty and increasing");
        }
        match self.kind {
            ExperimentKind::SparsitySweep | ExperimentKind::KernelSparsitySweep => {
                if self.p_grid.is_empty() || !increasing(&self.p_grid) {
                    return fail("p grid must be nonempty and increasing");
                }
            }
            ExperimentKind::AlphaSweep => {
                if self.alpha_grid.is_empty() || !increasing(&self.alpha_grid) {
                    return fail("alpha grid must be nonempty and increasing");
                }
            }
            ExperimentKind::Boston => {
                if self.data_path.is_none() {
                    return fail("needs a data path");
                }
            }
            _ => {}
        }
        if !matches!(self.kind, ExperimentKind::Boston) && self.models.is_empty() {
            return fail("no models");
        }
        for m in &self.models {
            if self.kind != ExperimentKind::Boston {
                cef_catalog(m)?;
            }
        }
        let labels: std::collections::BTreeSet<&str> = self.runs.iter().map(|r| r.label.as_str()).collect();
        if labels.len() != self.runs.len() {
            return fail("run labels must be unique");
        }
        let total = self.estimated_trees();
        if total > self.max_total_trees {
            return Err(Error::Config(format!(
                "experiment `{}` would grow about {total} trees, above the limit of {}",
                self.name, self.max_total_trees
            )));
        }
        Ok(())
    }

    fn configurations(&self) -> u64 {
        let models = self.models.len().max(1) as u64;
        let seeds = self.seeds.len() as u64;
        let n = self.n_grid.len().max(1) as u64;
        match self.kind {
            ExperimentKind::ErrorVsN => models * n * seeds,
            ExperimentKind::AlphaSweep => models * n * self.alpha_grid.len() as u64 * seeds,
            ExperimentKind::SparsitySweep | ExperimentKind::KernelSparsitySweep => {
                self.p_grid.len() as u64 * n * seeds
            }
            ExperimentKind::Boston | ExperimentKind::BiauContours => n * seeds,
        }
    }

    /// Trees grown across all configurations, CV refits included.
    pub fn estimated_trees(&self) -> u64 {
        let per_config: u64 = self
            .runs
            .iter()
            .map(|run| {
                let trees = match &run.learner {
                    Learner::Forest { config } => config.trees as u64,
                    Learner::KernelRidge { .. } => 0,
                };
                let fits = match (&run.search, &self.cv) {
                    (Some(space), Some(cv)) => {
                        1 + cv.folds as u64 * (space.candidates().len().min(cv.budget)) as u64
                    }
                    _ => 1,
                };
                trees * fits
            })
            .sum();
        per_config.saturating_mul(self.configurations())
    }

    fn model(&self, name: &str, p: Option<usize>) -> Result<SyntheticModel> {
        let mut m = cef_catalog(name)?;
        if let Some(sd) = self.noise_sd {
            m = m.with_noise_sd(sd);
        }
        if let Some(p) = p {
            m = m.with_dim(p)?;
        }
        Ok(m)
    }
}

struct Fitted {
    predictor: Box<dyn Predictor + Send>,
    learner: Learner,
    cv: Option<CvResult>,
}

fn fit_run(spec: &ExperimentSpec, run: &RunSpec, train: &Dataset, fit_seed: u64, alpha: Option<f64>) -> Result<Fitted> {
    let mut learner = run.learner.clone();
    if let Learner::Forest { config } = &mut learner {
        config.seed = fit_seed;
        if let Some(a) = alpha {
            config.alpha = a;
        }
    }
    let cv = match (&run.search, &spec.cv) {
        (Some(space), Some(plan)) => {
            let plan = CvPlan {
                seed: child_seed(fit_seed, 1),
                ..plan.clone()
            };
            let result = random_search_cv(train, &plan, space, &learner)?;
            learner = learner.with_candidate(&result.best)?;
            Some(result)
        }
        _ => None,
    };
    let predictor = learner.fit(train)?;
    Ok(Fitted { predictor, learner, cv })
}

struct RowContext<'a> {
    spec: &'a ExperimentSpec,
    model: &'a str,
    n: usize,
    p: usize,
    replicate_seed: u64,
    data_seed: u64,
    fit_seed: u64,
}

fn make_row(ctx: &RowContext<'_>, run: &RunSpec, fitted: &Fitted, region: &str, error: f64) -> ResultRow {
    let (q_n, alpha, trees, bandwidth, lambda) = match &fitted.learner {
        Learner::Forest { config } => {
            let (h, l) = match config.leaf_regressor {
                LeafRegressorSpec::Constant => (None, None),
                LeafRegressorSpec::NadarayaWatson { bandwidth } => (fixed_h(bandwidth), None),
                LeafRegressorSpec::KernelRidge { bandwidth, lambda } => (fixed_h(bandwidth), Some(lambda)),
            };
            let alpha = config.algorithm.is_grafted().then_some(config.alpha);
            (Some(config.q_n), alpha, Some(config.trees), h, l)
        }
        Learner::KernelRidge { bandwidth, lambda } => (None, None, None, Some(*bandwidth), Some(*lambda)),
    };
    ResultRow {
        experiment: ctx.spec.name.clone(),
        model: ctx.model.to_string(),
        run: run.label.clone(),
        algorithm: run.algorithm().to_string(),
        n: ctx.n,
        p: ctx.p,
        q_n,
        alpha,
        bandwidth,
        lambda,
        trees,
        replicate_seed: ctx.replicate_seed,
        data_seed: ctx.data_seed,
        fit_seed: ctx.fit_seed,
        region: region.to_string(),
        error,
        cv_mse: fitted.cv.as_ref().map(|c| c.best_mse),
    }
}

fn fixed_h(rule: BandwidthRule) -> Option<f64> {
    match rule {
        BandwidthRule::Fixed { h } => Some(h),
        BandwidthRule::Rate { .. } => None,
    }
}

/// Rows plus per-row runtimes in seconds and the optional contour grid.
pub struct Evaluation {
    pub rows: Vec<ResultRow>,
    pub seconds: Vec<f64>,
    pub grid: Option<ContourGrid>,
}

/// Truth and estimates on a regular grid of the unit square.
pub struct ContourGrid {
    pub resolution: usize,
    pub points: Mesh,
    pub columns: Vec<(String, Vec<f64>)>,
}

/// Execute `spec` without writing files.
pub fn evaluate(spec: &ExperimentSpec) -> Result<Evaluation> {
    spec.validate()?;
    let mut eval = Evaluation {
        rows: Vec::new(),
        seconds: Vec::new(),
        grid: None,
    };
    let default_mesh = |p: usize| match spec.kind {
        ExperimentKind::SparsitySweep | ExperimentKind::KernelSparsitySweep => MeshPlan::Slice {
            active: vec![0, 1],
            resolution: 32,
            fill: 0.5,
        },
        ExperimentKind::BiauContours => MeshPlan::CenterCell { resolution: 64 },
        _ => MeshPlan::Auto {
            budget: if p <= 3 { 8000 } else { 4096 },
        },
    };
    match spec.kind {
        ExperimentKind::ErrorVsN | ExperimentKind::AlphaSweep => {
            let alphas: Vec<Option<f64>> = if spec.kind == ExperimentKind::AlphaSweep {
                spec.alpha_grid.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for name in &spec.models {
                let model = spec.model(name, None)?;
                let plan = spec.mesh.clone().unwrap_or_else(|| default_mesh(model.p));
                let mesh = plan.build(model.p)?;
                for &n in &spec.n_grid {
                    for &alpha in &alphas {
                        for &seed in &spec.seeds {
                            simulate(spec, &mut eval, &model, &mesh, plan.label(), n, seed, alpha)?;
                        }
                    }
                }
            }
        }
        ExperimentKind::SparsitySweep | ExperimentKind::KernelSparsitySweep => {
            for &p in &spec.p_grid {
                let model = spec.model(&spec.models[0], Some(p))?;
                let plan = spec.mesh.clone().unwrap_or_else(|| default_mesh(p));
                let mesh = plan.build(p)?;
                for &n in &spec.n_grid {
                    for &seed in &spec.seeds {
                        simulate(spec, &mut eval, &model, &mesh, plan.label(), n, seed, None)?;
                    }
                }
            }
        }
        ExperimentKind::BiauContours => {
            let model = spec.model(&spec.models[0], None)?;
            let plan = spec.mesh.clone().unwrap_or_else(|| default_mesh(2));
            let mesh = plan.build(2)?;
            let full = MeshPlan::Grid { resolution: 64 }.build(2)?;
            let resolution = spec.grid_resolution.unwrap_or(100);
            let grid_points = MeshPlan::Grid { resolution }.build(2)?;
            let n = spec.n_grid[0];
            for (k, &seed) in spec.seeds.iter().enumerate() {
                let (data_seed, fit_seed) = replicate_seeds(seed, n, 2);
                let train = sample_model(&model, n, data_seed)?;
                let ctx = RowContext {
                    spec,
                    model: &model.name,
                    n,
                    p: 2,
                    replicate_seed: seed,
                    data_seed,
                    fit_seed,
                };
                if k == 0 {
                    let truth = grid_points.rows().map(|x| model.cef(x)).collect();
                    eval.grid = Some(ContourGrid {
                        resolution,
                        points: grid_points.clone(),
                        columns: vec![("truth".into(), truth)],
                    });
                }
                for run in &spec.runs {
                    let start = Instant::now();
                    let fitted = fit_run(spec, run, &train, fit_seed, None)?;
                    let center = mesh_l2_error(fitted.predictor.as_ref(), &model, &mesh)?;
                    let whole = mesh_l2_error(fitted.predictor.as_ref(), &model, &full)?;
                    if k == 0 {
                        let values = grid_points
                            .rows()
                            .map(|x| fitted.predictor.predict_point(x))
                            .collect::<Result<Vec<f64>>>()?;
                        if let Some(g) = eval.grid.as_mut() {
                            g.columns.push((run.label.clone(), values));
                        }
                    }
                    let secs = start.elapsed().as_secs_f64();
                    eval.rows.push(make_row(&ctx, run, &fitted, plan.label(), center));
                    eval.rows.push(make_row(&ctx, run, &fitted, "full", whole));
                    eval.seconds.extend([secs, 0.0]);
                }
            }
        }
        ExperimentKind::Boston => {
            let path = spec.data_path.as_ref().ok_or_else(|| Error::Config("boston needs a data path".into()))?;
            let target = spec.target_column.as_deref().unwrap_or("MEDV");
            let loaded = load_csv(path, target, false)?;
            if target == "MEDV" {
                validate_boston_profile(&loaded)?;
            }
            let data = loaded.dataset;
            let fraction = spec.test_fraction.unwrap_or(102.0 / 506.0);
            for &seed in &spec.seeds {
                let (data_seed, fit_seed) = replicate_seeds(seed, data.n(), data.p());
                let (train_idx, test_idx) = train_test_split(data.n(), fraction, data_seed)?;
                let raw_train = data.subset(&train_idx)?;
                let scaler = MinMaxScaler::fit(&raw_train);
                let train = scaler.transform(&raw_train)?;
                let test = scaler.transform(&data.subset(&test_idx)?)?;
                let all_test: Vec<usize> = (0..test.n()).collect();
                let ctx = RowContext {
                    spec,
                    model: "boston",
                    n: data.n(),
                    p: data.p(),
                    replicate_seed: seed,
                    data_seed,
                    fit_seed,
                };
                for run in &spec.runs {
                    let start = Instant::now();
                    let fitted = fit_run(spec, run, &train, fit_seed, None)?;
                    let err = test_error(fitted.predictor.as_ref(), &test, &all_test)?;
                    eval.seconds.push(start.elapsed().as_secs_f64());
                    eval.rows.push(make_row(&ctx, run, &fitted, "test", err));
                }
            }
        }
    }
    Ok(eval)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    spec: &ExperimentSpec,
    eval: &mut Evaluation,
    model: &SyntheticModel,
    mesh: &Mesh,
    region: &str,
    n: usize,
    seed: u64,
    alpha: Option<f64>,
) -> Result<()> {
    let (data_seed, fit_seed) = replicate_seeds(seed, n, model.p);
    let train = sample_model(model, n, data_seed)?;
    let ctx = RowContext {
        spec,
        model: &model.name,
        n,
        p: model.p,
        replicate_seed: seed,
        data_seed,
        fit_seed,
    };
    for run in &spec.runs {
        let start = Instant::now();
        let fitted = fit_run(spec, run, &train, fit_seed, alpha)?;
        let err = mesh_l2_error(fitted.predictor.as_ref(), model, mesh)?;
        eval.seconds.push(start.elapsed().as_secs_f64());
        eval.rows.push(make_row(&ctx, run, &fitted, region, err));
    }
    Ok(())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Median error over replicates, grouped by `key` within each `group`.
fn medians(
    rows: &[ResultRow],
    group: impl Fn(&ResultRow) -> String,
    series: impl Fn(&ResultRow) -> String,
    x: impl Fn(&ResultRow) -> f64,
) -> BTreeMap<String, BTreeMap<String, Vec<(f64, f64)>>> {
    let mut acc: BTreeMap<String, BTreeMap<String, Vec<(f64, Vec<f64>)>>> = BTreeMap::new();
    for r in rows {
        let points = acc.entry(group(r)).or_default().entry(series(r)).or_default();
        let xv = x(r);
        match points.iter_mut().find(|(px, _)| *px == xv) {
            Some((_, errs)) => errs.push(r.error),
            None => points.push((xv, vec![r.error])),
        }
    }
    acc.into_iter()
        .map(|(g, s)| {
            let s = s
                .into_iter()
                .map(|(name, mut pts)| {
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    (name, pts.into_iter().map(|(x, mut e)| (x, median(&mut e))).collect())
                })
                .collect();
            (g, s)
        })
        .collect()
}

fn chart_for(spec: &ExperimentSpec, eval: &Evaluation) -> String {
    let to_panels = |groups: BTreeMap<String, BTreeMap<String, Vec<(f64, f64)>>>, x_label: &str, log_x: bool| {
        groups
            .into_iter()
            .map(|(title, series)| Panel {
                title,
                x_label: x_label.to_string(),
                y_label: "L2 error".into(),
                log_x,
                log_y: true,
                series: series.into_iter().map(|(name, points)| Series { name, points }).collect(),
            })
            .collect::<Vec<_>>()
    };
    match spec.kind {
        ExperimentKind::ErrorVsN => line_chart(&to_panels(
            medians(&eval.rows, |r| r.model.clone(), |r| r.run.clone(), |r| r.n as f64),
            "n",
            true,
        )),
        ExperimentKind::AlphaSweep => line_chart(&to_panels(
            medians(
                &eval.rows,
                |r| format!("{} (n={})", r.run, r.n),
                |r| r.model.clone(),
                |r| r.alpha.unwrap_or(f64::NAN),
            ),
            "alpha",
            true,
        )),
        ExperimentKind::SparsitySweep | ExperimentKind::KernelSparsitySweep => line_chart(&to_panels(
            medians(&eval.rows, |r| r.model.clone(), |r| r.run.clone(), |r| r.p as f64),
            "p",
            false,
        )),
        ExperimentKind::Boston => {
            let groups = medians(&eval.rows, |_| String::new(), |r| r.run.clone(), |_| 0.0);
            let bars: Vec<(String, f64)> = spec
                .runs
                .iter()
                .map(|run| {
                    let v = groups
                        .get("")
                        .and_then(|s| s.get(&run.label))
                        .and_then(|p| p.first())
                        .map_or(f64::NAN, |p| p.1);
                    (run.label.clone(), v)
                })
                .collect();
            bar_chart(&spec.name, "test MSE", &bars)
        }
        ExperimentKind::BiauContours => match &eval.grid {
            Some(g) => heatmaps(&g.columns, g.resolution),
            None => line_chart(&[]),
        },
    }
}

fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut file = fs::File::create(path)?;
    writeln!(file, "# generated_unix_time={stamp}")?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["experiment"])?;
    }
    w.flush()?;
    Ok(())
}

fn write_timings(path: &Path, rows: &[ResultRow], seconds: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run", "model", "n", "p", "alpha", "replicate_seed", "region", "seconds"])?;
    for (r, s) in rows.iter().zip(seconds) {
        w.write_record([
            r.run.clone(),
            r.model.clone(),
            r.n.to_string(),
            r.p.to_string(),
            r.alpha.map(|a| a.to_string()).unwrap_or_default(),
            r.replicate_seed.to_string(),
            r.region.clone(),
            format!("{s:.3}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_grid(path: &Path, grid: &ContourGrid) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["x1".to_string(), "x2".to_string()];
    header.extend(grid.columns.iter().map(|c| c.0.clone()));
    w.write_record(&header)?;
    for (i, x) in grid.points.rows().enumerate() {
        let mut rec = vec![x[0].to_string(), x[1].to_string()];
        rec.extend(grid.columns.iter().map(|c| c.1[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Run `spec` and write its outputs into `out_dir` (created if needed).
pub fn run_experiment(spec: &ExperimentSpec, out_dir: impl AsRef<Path>) -> Result<ExperimentOutput> {
    let out_dir = out_dir.as_ref();
    let eval = evaluate(spec)?;
    fs::create_dir_all(out_dir)?;
    let results_csv = out_dir.join("results.csv");
    let timings_csv = out_dir.join("timings.csv");
    let manifest = out_dir.join("manifest.json");
    let chart = out_dir.join("chart.svg");
    write_results(&results_csv, &eval.rows)?;
    write_timings(&timings_csv, &eval.rows, &eval.seconds)?;
    fs::write(&chart, chart_for(spec, &eval))?;
    let grid_csv = match &eval.grid {
        Some(g) => {
            let path = out_dir.join("grid.csv");
            write_grid(&path, g)?;
            Some(path)
        }
        None => None,
    };
    let seeds: Vec<serde_json::Value> = eval
        .rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "run": r.run, "model": r.model, "n": r.n, "p": r.p,
                "replicate_seed": r.replicate_seed, "data_seed": r.data_seed, "fit_seed": r.fit_seed,
            })
        })
        .collect();
    let doc = serde_json::json!({
        "crate": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "spec": spec,
        "rows": eval.rows.len(),
        "seeds": seeds,
        "outputs": {
            "results": "results.csv",
            "timings": "timings.csv",
            "chart": "chart.svg",
            "grid": grid_csv.as_ref().map(|_| "grid.csv"),
        },
    });
    fs::write(&manifest, serde_json::to_string_pretty(&doc)?)?;
    Ok(ExperimentOutput {
        rows: eval.rows,
        results_csv,
        timings_csv,
        manifest,
        chart,
        grid_csv,
    })
}
