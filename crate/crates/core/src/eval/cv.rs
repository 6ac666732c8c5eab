use std::cmp::Ordering;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{GrowthConfig, SampleSize};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{metrics::test_error, Predictor};
use crate::forest::ForestModel;
use crate::leaf::{fit_kernel_ridge, BandwidthRule, LeafRegressorSpec, DEFAULT_RIDGE_PENALTY};
use crate::resample::ResampleMode;

pub const DEFAULT_FOLDS: usize = 50;
pub const DEFAULT_Q_GRID: [u64; 8] = [1, 2, 3, 5, 8, 10, 15, 20];
pub const DEFAULT_ALPHA_GRID: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

/// Fold layout and search budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: usize,
    /// Maximum number of candidates evaluated.
    pub budget: usize,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        CvPlan {
            folds: DEFAULT_FOLDS,
            budget: 64,
            seed: 0,
        }
    }
}

impl CvPlan {
    /// Validation index sets: a seeded permutation of `0..n` cut into
    /// `folds` contiguous chunks.
    pub fn validation_folds(&self, n: usize) -> Result<Vec<Vec<usize>>> {
        if self.folds < 2 {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        if n < self.folds {
            return Err(Error::Config(format!(
                "{} folds leave empty validation slices for n={n}",
                self.folds
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        Ok((0..self.folds)
            .map(|k| {
                let mut fold = order[k * n / self.folds..(k + 1) * n / self.folds].to_vec();
                fold.sort_unstable();
                fold
            })
            .collect())
    }
}

/// Hyperparameters a candidate may override. Unset fields keep the
/// learner's base value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Candidate {
    pub q_n: Option<u64>,
    pub alpha: Option<f64>,
    pub bandwidth: Option<f64>,
    pub lambda: Option<f64>,
}

fn cmp_opt_f64(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => a.is_some().cmp(&b.is_some()),
    }
}

impl Candidate {
    /// Lexicographic order on `(q_n, alpha, bandwidth, lambda)`.
    pub fn lex_cmp(&self, other: &Candidate) -> Ordering {
        self.q_n
            .cmp(&other.q_n)
            .then_with(|| cmp_opt_f64(self.alpha, other.alpha))
            .then_with(|| cmp_opt_f64(self.bandwidth, other.bandwidth))
            .then_with(|| cmp_opt_f64(self.lambda, other.lambda))
    }
}

/// Grids per hyperparameter; an empty grid leaves that parameter alone.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchSpace {
    #[serde(default)]
    pub q_n: Vec<u64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub bandwidth: Vec<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
}

fn axis<T: Copy>(values: &[T]) -> Vec<Option<T>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    }
}

impl SearchSpace {
    /// `q_n` over the default grid.
    pub fn leaf_size() -> Self {
        SearchSpace {
            q_n: DEFAULT_Q_GRID.to_vec(),
            ..Default::default()
        }
    }

    /// `q_n` and `alpha` over the default grids.
    pub fn grafted() -> Self {
        SearchSpace {
            q_n: DEFAULT_Q_GRID.to_vec(),
            alpha: DEFAULT_ALPHA_GRID.to_vec(),
            ..Default::default()
        }
    }

    /// Every combination, sorted lexicographically.
    pub fn candidates(&self) -> Vec<Candidate> {
        let mut out = Vec::new();
        for q_n in axis(&self.q_n) {
            for alpha in axis(&self.alpha) {
                for bandwidth in axis(&self.bandwidth) {
                    for lambda in axis(&self.lambda) {
                        out.push(Candidate {
                            q_n,
                            alpha,
                            bandwidth,
                            lambda,
                        });
                    }
                }
            }
        }
        out.sort_by(Candidate::lex_cmp);
        out
    }
}

/// What is being tuned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum Learner {
    Forest { config: GrowthConfig },
    /// Gaussian kernel ridge regression on all features.
    KernelRidge { bandwidth: f64, lambda: f64 },
}

impl Learner {
    pub fn kernel_ridge_default() -> Self {
        Learner::KernelRidge {
            bandwidth: 0.5,
            lambda: DEFAULT_RIDGE_PENALTY,
        }
    }

    /// The learner with `candidate`'s overrides applied.
    pub fn with_candidate(&self, c: &Candidate) -> Result<Learner> {
        Ok(match self {
            Learner::Forest { config } => {
                let mut config = config.clone();
                if let Some(q) = c.q_n {
                    config.q_n = q;
                }
                if let Some(a) = c.alpha {
                    config.alpha = a;
                }
                if c.bandwidth.is_some() || c.lambda.is_some() {
                    config.leaf_regressor = match config.leaf_regressor {
                        LeafRegressorSpec::Constant => {
                            return Err(Error::Config("constant leaves have no kernel hyperparameters".into()))
                        }
                        LeafRegressorSpec::NadarayaWatson { bandwidth } => LeafRegressorSpec::NadarayaWatson {
                            bandwidth: c.bandwidth.map_or(bandwidth, |h| BandwidthRule::Fixed { h }),
                        },
                        LeafRegressorSpec::KernelRidge { bandwidth, lambda } => LeafRegressorSpec::KernelRidge {
                            bandwidth: c.bandwidth.map_or(bandwidth, |h| BandwidthRule::Fixed { h }),
                            lambda: c.lambda.unwrap_or(lambda),
                        },
                    };
                }
                Learner::Forest { config }
            }
            Learner::KernelRidge { bandwidth, lambda } => {
                if c.q_n.is_some() || c.alpha.is_some() {
                    return Err(Error::Config("kernel ridge has no q_n or alpha".into()));
                }
                Learner::KernelRidge {
                    bandwidth: c.bandwidth.unwrap_or(*bandwidth),
                    lambda: c.lambda.unwrap_or(*lambda),
                }
            }
        })
    }

    /// Fit on all rows of `data`. A fixed subsample size larger than the
    /// data is clamped to `n` when sampling without replacement.
    pub fn fit(&self, data: &Dataset) -> Result<Box<dyn Predictor + Send>> {
        match self {
            Learner::Forest { config } => {
                let mut config = config.clone();
                if let SampleSize::Fixed { size } = config.sample_size {
                    if config.resample == ResampleMode::WithoutReplacement && size > data.n() {
                        config.sample_size = SampleSize::Fixed { size: data.n() };
                    }
                }
                Ok(Box::new(ForestModel::fit(data, &config)?))
            }
            Learner::KernelRidge { bandwidth, lambda } => Ok(Box::new(fit_kernel_ridge(
                data.features().to_vec(),
                data.p(),
                data.targets().to_vec(),
                *bandwidth,
                *lambda,
            )?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub candidate: Candidate,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: Candidate,
    pub best_mse: f64,
    pub table: Vec<CvRow>,
}

/// Rows of `data` outside `validation`.
pub fn complement(n: usize, validation: &[usize]) -> Vec<usize> {
    let mut held = vec![false; n];
    validation.iter().for_each(|&i| held[i] = true);
    (0..n).filter(|&i| !held[i]).collect()
}

/// Training rows of a fold: everything outside `validation`.
pub fn fold_training_set(data: &Dataset, validation: &[usize]) -> Result<Dataset> {
    data.subset(&complement(data.n(), validation))
}

/// Validation MSE of one candidate on each fold.
pub fn fold_errors(data: &Dataset, folds: &[Vec<usize>], learner: &Learner) -> Result<Vec<f64>> {
    folds
        .iter()
        .map(|validation| {
            if validation.is_empty() {
                return Err(Error::Config("empty validation fold".into()));
            }
            let train = fold_training_set(data, validation)?;
            let model = learner.fit(&train)?;
            test_error(model.as_ref(), data, validation)
        })
        .collect()
}

/// K-fold cross-validation over `space`. All candidates are scored when
/// they fit in the budget; otherwise `budget` distinct candidates are drawn
/// uniformly. The minimum mean validation MSE wins, ties going to the
/// lexicographically smaller candidate.
pub fn random_search_cv(data: &Dataset, plan: &CvPlan, space: &SearchSpace, learner: &Learner) -> Result<CvResult> {
    let all = space.candidates();
    if plan.budget == 0 {
        return Err(Error::Config("search budget must be positive".into()));
    }
    let chosen: Vec<Candidate> = if all.len() <= plan.budget {
        all
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(1);
        let mut picks = index::sample(&mut rng, all.len(), plan.budget).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|i| all[i]).collect()
    };
    let folds = plan.validation_folds(data.n())?;
    let mut table = Vec::with_capacity(chosen.len());
    for candidate in chosen {
        let fold_mse = fold_errors(data, &folds, &learner.with_candidate(&candidate)?)?;
        let mean_mse = fold_mse.iter().sum::<f64>() / fold_mse.len() as f64;
        table.push(CvRow {
            candidate,
            fold_mse,
            mean_mse,
        });
    }
    let mut best = 0;
    for (k, row) in table.iter().enumerate() {
        if row.mean_mse < table[best].mean_mse {
            best = k;
        }
    }
    Ok(CvResult {
        best: table[best].candidate,
        best_mse: table[best].mean_mse,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Algorithm;

    #[test]
    fn folds_partition_rows() {
        let plan = CvPlan {
            folds: 4,
            budget: 1,
            seed: 3,
        };
        let folds = plan.validation_folds(10).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.len() == 2 || f.len() == 3));
        assert!(plan.validation_folds(3).is_err());
    }

    #[test]
    fn grid_is_sorted_product() {
        let c = SearchSpace::grafted().candidates();
        assert_eq!(c.len(), 48);
        assert!(c.windows(2).all(|w| w[0].lex_cmp(&w[1]) == Ordering::Less));
        assert_eq!(SearchSpace::default().candidates(), vec![Candidate::default()]);
    }

    #[test]
    fn single_candidate() {
        let d = Dataset::from_rows(&(0..20).map(|i| vec![i as f64 / 20.0]).collect::<Vec<_>>(), (0..20).map(|i| i as f64).collect()).unwrap();
        let learner = Learner::Forest {
            config: GrowthConfig::new(Algorithm::Cart).trees(2),
        };
        let space = SearchSpace {
            q_n: vec![3],
            ..Default::default()
        };
        let plan = CvPlan {
            folds: 5,
            budget: 10,
            seed: 0,
        };
        let r = random_search_cv(&d, &plan, &space, &learner).unwrap();
        assert_eq!(r.best.q_n, Some(3));
        assert_eq!(r.table.len(), 1);
        assert_eq!(r.table[0].fold_mse.len(), 5);
    }
}
