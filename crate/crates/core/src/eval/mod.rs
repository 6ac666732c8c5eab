//! Error metrics, cross-validation, the leaf side-length diagnostic, and the
//! experiment runner.

pub mod chart;
pub mod cv;
pub mod experiment;
pub mod metrics;
pub mod side_length;

pub use cv::{fold_errors, fold_training_set, random_search_cv, Candidate, CvPlan, CvResult, CvRow, Learner, SearchSpace};
pub use experiment::{
    evaluate, preset, replicate_seeds, run_experiment, Evaluation, ExperimentKind, ExperimentOutput, ExperimentSpec,
    MeshPlan, ResultRow, RunSpec, PRESETS,
};
pub use metrics::{mesh_l2_error, test_error};
pub use side_length::{scion_shrinkage_bound, side_length_stats, SideLengthStats};

use crate::error::Result;
use crate::forest::ForestModel;
use crate::leaf::FittedLeafRegressor;

/// Anything that maps a point to a real prediction.
pub trait Predictor: Sync {
    fn dim(&self) -> usize;
    fn predict_point(&self, x: &[f64]) -> Result<f64>;
}

impl Predictor for ForestModel {
    fn dim(&self) -> usize {
        ForestModel::dim(self)
    }

    fn predict_point(&self, x: &[f64]) -> Result<f64> {
        self.predict(x)
    }
}

impl Predictor for FittedLeafRegressor {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_point(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict(x))
    }
}

impl<P: Predictor + ?Sized + Send> Predictor for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn predict_point(&self, x: &[f64]) -> Result<f64> {
        (**self).predict_point(x)
    }
}

/// Wrap a closure as a predictor.
pub struct FnPredictor<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_point(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}
