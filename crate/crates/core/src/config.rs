use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaf::LeafRegressorSpec;
use crate::resample::ResampleMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Breiman CART trees.
    Cart,
    /// Median-split trees on a uniformly drawn feature.
    Centered,
    /// Shallow CART with centered scions on its leaves.
    Grafted,
    /// Shallow CART with a fitted regressor on each leaf.
    GraftedGeneral,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Cart,
        Algorithm::Centered,
        Algorithm::Grafted,
        Algorithm::GraftedGeneral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cart => "cart",
            Algorithm::Centered => "centered",
            Algorithm::Grafted => "grafted",
            Algorithm::GraftedGeneral => "grafted_general",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| Error::Lookup {
                kind: "algorithm",
                name: name.to_string(),
            })
    }

    /// Whether the algorithm has a CART phase with an `alpha * q_n` leaf size.
    pub fn is_grafted(self) -> bool {
        matches!(self, Algorithm::Grafted | Algorithm::GraftedGeneral)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-tree resample size `a_n` as a function of the training size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SampleSize {
    /// `a_n = n`.
    All,
    Fixed { size: usize },
    /// `a_n = ceil(n / divisor)`.
    Divided { divisor: f64 },
}

impl SampleSize {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let a_n = match *self {
            SampleSize::All => n,
            SampleSize::Fixed { size } => size,
            SampleSize::Divided { divisor } => {
                if !(divisor >= 1.0) {
                    return Err(Error::Config(format!("sample-size divisor must be >= 1 (got {divisor})")));
                }
                (n as f64 / divisor).ceil() as usize
            }
        };
        if a_n == 0 {
            return Err(Error::Config("resample size a_n must be positive".into()));
        }
        Ok(a_n)
    }
}

/// Everything that determines how a forest is grown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    pub algorithm: Algorithm,
    /// Number of trees `M`.
    pub trees: usize,
    pub sample_size: SampleSize,
    pub resample: ResampleMode,
    /// Minimum number of resampled points in a child.
    pub q_n: u64,
    /// Leaf-size inflation of the CART phase in grafted trees.
    pub alpha: f64,
    /// Candidate features per CART split; all features when unset.
    pub mtry: Option<usize>,
    /// Depth cap for centered trees.
    pub max_depth: Option<u32>,
    pub seed: u64,
    pub leaf_regressor: LeafRegressorSpec,
    /// Restrict scions and leaf regressors to the features the tree's CART
    /// phase split on.
    pub restrict_features: bool,
}

impl GrowthConfig {
    /// Defaults: bootstrap over all rows for CART, subsamples of
    /// `ceil(n / 1.3)` without replacement otherwise; 100 trees, `q_n = 1`,
    /// `alpha = 1`.
    pub fn new(algorithm: Algorithm) -> Self {
        let (sample_size, resample) = match algorithm {
            Algorithm::Cart => (SampleSize::All, ResampleMode::WithReplacement),
            _ => (SampleSize::Divided { divisor: 1.3 }, ResampleMode::WithoutReplacement),
        };
        GrowthConfig {
            algorithm,
            trees: 100,
            sample_size,
            resample,
            q_n: 1,
            alpha: 1.0,
            mtry: None,
            max_depth: None,
            seed: 0,
            leaf_regressor: LeafRegressorSpec::Constant,
            restrict_features: false,
        }
    }

    pub fn trees(mut self, trees: usize) -> Self {
        self.trees = trees;
        self
    }

    pub fn q_n(mut self, q_n: u64) -> Self {
        self.q_n = q_n;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn mtry(mut self, mtry: usize) -> Self {
        self.mtry = Some(mtry);
        self
    }

    pub fn sample_size(mut self, sample_size: SampleSize) -> Self {
        self.sample_size = sample_size;
        self
    }

    pub fn resample(mut self, mode: ResampleMode) -> Self {
        self.resample = mode;
        self
    }

    pub fn max_depth(mut self, depth: u32) -> Self {
        self.max_depth = Some(depth);
        self
    }

    pub fn leaf_regressor(mut self, spec: LeafRegressorSpec) -> Self {
        self.leaf_regressor = spec;
        self
    }

    pub fn restrict_features(mut self, restrict: bool) -> Self {
        self.restrict_features = restrict;
        self
    }

    /// `ceil(alpha * q_n)`, the CART-phase minimum leaf size.
    pub fn cart_phase_min_leaf(&self) -> u64 {
        crate::grafting::cart_phase_min_leaf(self.q_n, self.alpha)
    }

    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry.unwrap_or(p)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::Config("a forest needs at least one tree".into()));
        }
        if self.q_n == 0 {
            return Err(Error::Config("q_n must be at least 1".into()));
        }
        if !(self.alpha >= 1.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be >= 1 (got {})", self.alpha)));
        }
        let mtry = self.resolved_mtry(p);
        if mtry == 0 || mtry > p {
            return Err(Error::Config(format!("mtry must lie in 1..={p} (got {mtry})")));
        }
        if self.algorithm == Algorithm::GraftedGeneral {
            self.leaf_regressor.validate()?;
        }
        Ok(())
    }
}
