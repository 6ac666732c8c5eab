//! Regression forests built from CART trees, centered (median) trees, and
//! grafted trees: a shallow CART whose leaves carry either a centered subtree
//! or a fitted nonparametric regressor.
//!
//! ```
//! use grafted_forest::{Algorithm, Dataset, ForestModel, GrowthConfig};
//!
//! let rows: Vec<Vec<f64>> = (0..200)
//!     .map(|i| vec![(i % 20) as f64 / 20.0, (i / 20) as f64 / 10.0])
//!     .collect();
//! let targets = rows.iter().map(|r| r[0] * r[1]).collect();
//! let data = Dataset::from_rows(&rows, targets)?;
//!
//! let config = GrowthConfig::new(Algorithm::Grafted).trees(20).q_n(5).alpha(4.0).seed(1);
//! let forest = ForestModel::fit(&data, &config)?;
//! let estimate = forest.predict(&[0.5, 0.5])?;
//! assert!((estimate - 0.25).abs() < 0.1);
//! # Ok::<(), grafted_forest::Error>(())
//! ```
//!
//! The `book/` directory next to this crate walks through the algorithms;
//! its code listings are compiled as doc-tests of this crate.

pub mod cart;
pub mod centered;
pub mod config;
pub mod data;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod forest;
pub mod grafting;
pub mod leaf;
pub mod resample;
pub mod rng;
pub mod tree;

#[cfg(doctest)]
mod book;

pub use config::{Algorithm, GrowthConfig, SampleSize};
pub use dataset::{Dataset, MinMaxScaler};
pub use error::{Error, Result};
pub use forest::{classify_value, ForestModel};
pub use leaf::{BandwidthRule, FittedLeafRegressor, LeafRegressorSpec};
pub use resample::{draw_resample, ResampleMode, ResamplePlan};
pub use tree::{Hyperrectangle, LeafPayload, SplitRecord, TreeModel, TreeNode};
