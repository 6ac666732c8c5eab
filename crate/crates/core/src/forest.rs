use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::grow_cart;
use crate::centered::{grow_centered, CenteredParams};
use crate::config::{Algorithm, GrowthConfig};
use crate::dataset::{Dataset, MinMaxScaler};
use crate::error::{Error, Result};
use crate::grafting::{grow_grafted, grow_grafted_general};
use crate::resample::draw_resample_with;
use crate::rng::{child_seed, stream_rng, Stream};
use crate::tree::{LeafPayload, TreeModel, TreeNode};

/// Identifier written into every model file.
pub const MODEL_FORMAT: &str = "grafted-forest-model";
pub const MODEL_VERSION: u32 = 1;

/// Grow one tree of a forest from its derived seed.
pub fn grow_tree(data: &Dataset, config: &GrowthConfig, tree_seed: u64) -> Result<TreeModel> {
    let a_n = config.sample_size.resolve(data.n())?;
    let plan = draw_resample_with(data.n(), a_n, config.resample, &mut stream_rng(tree_seed, Stream::Resample))?;
    let mtry = config.resolved_mtry(data.p());
    match config.algorithm {
        Algorithm::Cart => grow_cart(data, &plan, config.q_n, mtry, None, tree_seed),
        Algorithm::Centered => {
            let params = CenteredParams {
                q_n: config.q_n,
                depth_cap: config.max_depth,
                feature_whitelist: None,
            };
            grow_centered(data, &plan, &params, tree_seed)
        }
        Algorithm::Grafted => grow_grafted(
            data,
            &plan,
            config.q_n,
            config.alpha,
            mtry,
            config.restrict_features,
            tree_seed,
        ),
        Algorithm::GraftedGeneral => grow_grafted_general(
            data,
            &plan,
            config.q_n,
            config.alpha,
            mtry,
            &config.leaf_regressor,
            config.restrict_features,
            tree_seed,
        ),
    }
}

/// An ensemble of `M` trees grown from one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    config: GrowthConfig,
    p: usize,
    n_train: usize,
    tree_seeds: Vec<u64>,
    trees: Vec<TreeModel>,
    /// Applied to queries before routing, when the forest was trained on
    /// rescaled features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaler: Option<MinMaxScaler>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_names: Option<Vec<String>>,
}

impl ForestModel {
    /// Grow `config.trees` trees in parallel on the current rayon pool.
    pub fn fit(data: &Dataset, config: &GrowthConfig) -> Result<Self> {
        config.validate(data.p())?;
        let tree_seeds: Vec<u64> = (0..config.trees as u64).map(|t| child_seed(config.seed, t)).collect();
        let trees = tree_seeds
            .par_iter()
            .map(|&seed| grow_tree(data, config, seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(ForestModel {
            config: config.clone(),
            p: data.p(),
            n_train: data.n(),
            tree_seeds,
            trees,
            scaler: None,
            feature_names: data.feature_names().map(<[String]>::to_vec),
        })
    }

    /// Min-max rescale the features onto the unit cube, then fit. The scaler
    /// is kept and applied to every query.
    pub fn fit_normalized(data: &Dataset, config: &GrowthConfig) -> Result<Self> {
        let scaler = MinMaxScaler::fit(data);
        let mut forest = Self::fit(&scaler.transform(data)?, config)?;
        forest.scaler = Some(scaler);
        Ok(forest)
    }

    pub fn config(&self) -> &GrowthConfig {
        &self.config
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn tree_seeds(&self) -> &[u64] {
        &self.tree_seeds
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn scaler(&self) -> Option<&MinMaxScaler> {
        self.scaler.as_ref()
    }

    /// Column names of the training data, when it had a header.
    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    fn prepare<'a>(&self, x: &'a [f64]) -> Result<std::borrow::Cow<'a, [f64]>> {
        if x.len() != self.p {
            return Err(Error::Input(format!(
                "query has {} features, forest expects {}",
                x.len(),
                self.p
            )));
        }
        Ok(match &self.scaler {
            Some(s) => std::borrow::Cow::Owned(s.transform_point(x)),
            None => std::borrow::Cow::Borrowed(x),
        })
    }

    /// Mean of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let x = self.prepare(x)?;
        let mut sum = 0.0;
        for tree in &self.trees {
            sum += tree.predict(&x)?;
        }
        Ok(sum / self.trees.len() as f64)
    }

    /// Predictions for every row of `data` (targets ignored).
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        let rows: Vec<&[f64]> = data.rows().collect();
        rows.par_iter().map(|r| self.predict(r)).collect()
    }

    /// `1` iff the prediction exceeds one half.
    pub fn classify(&self, x: &[f64]) -> Result<u8> {
        Ok(classify_value(self.predict(x)?))
    }

    /// Local averaging weights `W_i(x)` over the training rows, averaged over
    /// trees. Scion leaves are averaged through; regressor leaves have no such
    /// form.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = self.prepare(x)?;
        let mut w = vec![0.0; self.n_train];
        let scale = 1.0 / self.trees.len() as f64;
        for tree in &self.trees {
            tree.accumulate_weights(&x, scale, &mut w)?;
        }
        Ok(w)
    }

    /// Whether any tree carries fitted regressors on its leaves.
    pub fn has_regressor_leaves(&self) -> bool {
        self.trees.iter().any(|t| {
            t.root
                .leaves()
                .iter()
                .any(|l| matches!(l.payload, LeafPayload::Regressor { .. }))
        })
    }

    /// Leaves whose regressor fell back to a constant mean.
    pub fn fallback_leaves(&self) -> usize {
        self.trees
            .iter()
            .flat_map(|t| t.root.leaves())
            .filter(|l| matches!(&l.payload, LeafPayload::Regressor { model, .. } if model.fell_back()))
            .count()
    }

    /// Mean resampled count over all innermost leaves.
    pub fn mean_leaf_size(&self) -> f64 {
        let counts: Vec<u64> = self.trees.iter().flat_map(|t| t.leaf_counts()).collect();
        counts.iter().sum::<u64>() as f64 / counts.len().max(1) as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFileRef {
            format: MODEL_FORMAT,
            version: MODEL_VERSION,
            model: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        ModelFile::into_model(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(
            out,
            &ModelFileRef {
                format: MODEL_FORMAT,
                version: MODEL_VERSION,
                model: self,
            },
        )?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        ModelFile::into_model(serde_json::from_reader(reader)?)
    }

    /// Check the structural invariants of every tree against the training
    /// data: children tile their parent and constant leaves hold the mean of
    /// their samples.
    pub fn audit(&self, data: &Dataset) -> Result<()> {
        for tree in &self.trees {
            audit_node(&tree.root, data)?;
        }
        Ok(())
    }
}

fn audit_node(node: &TreeNode, data: &Dataset) -> Result<()> {
    match node {
        TreeNode::Split { left, right, .. } => {
            audit_node(left, data)?;
            audit_node(right, data)
        }
        TreeNode::Leaf(leaf) => {
            if leaf.count() == 0 {
                return Err(Error::Invariant("empty leaf".into()));
            }
            match &leaf.payload {
                LeafPayload::ConstantMean { value } => {
                    let mean = crate::tree::weighted_mean(data, &leaf.samples);
                    if (mean - value).abs() > 1e-12 * (1.0 + mean.abs()) {
                        return Err(Error::Invariant(format!("leaf value {value} differs from sample mean {mean}")));
                    }
                    Ok(())
                }
                LeafPayload::Scion { subtree } => audit_node(subtree, data),
                LeafPayload::Regressor { .. } => Ok(()),
            }
        }
    }
}

/// The half-threshold classifier; ties go to class 0.
pub fn classify_value(prediction: f64) -> u8 {
    u8::from(prediction > 0.5)
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a ForestModel,
}

#[derive(Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: ForestModel,
}

impl ModelFile {
    fn into_model(self) -> Result<ForestModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Input(format!("not a model file (format `{}`)", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Input(format!(
                "model format version {} is not supported (expected {MODEL_VERSION})",
                self.version
            )));
        }
        Ok(self.model)
    }
}
