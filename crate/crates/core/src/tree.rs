//! Tree data model: hyperrectangle partitions with split records and leaf
//! payloads.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::leaf::FittedLeafRegressor;

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperrectangle {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Hyperrectangle {
    pub fn unit(p: usize) -> Self {
        Hyperrectangle {
            lower: vec![0.0; p],
            upper: vec![1.0; p],
        }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::Input("box bounds must have equal length and lower <= upper".into()));
        }
        Ok(Hyperrectangle { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Side length along feature `j`.
    pub fn side_length(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.side_length(j)).product()
    }

    /// Children of a split; the left child keeps `x_j <= threshold`.
    pub fn split(&self, split: &SplitRecord) -> (Hyperrectangle, Hyperrectangle) {
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[split.feature] = split.threshold;
        right.lower[split.feature] = split.threshold;
        (left, right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub feature: usize,
    pub threshold: f64,
}

impl SplitRecord {
    /// Boundary points go left.
    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.feature] <= self.threshold
    }
}

/// Which algorithm committed a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Cart,
    Centered,
}

/// A training row in a leaf: `(row index, multiplicity)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRef(pub u32, pub u32);

impl SampleRef {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn multiplicity(self) -> u32 {
        self.1
    }
}

/// Total multiplicity of a sample set.
pub fn total_count(samples: &[SampleRef]) -> u64 {
    samples.iter().map(|s| u64::from(s.1)).sum()
}

/// Multiplicity-weighted mean of the targets, accumulated as a running mean
/// so that a constant sample reproduces its value exactly. Clamped to the
/// targets' range, which rounding could otherwise leave by an ulp.
pub fn weighted_mean(data: &Dataset, samples: &[SampleRef]) -> f64 {
    let mut count = 0.0;
    let mut mean = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in samples {
        let w = f64::from(s.1);
        let y = data.y(s.index());
        count += w;
        mean += w * (y - mean) / count;
        lo = lo.min(y);
        hi = hi.max(y);
    }
    if samples.is_empty() {
        mean
    } else {
        mean.clamp(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeafPayload {
    ConstantMean {
        value: f64,
    },
    /// A centered subtree grown on the leaf's box and samples.
    Scion {
        subtree: Box<TreeNode>,
    },
    /// A regressor fitted on the leaf's samples, restricted to `feature_mask`.
    Regressor {
        model: FittedLeafRegressor,
        feature_mask: Vec<bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub payload: LeafPayload,
    pub samples: Vec<SampleRef>,
}

impl Leaf {
    pub fn constant(data: &Dataset, samples: Vec<SampleRef>) -> Self {
        Leaf {
            payload: LeafPayload::ConstantMean {
                value: weighted_mean(data, &samples),
            },
            samples,
        }
    }

    pub fn count(&self) -> u64 {
        total_count(&self.samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        split: SplitRecord,
        phase: Phase,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf(Leaf),
}

impl TreeNode {
    pub fn split(split: SplitRecord, phase: Phase, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Split {
            split,
            phase,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf(_))
    }

    /// Leaves directly under this node, not descending into scions.
    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
                TreeNode::Leaf(leaf) => out.push(leaf),
            }
        }
        out
    }

    /// Visit every leaf with its box, descending into scions. The callback
    /// receives the final (innermost) leaves only.
    pub fn visit_final_leaves(&self, bounds: &Hyperrectangle, f: &mut dyn FnMut(&Leaf, &Hyperrectangle)) {
        match self {
            TreeNode::Split { split, left, right, .. } => {
                let (lb, rb) = bounds.split(split);
                left.visit_final_leaves(&lb, f);
                right.visit_final_leaves(&rb, f);
            }
            TreeNode::Leaf(leaf) => match &leaf.payload {
                LeafPayload::Scion { subtree } => subtree.visit_final_leaves(bounds, f),
                _ => f(leaf, bounds),
            },
        }
    }

    /// Visit every split with its phase and depth (scion splits included,
    /// depth continuing from the grafting point).
    pub fn visit_splits(&self, depth: usize, f: &mut dyn FnMut(&SplitRecord, Phase, usize)) {
        match self {
            TreeNode::Split {
                split,
                phase,
                left,
                right,
            } => {
                f(split, *phase, depth);
                left.visit_splits(depth + 1, f);
                right.visit_splits(depth + 1, f);
            }
            TreeNode::Leaf(leaf) => {
                if let LeafPayload::Scion { subtree } = &leaf.payload {
                    subtree.visit_splits(depth, f);
                }
            }
        }
    }

    /// Phase sequence of splits along every root-to-leaf path.
    pub fn phase_paths(&self) -> Vec<Vec<Phase>> {
        fn walk(node: &TreeNode, path: &mut Vec<Phase>, out: &mut Vec<Vec<Phase>>) {
            match node {
                TreeNode::Split { phase, left, right, .. } => {
                    path.push(*phase);
                    walk(left, path, out);
                    walk(right, path, out);
                    path.pop();
                }
                TreeNode::Leaf(leaf) => match &leaf.payload {
                    LeafPayload::Scion { subtree } => walk(subtree, path, out),
                    _ => out.push(path.clone()),
                },
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf(leaf) => match &leaf.payload {
                LeafPayload::Scion { subtree } => subtree.depth(),
                _ => 0,
            },
        }
    }
}

/// One grown tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub root_box: Hyperrectangle,
    pub root: TreeNode,
}

impl TreeModel {
    pub fn new(root_box: Hyperrectangle, root: TreeNode) -> Self {
        TreeModel { root_box, root }
    }

    pub fn dim(&self) -> usize {
        self.root_box.dim()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Input(format!(
                "query has {} features, tree expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// The innermost leaf containing `x`, and its box.
    pub fn locate(&self, x: &[f64]) -> Result<(&Leaf, Hyperrectangle)> {
        self.check_dim(x)?;
        let mut bounds = self.root_box.clone();
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Split { split, left, right, .. } => {
                    if split.goes_left(x) {
                        bounds.upper[split.feature] = split.threshold;
                        node = left;
                    } else {
                        bounds.lower[split.feature] = split.threshold;
                        node = right;
                    }
                }
                TreeNode::Leaf(leaf) => match &leaf.payload {
                    LeafPayload::Scion { subtree } => node = subtree,
                    _ => return Ok((leaf, bounds)),
                },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Split { split, left, right, .. } => {
                    node = if split.goes_left(x) { left } else { right };
                }
                TreeNode::Leaf(leaf) => match &leaf.payload {
                    LeafPayload::ConstantMean { value } => return Ok(*value),
                    LeafPayload::Scion { subtree } => node = subtree,
                    LeafPayload::Regressor { model, feature_mask } => {
                        return Ok(model.predict(&mask_point(x, feature_mask)));
                    }
                },
            }
        }
    }

    /// Add `scale * W_i(x)` for this tree into `weights`.
    pub fn accumulate_weights(&self, x: &[f64], scale: f64, weights: &mut [f64]) -> Result<()> {
        let (leaf, _) = self.locate(x)?;
        if let LeafPayload::Regressor { .. } = leaf.payload {
            return Err(Error::Unsupported(
                "regressor leaves have no local averaging form".into(),
            ));
        }
        let total = leaf.count();
        if total == 0 {
            return Err(Error::Invariant("leaf without resampled points".into()));
        }
        for s in &leaf.samples {
            let i = s.index();
            if i >= weights.len() {
                return Err(Error::Input(format!("leaf refers to row {i}, weights have {}", weights.len())));
            }
            weights[i] += scale * f64::from(s.1) / total as f64;
        }
        Ok(())
    }

    /// Boxes of the innermost leaves.
    pub fn leaf_boxes(&self) -> Vec<Hyperrectangle> {
        let mut out = Vec::new();
        self.root.visit_final_leaves(&self.root_box, &mut |_, b| out.push(b.clone()));
        out
    }

    /// Resampled counts of the innermost leaves.
    pub fn leaf_counts(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.root.visit_final_leaves(&self.root_box, &mut |l, _| out.push(l.count()));
        out
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_counts().len()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

/// Coordinates of `x` selected by `mask`.
pub fn mask_point(x: &[f64], mask: &[bool]) -> Vec<f64> {
    x.iter().zip(mask).filter(|(_, &keep)| keep).map(|(&v, _)| v).collect()
}
