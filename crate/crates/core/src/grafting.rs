//! Grafted trees: a shallow CART whose leaves (at least `ceil(alpha * q_n)`
//! resampled points each) host either a centered scion or a fitted leaf
//! regressor.
//!
//! The CART phase reads the tree's CART stream and the scions read its
//! centered stream, exactly as standalone CART and centered trees do. Hence
//! `alpha = 1` reproduces CART with leaf size `q_n` and a root-only CART
//! phase reproduces a centered tree.

use std::collections::BTreeSet;

use crate::cart::{CartGrower, NodeSample, SplitScratch};
use crate::centered::{CenteredGrower, CenteredParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::leaf::LeafRegressorSpec;
use crate::resample::ResamplePlan;
use crate::rng::{stream_rng, Stream};
use crate::tree::{Hyperrectangle, Leaf, LeafPayload, Phase, TreeModel, TreeNode};

pub fn cart_phase_min_leaf(q_n: u64, alpha: f64) -> u64 {
    ((alpha * q_n as f64).ceil() as u64).max(1)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must be >= 1 (got {alpha})")))
    }
}

fn cart_phase(data: &Dataset, plan: &ResamplePlan, min_leaf: u64, mtry: usize, seed: u64) -> Result<TreeModel> {
    if mtry == 0 || mtry > data.p() {
        return Err(Error::Config(format!("mtry must lie in 1..={} (got {mtry})", data.p())));
    }
    let root = NodeSample::root(data, plan)?;
    let mut rng = stream_rng(seed, Stream::Cart);
    let mut grower = CartGrower {
        data,
        min_leaf,
        mtry,
        rng: &mut rng,
        scratch: SplitScratch::default(),
    };
    let node = grower.grow(root.into_samples());
    let (lower, upper) = data.bounding_box();
    Ok(TreeModel::new(Hyperrectangle::new(lower, upper)?, node))
}

/// Features split on by CART-phase splits.
pub fn cart_selected_features(tree: &TreeModel) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    tree.root.visit_splits(0, &mut |split, phase, _| {
        if phase == Phase::Cart {
            out.insert(split.feature);
        }
    });
    out
}

/// Replace every leaf, left to right.
fn graft(
    node: TreeNode,
    bounds: &Hyperrectangle,
    f: &mut dyn FnMut(Leaf, &Hyperrectangle) -> Result<Leaf>,
) -> Result<TreeNode> {
    match node {
        TreeNode::Split {
            split,
            phase,
            left,
            right,
        } => {
            let (lb, rb) = bounds.split(&split);
            let left = graft(*left, &lb, f)?;
            let right = graft(*right, &rb, f)?;
            Ok(TreeNode::split(split, phase, left, right))
        }
        TreeNode::Leaf(leaf) => Ok(TreeNode::Leaf(f(leaf, bounds)?)),
    }
}

fn restriction(tree: &TreeModel, restrict: bool) -> Option<Vec<usize>> {
    if !restrict {
        return None;
    }
    let selected = cart_selected_features(tree);
    (!selected.is_empty()).then(|| selected.into_iter().collect())
}

/// Centered scions grafted onto a CART phase with leaves of at least
/// `ceil(alpha * q_n)` points; scions stop at `q_n`.
pub fn grow_grafted(
    data: &Dataset,
    plan: &ResamplePlan,
    q_n: u64,
    alpha: f64,
    mtry: usize,
    restrict_features: bool,
    seed: u64,
) -> Result<TreeModel> {
    check_alpha(alpha)?;
    let tree = cart_phase(data, plan, cart_phase_min_leaf(q_n, alpha), mtry, seed)?;
    let params = CenteredParams {
        q_n,
        depth_cap: None,
        feature_whitelist: restriction(&tree, restrict_features),
    };
    let mut rng = stream_rng(seed, Stream::Centered);
    let mut scions = CenteredGrower::new(data, &params, &mut rng)?;
    let root = graft(tree.root, &tree.root_box, &mut |leaf, _| {
        let subtree = scions.grow(leaf.samples.clone(), 0);
        Ok(Leaf {
            payload: LeafPayload::Scion {
                subtree: Box::new(subtree),
            },
            samples: leaf.samples,
        })
    })?;
    Ok(TreeModel::new(tree.root_box, root))
}

/// Leaf regressors fitted on a CART phase with leaves of at least
/// `ceil(alpha * q_n)` points.
#[allow(clippy::too_many_arguments)]
pub fn grow_grafted_general(
    data: &Dataset,
    plan: &ResamplePlan,
    q_n: u64,
    alpha: f64,
    mtry: usize,
    spec: &LeafRegressorSpec,
    restrict_features: bool,
    seed: u64,
) -> Result<TreeModel> {
    check_alpha(alpha)?;
    spec.validate()?;
    let tree = cart_phase(data, plan, cart_phase_min_leaf(q_n, alpha), mtry, seed)?;
    let mask: Vec<bool> = match restriction(&tree, restrict_features) {
        Some(features) => (0..data.p()).map(|j| features.contains(&j)).collect(),
        None => vec![true; data.p()],
    };
    let dim = mask.iter().filter(|&&m| m).count();
    let root = graft(tree.root, &tree.root_box, &mut |leaf, _| {
        let mut points = Vec::new();
        let mut targets = Vec::new();
        for s in &leaf.samples {
            let row = data.row(s.index());
            for _ in 0..s.multiplicity() {
                points.extend(row.iter().zip(&mask).filter(|(_, &m)| m).map(|(&v, _)| v));
                targets.push(data.y(s.index()));
            }
        }
        let model = spec.fit(points, dim, targets)?;
        Ok(Leaf {
            payload: LeafPayload::Regressor {
                model,
                feature_mask: mask.clone(),
            },
            samples: leaf.samples,
        })
    })?;
    Ok(TreeModel::new(tree.root_box, root))
}
