//! Centered (median) trees: a feature drawn uniformly at random, split at the
//! node's sample median.

use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::resample::ResamplePlan;
use crate::rng::{stream_rng, Stream};
use crate::tree::{total_count, Hyperrectangle, Leaf, Phase, SampleRef, SplitRecord, TreeModel, TreeNode};

/// Median of a multiset; the mean of the two central order statistics for
/// even counts. `None` when every value is the same (nothing to split).
pub fn sample_median(values: &[f64]) -> Option<f64> {
    let mut pairs: Vec<(f64, u32)> = values.iter().map(|&v| (v, 1)).collect();
    weighted_median(&mut pairs)
}

/// Median of `(value, multiplicity)` pairs, expanding multiplicities.
/// Sorts `pairs` in place.
pub fn weighted_median(pairs: &mut [(f64, u32)]) -> Option<f64> {
    let total: u64 = pairs.iter().map(|&(_, w)| u64::from(w)).sum();
    if total == 0 {
        return None;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pairs[0].0 == pairs[pairs.len() - 1].0 {
        return None;
    }
    let lo_rank = (total - 1) / 2;
    let hi_rank = total / 2;
    let (mut lo, mut hi) = (None, None);
    let mut seen = 0u64;
    for &(v, w) in pairs.iter() {
        seen += u64::from(w);
        if lo.is_none() && seen > lo_rank {
            lo = Some(v);
        }
        if seen > hi_rank {
            hi = Some(v);
            break;
        }
    }
    let (lo, hi) = (lo?, hi?);
    Some(lo + (hi - lo) / 2.0)
}

/// Depth at which centered trees attain their best known rate:
/// `floor((ln n + c1) / (ln 2 - ln(1 - 3/(4p))))`, clamped at 0.
pub fn recommended_depth(p: usize, n: usize, c1: f64) -> u32 {
    let p = p.max(1) as f64;
    let denom = std::f64::consts::LN_2 - (1.0 - 3.0 / (4.0 * p)).ln();
    let depth = ((n.max(1) as f64).ln() + c1) / denom;
    if depth.is_finite() && depth > 0.0 {
        depth.floor() as u32
    } else {
        0
    }
}

/// Stopping and feature parameters of a centered tree.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredParams {
    /// Both children of a committed split keep at least this many points.
    pub q_n: u64,
    /// Maximum depth below the root of this (sub)tree.
    pub depth_cap: Option<u32>,
    /// Features eligible for splitting; all features when `None`.
    pub feature_whitelist: Option<Vec<usize>>,
}

impl CenteredParams {
    pub fn new(q_n: u64) -> Self {
        CenteredParams {
            q_n,
            depth_cap: None,
            feature_whitelist: None,
        }
    }
}

pub(crate) struct CenteredGrower<'a, R> {
    pub data: &'a Dataset,
    pub q_n: u64,
    pub depth_cap: Option<u32>,
    pub whitelist: Vec<usize>,
    pub rng: &'a mut R,
    pub buf: Vec<(f64, u32)>,
}

impl<'a, R: Rng> CenteredGrower<'a, R> {
    pub fn new(data: &'a Dataset, params: &CenteredParams, rng: &'a mut R) -> Result<Self> {
        let whitelist = match &params.feature_whitelist {
            Some(w) => {
                if w.is_empty() {
                    return Err(Error::Config("centered tree needs a non-empty feature whitelist".into()));
                }
                if let Some(&j) = w.iter().find(|&&j| j >= data.p()) {
                    return Err(Error::Config(format!("whitelisted feature {j} out of range")));
                }
                w.clone()
            }
            None => (0..data.p()).collect(),
        };
        Ok(CenteredGrower {
            data,
            q_n: params.q_n.max(1),
            depth_cap: params.depth_cap,
            whitelist,
            rng,
            buf: Vec::new(),
        })
    }

    fn is_pure(&self, samples: &[SampleRef]) -> bool {
        let first = self.data.y(samples[0].index());
        samples.iter().all(|s| self.data.y(s.index()) == first)
    }

    pub fn grow(&mut self, samples: Vec<SampleRef>, depth: u32) -> TreeNode {
        let count = total_count(&samples);
        let capped = self.depth_cap.is_some_and(|cap| depth >= cap);
        if capped || count < 2 * self.q_n || samples.len() < 2 || self.is_pure(&samples) {
            return TreeNode::Leaf(Leaf::constant(self.data, samples));
        }
        let j = self.whitelist[self.rng.random_range(0..self.whitelist.len())];
        self.buf.clear();
        self.buf.extend(samples.iter().map(|s| (self.data.x(s.index(), j), s.1)));
        let Some(median) = weighted_median(&mut self.buf) else {
            return TreeNode::Leaf(Leaf::constant(self.data, samples));
        };
        let split = SplitRecord {
            feature: j,
            threshold: median,
        };
        let (left, right): (Vec<_>, Vec<_>) = samples
            .iter()
            .partition(|s| self.data.x(s.index(), j) <= median);
        if total_count(&left) < self.q_n || total_count(&right) < self.q_n {
            return TreeNode::Leaf(Leaf::constant(self.data, samples));
        }
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        TreeNode::split(split, Phase::Centered, left, right)
    }
}

/// Grow a centered tree on the resample `plan` over the data's root box.
pub fn grow_centered(data: &Dataset, plan: &ResamplePlan, params: &CenteredParams, seed: u64) -> Result<TreeModel> {
    if plan.n() != data.n() {
        return Err(Error::Input(format!(
            "resample plan covers {} rows, dataset has {}",
            plan.n(),
            data.n()
        )));
    }
    let (lower, upper) = data.bounding_box();
    let samples = plan.drawn().map(|(i, s)| SampleRef(i as u32, s)).collect();
    grow_centered_at(data, Hyperrectangle::new(lower, upper)?, samples, params, seed)
}

/// Grow a centered tree on an explicit box and sample set, as done for
/// scions.
pub fn grow_centered_at(
    data: &Dataset,
    root_box: Hyperrectangle,
    samples: Vec<SampleRef>,
    params: &CenteredParams,
    seed: u64,
) -> Result<TreeModel> {
    if root_box.dim() != data.p() {
        return Err(Error::Input("root box dimension differs from the data".into()));
    }
    if samples.is_empty() {
        return Err(Error::Input("centered tree needs at least one sample".into()));
    }
    let mut rng = stream_rng(seed, Stream::Centered);
    let mut grower = CenteredGrower::new(data, params, &mut rng)?;
    let root = grower.grow(samples, 0);
    Ok(TreeModel::new(root_box, root))
}
