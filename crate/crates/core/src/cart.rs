//! CART growth: impurity-gain maximization over midpoint thresholds with
//! `mtry` feature subsampling and a minimum child size.
//!
//! Gains are evaluated in the product form
//! `N_L N_R / N^2 * (mean_L - mean_R)^2`, which equals the decrease in
//! within-node variance. [`variance_decrease_gain`] computes the latter
//! directly and is kept as a cross-check.

use rand::seq::index;
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::resample::ResamplePlan;
use crate::rng::{stream_rng, Stream};
use crate::tree::{total_count, weighted_mean, Hyperrectangle, Leaf, Phase, SampleRef, SplitRecord, TreeModel, TreeNode};

/// Gains within this relative distance of the incumbent count as ties, and
/// ties keep the earlier candidate (lower feature, then lower threshold).
pub const TIE_TOLERANCE: f64 = 1e-12;

/// The resampled points falling into one node.
#[derive(Debug, Clone)]
pub struct NodeSample<'a> {
    data: &'a Dataset,
    samples: Vec<SampleRef>,
    count: u64,
    mean: f64,
}

impl<'a> NodeSample<'a> {
    pub fn new(data: &'a Dataset, samples: Vec<SampleRef>) -> Result<Self> {
        let count = total_count(&samples);
        if count == 0 {
            return Err(Error::Input("node sample is empty".into()));
        }
        if let Some(s) = samples.iter().find(|s| s.index() >= data.n()) {
            return Err(Error::Input(format!("sample row {} out of range", s.index())));
        }
        let mean = weighted_mean(data, &samples);
        Ok(NodeSample {
            data,
            samples,
            count,
            mean,
        })
    }

    /// Every drawn row of `plan`.
    pub fn root(data: &'a Dataset, plan: &ResamplePlan) -> Result<Self> {
        if plan.n() != data.n() {
            return Err(Error::Input(format!(
                "resample plan covers {} rows, dataset has {}",
                plan.n(),
                data.n()
            )));
        }
        Self::new(data, plan.drawn().map(|(i, s)| SampleRef(i as u32, s)).collect())
    }

    pub fn samples(&self) -> &[SampleRef] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<SampleRef> {
        self.samples
    }

    /// `N(A)`, counting multiplicity.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    /// All targets equal.
    pub fn is_pure(&self) -> bool {
        let first = self.data.y(self.samples[0].index());
        self.samples.iter().all(|s| self.data.y(s.index()) == first)
    }

    fn sorted_along(&self, j: usize, buf: &mut Vec<Entry>) {
        buf.clear();
        buf.extend(self.samples.iter().map(|s| Entry {
            x: self.data.x(s.index(), j),
            y: self.data.y(s.index()),
            w: f64::from(s.1),
        }));
        buf.sort_by(|a, b| a.x.total_cmp(&b.x));
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    x: f64,
    y: f64,
    w: f64,
}

/// A scored candidate split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEvaluation {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left_count: u64,
    pub right_count: u64,
    pub left_mean: f64,
    pub right_mean: f64,
}

impl GainEvaluation {
    pub fn split(&self) -> SplitRecord {
        SplitRecord {
            feature: self.feature,
            threshold: self.threshold,
        }
    }
}

/// A threshold strictly between two consecutive distinct values. Falls back
/// to `lo` when the midpoint rounds up to `hi`, which keeps `lo` on the left.
#[inline]
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

#[inline]
fn product_gain(nl: f64, nr: f64, ml: f64, mr: f64) -> f64 {
    let n = nl + nr;
    nl * nr / (n * n) * (ml - mr) * (ml - mr)
}

#[inline]
fn improves(gain: f64, best: f64) -> bool {
    gain > best + best.abs() * TIE_TOLERANCE
}

/// Midpoints between consecutive distinct values of feature `j` in the node.
pub fn candidate_thresholds(node: &NodeSample<'_>, j: usize) -> Vec<f64> {
    let mut values: Vec<f64> = node.samples.iter().map(|s| node.data.x(s.index(), j)).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values.windows(2).map(|w| midpoint(w[0], w[1])).collect()
}

fn side_stats(node: &NodeSample<'_>, j: usize, z: f64) -> Result<[(f64, f64); 2]> {
    // (count, running mean) for left and right
    let mut sides = [(0.0, 0.0); 2];
    for s in &node.samples {
        let side = usize::from(node.data.x(s.index(), j) > z);
        let w = f64::from(s.1);
        let (c, m) = &mut sides[side];
        *c += w;
        *m += w * (node.data.y(s.index()) - *m) / *c;
    }
    if sides[0].0 == 0.0 || sides[1].0 == 0.0 {
        return Err(Error::InvalidSplit(format!(
            "threshold {z} on feature {j} leaves a child empty"
        )));
    }
    Ok(sides)
}

/// Impurity gain of splitting the node at `x_j <= z`, product form.
pub fn impurity_gain(node: &NodeSample<'_>, j: usize, z: f64) -> Result<GainEvaluation> {
    let [(nl, ml), (nr, mr)] = side_stats(node, j, z)?;
    Ok(GainEvaluation {
        feature: j,
        threshold: z,
        gain: product_gain(nl, nr, ml, mr),
        left_count: nl as u64,
        right_count: nr as u64,
        left_mean: ml,
        right_mean: mr,
    })
}

/// Impurity gain as node variance minus the count-weighted child variances.
pub fn variance_decrease_gain(node: &NodeSample<'_>, j: usize, z: f64) -> Result<f64> {
    let [(nl, ml), (nr, mr)] = side_stats(node, j, z)?;
    let n = node.count as f64;
    let mut sse = 0.0;
    let mut sse_left = 0.0;
    let mut sse_right = 0.0;
    for s in &node.samples {
        let (x, y, w) = (node.data.x(s.index(), j), node.data.y(s.index()), f64::from(s.1));
        sse += w * (y - node.mean) * (y - node.mean);
        if x <= z {
            sse_left += w * (y - ml) * (y - ml);
        } else {
            sse_right += w * (y - mr) * (y - mr);
        }
    }
    Ok(sse / n - (nl / n) * (sse_left / nl) - (nr / n) * (sse_right / nr))
}

/// Reusable buffers for the sorted sweep.
#[derive(Debug, Default)]
pub struct SplitScratch {
    entries: Vec<Entry>,
    suffix: Vec<(f64, f64)>,
}

/// Best split of the node over `features`, requiring both children to hold
/// at least `min_child` resampled points. `None` when no candidate is legal.
pub fn best_split(node: &NodeSample<'_>, features: &[usize], min_child: u64) -> Option<GainEvaluation> {
    best_split_with(node, features, min_child, &mut SplitScratch::default())
}

pub fn best_split_with(
    node: &NodeSample<'_>,
    features: &[usize],
    min_child: u64,
    scratch: &mut SplitScratch,
) -> Option<GainEvaluation> {
    let min_child = min_child.max(1) as f64;
    let mut sorted_features = features.to_vec();
    sorted_features.sort_unstable();
    sorted_features.dedup();

    let mut best: Option<GainEvaluation> = None;
    for &j in &sorted_features {
        node.sorted_along(j, &mut scratch.entries);
        let entries = &scratch.entries;
        let len = entries.len();
        if len < 2 || entries[0].x == entries[len - 1].x {
            continue;
        }

        scratch.suffix.clear();
        scratch.suffix.resize(len + 1, (0.0, 0.0));
        for k in (0..len).rev() {
            let (mut c, mut m) = scratch.suffix[k + 1];
            let e = entries[k];
            c += e.w;
            m += e.w * (e.y - m) / c;
            scratch.suffix[k] = (c, m);
        }

        let (mut nl, mut ml) = (0.0, 0.0);
        for k in 0..len - 1 {
            let e = entries[k];
            nl += e.w;
            ml += e.w * (e.y - ml) / nl;
            let next = entries[k + 1].x;
            if e.x == next {
                continue;
            }
            let (nr, mr) = scratch.suffix[k + 1];
            if nl < min_child {
                continue;
            }
            if nr < min_child {
                break;
            }
            let gain = product_gain(nl, nr, ml, mr);
            if best.is_none_or(|b| improves(gain, b.gain)) {
                best = Some(GainEvaluation {
                    feature: j,
                    threshold: midpoint(e.x, next),
                    gain,
                    left_count: nl as u64,
                    right_count: nr as u64,
                    left_mean: ml,
                    right_mean: mr,
                });
            }
        }
    }
    best
}

/// Split a sample set by a split record, preserving order.
pub fn partition(data: &Dataset, samples: Vec<SampleRef>, split: &SplitRecord) -> (Vec<SampleRef>, Vec<SampleRef>) {
    samples
        .into_iter()
        .partition(|s| data.x(s.index(), split.feature) <= split.threshold)
}

/// Draw `mtry` distinct features, sorted; all features when `mtry >= p`.
pub fn draw_features<R: Rng + ?Sized>(rng: &mut R, p: usize, mtry: usize) -> Vec<usize> {
    if mtry >= p {
        return (0..p).collect();
    }
    let mut features = index::sample(rng, p, mtry).into_vec();
    features.sort_unstable();
    features
}

/// Recursive CART growth on a node's samples.
pub(crate) struct CartGrower<'a, R> {
    pub data: &'a Dataset,
    pub min_leaf: u64,
    pub mtry: usize,
    pub rng: &'a mut R,
    pub scratch: SplitScratch,
}

impl<R: Rng> CartGrower<'_, R> {
    pub fn grow(&mut self, samples: Vec<SampleRef>) -> TreeNode {
        let count = total_count(&samples);
        let node = match NodeSample::new(self.data, samples) {
            Ok(node) => node,
            Err(_) => return TreeNode::Leaf(Leaf::constant(self.data, Vec::new())),
        };
        if count < 2 * self.min_leaf || node.samples.len() < 2 || node.is_pure() {
            return TreeNode::Leaf(Leaf::constant(self.data, node.into_samples()));
        }
        let features = draw_features(self.rng, self.data.p(), self.mtry);
        let Some(best) = best_split_with(&node, &features, self.min_leaf, &mut self.scratch) else {
            return TreeNode::Leaf(Leaf::constant(self.data, node.into_samples()));
        };
        let split = best.split();
        let (left, right) = partition(self.data, node.into_samples(), &split);
        let left = self.grow(left);
        let right = self.grow(right);
        TreeNode::split(split, Phase::Cart, left, right)
    }
}

/// Grow a CART tree on the resample `plan`.
///
/// A split is committed only when both children keep at least `q_n`
/// resampled points (or `min_leaf_override`, when given). Pure nodes and
/// nodes with a single distinct row become leaves.
pub fn grow_cart(
    data: &Dataset,
    plan: &ResamplePlan,
    q_n: u64,
    mtry: usize,
    min_leaf_override: Option<u64>,
    seed: u64,
) -> Result<TreeModel> {
    if mtry == 0 || mtry > data.p() {
        return Err(Error::Config(format!("mtry must lie in 1..={} (got {mtry})", data.p())));
    }
    let root = NodeSample::root(data, plan)?;
    let mut rng = stream_rng(seed, Stream::Cart);
    let mut grower = CartGrower {
        data,
        min_leaf: min_leaf_override.unwrap_or(q_n).max(1),
        mtry,
        rng: &mut rng,
        scratch: SplitScratch::default(),
    };
    let node = grower.grow(root.into_samples());
    let (lower, upper) = data.bounding_box();
    Ok(TreeModel::new(Hyperrectangle::new(lower, upper)?, node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resample::ResampleMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn node_1d<'a>(data: &'a Dataset) -> NodeSample<'a> {
        NodeSample::root(data, &ResamplePlan::full(data.n())).unwrap()
    }

    fn line(xs: &[f64], ys: &[f64]) -> Dataset {
        Dataset::new(1, xs.to_vec(), ys.to_vec()).unwrap()
    }

    #[test]
    fn candidates_are_midpoints_of_distinct_values() {
        let d = line(&[0.8, 0.2, 0.4], &[0.0; 3]);
        let c = candidate_thresholds(&node_1d(&d), 0);
        assert_eq!(c.len(), 2);
        assert!((c[0] - 0.3).abs() < 1e-15 && (c[1] - 0.6).abs() < 1e-15);
        let d = line(&[0.5, 0.5], &[0.0, 1.0]);
        assert!(candidate_thresholds(&node_1d(&d), 0).is_empty());
    }

    #[test]
    fn candidates_on_uniform_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..20).map(|_| (rng.random::<f64>() * 8.0).floor() / 8.0).collect();
        let d = line(&xs, &[0.0; 20]);
        let c = candidate_thresholds(&node_1d(&d), 0);
        let mut distinct = xs.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        assert_eq!(c.len(), distinct.len() - 1);
        let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
        assert!(c.iter().all(|&z| lo < z && z < hi));
    }

    #[test]
    fn step_gain_by_hand() {
        let d = line(&[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]);
        let g = impurity_gain(&node_1d(&d), 0, 0.5).unwrap();
        assert!((g.gain - 0.25).abs() < 1e-15);
        assert_eq!((g.left_count, g.right_count), (2, 2));
        assert!((variance_decrease_gain(&node_1d(&d), 0, 0.5).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_targets_have_zero_gain() {
        let d = line(&[0.1, 0.3, 0.6, 0.9], &[2.5; 4]);
        let node = node_1d(&d);
        for z in candidate_thresholds(&node, 0) {
            assert_eq!(impurity_gain(&node, 0, z).unwrap().gain, 0.0);
        }
    }

    #[test]
    fn empty_child_is_invalid() {
        let d = line(&[0.1, 0.3], &[0.0, 1.0]);
        assert!(matches!(impurity_gain(&node_1d(&d), 0, 0.95), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn picks_the_separating_feature_and_breaks_ties_low() {
        let rows = [vec![0.3, 0.1, 0.5], vec![0.3, 0.2, 0.5], vec![0.3, 0.8, 0.5], vec![0.3, 0.9, 0.5]];
        let d = Dataset::from_rows(&rows, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let best = best_split(&node_1d(&d), &[0, 1, 2], 1).unwrap();
        assert_eq!(best.feature, 1);
        assert!((best.threshold - 0.5).abs() < 1e-15);

        // features 0 and 1 identical: lower index wins
        let rows = [vec![0.1, 0.1], vec![0.2, 0.2], vec![0.8, 0.8], vec![0.9, 0.9]];
        let d = Dataset::from_rows(&rows, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(best_split(&node_1d(&d), &[1, 0], 1).unwrap().feature, 0);
    }

    #[test]
    fn min_child_excludes_end_cuts() {
        let d = line(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], &[5.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let free = best_split(&node_1d(&d), &[0], 1).unwrap();
        assert_eq!(free.left_count, 1);
        let constrained = best_split(&node_1d(&d), &[0], 2).unwrap();
        assert!(constrained.left_count >= 2 && constrained.right_count >= 2);
        assert!(best_split(&node_1d(&d), &[0], 4).is_none());
    }

    #[test]
    fn large_leaf_size_gives_root_only_tree() {
        let d = line(&[0.1, 0.4, 0.6, 0.9], &[1.0, 2.0, 3.0, 6.0]);
        let plan = ResamplePlan::full(4);
        let tree = grow_cart(&d, &plan, 4, 1, None, 0).unwrap();
        assert!(tree.root.is_leaf());
        assert_eq!(tree.predict(&[0.3]).unwrap(), 3.0);
    }

    #[test]
    fn separable_step_gives_one_split_at_the_midpoint() {
        let d = line(&[0.1, 0.2, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]);
        let tree = grow_cart(&d, &ResamplePlan::full(4), 1, 1, None, 0).unwrap();
        match &tree.root {
            TreeNode::Split { split, left, right, .. } => {
                assert!((split.threshold - 0.5).abs() < 1e-15);
                assert!(left.is_leaf() && right.is_leaf());
            }
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn leaves_respect_minimum_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random(), rng.random()]).collect();
        let ys: Vec<f64> = rows.iter().map(|r| (10.0 * r[0]).sin() + rng.random::<f64>()).collect();
        let d = Dataset::from_rows(&rows, ys).unwrap();
        for (mode, q) in [(ResampleMode::WithReplacement, 3), (ResampleMode::WithoutReplacement, 7)] {
            let plan = crate::resample::draw_resample(300, 250, mode, 4).unwrap();
            let tree = grow_cart(&d, &plan, q, 2, None, 9).unwrap();
            assert!(tree.n_leaves() > 5);
            assert!(tree.leaf_counts().iter().all(|&c| c >= q));
        }
    }
}
