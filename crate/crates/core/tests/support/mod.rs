//! Invariant checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use grafted_forest::centered::{grow_centered, CenteredParams};
use grafted_forest::eval::{fold_errors, fold_training_set, test_error, CvPlan, Learner};
use grafted_forest::resample::ResamplePlan;
use grafted_forest::tree::{SampleRef, TreeNode};
use grafted_forest::{Algorithm, Dataset, ForestModel, GrowthConfig, ResampleMode, SampleSize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform features (optionally on a coarse lattice, to force ties) and a
/// noisy smooth target.
pub fn random_data(seed: u64, n: usize, p: usize, coarse: bool) -> Dataset {
    let mut r = rng(seed);
    let features: Vec<f64> = (0..n * p)
        .map(|_| {
            let v: f64 = r.random();
            if coarse {
                (v * 5.0).floor() / 5.0
            } else {
                v
            }
        })
        .collect();
    let targets = features.chunks(p).map(|x| x[0] * 2.0 - x[p - 1] + r.random::<f64>()).collect();
    Dataset::new(p, features, targets).unwrap()
}

pub fn probes(seed: u64, count: usize, p: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..count).map(|_| (0..p).map(|_| r.random()).collect()).collect()
}

/// A small random configuration of one of the constant-leaf algorithms.
pub fn random_config(seed: u64) -> GrowthConfig {
    let mut r = rng(seed);
    let algorithm = [Algorithm::Cart, Algorithm::Centered, Algorithm::Grafted][r.random_range(0..3)];
    let (size, mode) = if r.random_bool(0.5) {
        (SampleSize::All, ResampleMode::WithReplacement)
    } else {
        (SampleSize::Divided { divisor: 1.3 }, ResampleMode::WithoutReplacement)
    };
    GrowthConfig::new(algorithm)
        .trees(r.random_range(1..5))
        .q_n(r.random_range(1..6))
        .alpha([1.0, 2.0, 3.5, 8.0][r.random_range(0..4)])
        .sample_size(size)
        .resample(mode)
        .seed(r.random())
}

/// Every probe lies in exactly one leaf box and the boxes' volumes add up to
/// the root box.
pub fn check_partition(forest: &ForestModel, probe_seed: u64) -> Check {
    for tree in forest.trees() {
        let boxes = tree.leaf_boxes();
        let root = tree.root_box.volume();
        if root > 0.0 {
            let total: f64 = boxes.iter().map(|b| b.volume()).sum();
            ensure!((total - root).abs() <= 1e-9 * root, "leaf volumes {total} vs root {root}");
        }
        let mut r = rng(probe_seed);
        for _ in 0..30 {
            let x: Vec<f64> = (0..tree.dim())
                .map(|j| tree.root_box.lower[j] + r.random::<f64>() * tree.root_box.side_length(j))
                .collect();
            let hits = boxes.iter().filter(|b| b.contains(&x)).count();
            ensure!(hits == 1, "{x:?} lies in {hits} leaves");
            let (_, located) = tree.locate(&x).map_err(|e| e.to_string())?;
            ensure!(located.contains(&x), "located box misses {x:?}");
        }
    }
    Ok(())
}

/// Weights are non-negative, sum to one, and average the targets into the
/// prediction.
pub fn check_weights(forest: &ForestModel, data: &Dataset, probes: &[Vec<f64>]) -> Check {
    for x in probes {
        let w = forest.weights(x).map_err(|e| e.to_string())?;
        ensure!(w.iter().all(|&v| v >= 0.0), "negative weight at {x:?}");
        let sum: f64 = w.iter().sum();
        ensure!((sum - 1.0).abs() <= 1e-10, "weights sum to {sum}");
        let avg: f64 = w.iter().zip(data.targets()).map(|(a, b)| a * b).sum();
        let pred = forest.predict(x).map_err(|e| e.to_string())?;
        ensure!((avg - pred).abs() <= 1e-10, "weighted average {avg} vs prediction {pred}");
    }
    Ok(())
}

pub fn check_determinism(data: &Dataset, config: &GrowthConfig) -> Check {
    let a = ForestModel::fit(data, config).map_err(|e| e.to_string())?;
    let b = ForestModel::fit(data, config).map_err(|e| e.to_string())?;
    ensure!(a.to_json().unwrap() == b.to_json().unwrap(), "refit differs");
    Ok(())
}

/// Serialized models predict bit-identically.
pub fn check_round_trip(forest: &ForestModel, probes: &[Vec<f64>]) -> Check {
    let back = ForestModel::from_json(&forest.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    for x in probes {
        let (a, b) = (forest.predict(x).unwrap(), back.predict(x).unwrap());
        ensure!(a.to_bits() == b.to_bits(), "{a} became {b} at {x:?}");
    }
    Ok(())
}

fn subtree_count(node: &TreeNode) -> u64 {
    node.leaves().iter().map(|l| l.count()).sum()
}

/// Centered splits of distinct-valued data halve the node (counts differ by
/// at most one), and leaf depths stay near `log2(a_n / q_n)`.
pub fn check_median_halving(data: &Dataset, q_n: u64, seed: u64) -> Check {
    let plan = ResamplePlan::full(data.n());
    let tree = grow_centered(data, &plan, &CenteredParams::new(q_n), seed).map_err(|e| e.to_string())?;
    fn walk(node: &TreeNode, q_n: u64) -> Check {
        if let TreeNode::Split { left, right, .. } = node {
            let (l, r) = (subtree_count(left), subtree_count(right));
            ensure!(l.abs_diff(r) <= 1, "children of {} and {} points", l, r);
            ensure!(l >= q_n && r >= q_n, "child below q_n: {l}, {r}");
            walk(left, q_n)?;
            walk(right, q_n)?;
        }
        Ok(())
    }
    walk(&tree.root, q_n)?;
    let target = (data.n() as f64 / q_n as f64).log2();
    for path in tree.root.phase_paths() {
        let d = path.len() as f64;
        ensure!(d >= target - 2.0 && d <= target + 1.0, "leaf depth {d} vs log2(a_n/q_n) = {target}");
    }
    Ok(())
}

/// Frequency of each feature at the root of `trials` depth-one centered
/// trees on five features.
pub fn root_feature_frequencies(trials: u64) -> [f64; 5] {
    let data = random_data(3, 16, 5, false);
    let plan = ResamplePlan::full(16);
    let params = CenteredParams {
        q_n: 1,
        depth_cap: Some(1),
        feature_whitelist: None,
    };
    let mut counts = [0.0; 5];
    for seed in 0..trials {
        let tree = grow_centered(&data, &plan, &params, seed).unwrap();
        let TreeNode::Split { split, .. } = &tree.root else {
            panic!("root did not split")
        };
        counts[split.feature] += 1.0;
    }
    counts.map(|c| c / trials as f64)
}

/// Poisoning the validation targets of a fold leaves that fold's training
/// set and fitted forest untouched, and its error moves only through the
/// poisoned targets.
pub fn check_cv_hygiene(data: &Dataset, folds: usize, seed: u64) -> Check {
    let plan = CvPlan { folds, budget: 1, seed };
    let split = plan.validation_folds(data.n()).map_err(|e| e.to_string())?;
    let config = GrowthConfig::new(Algorithm::Grafted).trees(3).q_n(2).alpha(2.0).seed(seed);
    for (k, validation) in split.iter().enumerate() {
        let mut poisoned = data.targets().to_vec();
        for &i in validation {
            poisoned[i] = 1e6 + i as f64;
        }
        let poisoned = data.with_targets(poisoned).unwrap();
        let clean_train = fold_training_set(data, validation).unwrap();
        let dirty_train = fold_training_set(&poisoned, validation).unwrap();
        ensure!(clean_train == dirty_train, "fold {k}: training rows changed");
        let clean = ForestModel::fit(&clean_train, &config).unwrap();
        let dirty = ForestModel::fit(&dirty_train, &config).unwrap();
        ensure!(clean.to_json().unwrap() == dirty.to_json().unwrap(), "fold {k}: trees changed");
        let errors = fold_errors(&poisoned, &split, &Learner::Forest { config: config.clone() }).unwrap();
        let expected = test_error(&clean, &poisoned, validation).unwrap();
        ensure!(errors[k].to_bits() == expected.to_bits(), "fold {k}: error {} vs {expected}", errors[k]);
    }
    Ok(())
}

/// Within-node sum of squared deviations, two-pass.
fn sse(values: &[(f64, u32)]) -> (f64, u64) {
    let count: u64 = values.iter().map(|v| u64::from(v.1)).sum();
    if count == 0 {
        return (0.0, 0);
    }
    let mean = values.iter().map(|v| v.0 * f64::from(v.1)).sum::<f64>() / count as f64;
    let s = values.iter().map(|v| f64::from(v.1) * (v.0 - mean).powi(2)).sum();
    (s, count)
}

pub struct Brute {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Exhaustive search over every feature and every midpoint between
/// distinct values, scoring by the drop in mean squared deviation.
pub fn brute_force_split(data: &Dataset, samples: &[SampleRef], min_child: u64) -> Option<Brute> {
    let all: Vec<(f64, u32)> = samples.iter().map(|s| (data.y(s.index()), s.multiplicity())).collect();
    let (parent, n) = sse(&all);
    let mut scored = Vec::new();
    for j in 0..data.p() {
        let mut xs: Vec<f64> = samples.iter().map(|s| data.x(s.index(), j)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for w in xs.windows(2) {
            let mut t = w[0] + (w[1] - w[0]) / 2.0;
            if t >= w[1] {
                t = w[0];
            }
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for s in samples {
                let v = (data.y(s.index()), s.multiplicity());
                if data.x(s.index(), j) <= t {
                    left.push(v);
                } else {
                    right.push(v);
                }
            }
            let (sl, nl) = sse(&left);
            let (sr, nr) = sse(&right);
            if nl < min_child || nr < min_child {
                continue;
            }
            scored.push(Brute {
                feature: j,
                threshold: t,
                gain: (parent - sl - sr) / n as f64,
            });
        }
    }
    let top = scored.iter().map(|b| b.gain).fold(f64::NEG_INFINITY, f64::max);
    // Candidates are listed by feature, then threshold: the first near-maximum
    // is the lexicographic winner.
    scored.into_iter().find(|b| b.gain >= top - 1e-10 * top.abs().max(1e-300))
}

/// A node of `size` rows with multiplicities in 1..=3. Features sometimes
/// sit on a coarse lattice or duplicate each other, to exercise ties.
pub fn random_node_data(r: &mut ChaCha8Rng, size: usize, p: usize) -> (Dataset, Vec<SampleRef>) {
    let coarse = r.random_bool(0.3);
    let mut features = Vec::with_capacity(size * p);
    for _ in 0..size {
        for _ in 0..p {
            let v: f64 = r.random();
            features.push(if coarse { (v * 6.0).floor() / 6.0 } else { v });
        }
    }
    // Copy feature 0 into the last column now and then to force exact ties.
    if p > 1 && r.random_bool(0.3) {
        for i in 0..size {
            features[i * p + p - 1] = features[i * p];
        }
    }
    let targets: Vec<f64> = (0..size).map(|i| features[i * p] * 3.0 + r.random::<f64>()).collect();
    let data = Dataset::new(p, features, targets).unwrap();
    let samples = (0..size as u32).map(|i| SampleRef(i, r.random_range(1..=3))).collect();
    (data, samples)
}
