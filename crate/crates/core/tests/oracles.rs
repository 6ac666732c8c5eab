//! Independent re-computations of quantities the library computes with
//! faster or more structured code.

use grafted_forest::cart::{best_split, candidate_thresholds, impurity_gain, variance_decrease_gain, NodeSample};
use grafted_forest::centered::{recommended_depth, sample_median, weighted_median};
use grafted_forest::data::{build_mesh, train_test_split, Mesh, MeshSpec, SyntheticModel};
use grafted_forest::eval::{mesh_l2_error, random_search_cv, scion_shrinkage_bound, CvPlan, FnPredictor, Learner, SearchSpace};
use grafted_forest::leaf::{fit_kernel_ridge, fit_nadaraya_watson};
use grafted_forest::resample::ResamplePlan;
use grafted_forest::tree::{LeafPayload, SampleRef, TreeNode};
use grafted_forest::{Algorithm, BandwidthRule, Dataset, ForestModel, GrowthConfig, ResampleMode, SampleSize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod support;
use support::{brute_force_split, random_node_data};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_dataset(n: usize, p: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> Dataset {
    let mut r = rng(seed);
    let features: Vec<f64> = (0..n * p).map(|_| r.random::<f64>()).collect();
    let targets = features.chunks(p).map(|x| f(x) + 0.1 * (r.random::<f64>() - 0.5)).collect();
    Dataset::new(p, features, targets).unwrap()
}

#[test]
fn best_split_matches_exhaustive_search() {
    let mut r = rng(11);
    for _ in 0..60 {
        let size = r.random_range(2..=30);
        let p = r.random_range(1..=4);
        let min_child = r.random_range(1..=3);
        let (data, samples) = random_node_data(&mut r, size, p);
        let node = NodeSample::new(&data, samples.clone()).unwrap();
        let features: Vec<usize> = (0..p).collect();
        let got = best_split(&node, &features, min_child);
        let want = brute_force_split(&data, &samples, min_child);
        match (got, want) {
            (None, None) => {}
            (Some(g), Some(w)) => {
                assert_eq!((g.feature, g.threshold), (w.feature, w.threshold));
                assert!((g.gain - w.gain).abs() <= 1e-10);
            }
            (g, w) => panic!("library {:?} vs brute force {:?}", g.map(|g| g.feature), w.map(|w| w.feature)),
        }
    }
}

#[test]
fn product_and_variance_forms_agree_on_random_nodes() {
    let mut r = rng(12);
    for _ in 0..100 {
        let (data, samples) = random_node_data(&mut r, 50, 2);
        let node = NodeSample::new(&data, samples).unwrap();
        for z in candidate_thresholds(&node, 1) {
            let a = impurity_gain(&node, 1, z).unwrap().gain;
            let b = variance_decrease_gain(&node, 1, z).unwrap();
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn candidate_thresholds_on_uniform_draws() {
    let mut r = rng(13);
    let xs: Vec<f64> = (0..20).map(|_| r.random()).collect();
    let data = Dataset::new(1, xs.clone(), vec![0.0; 20]).unwrap();
    let node = NodeSample::root(&data, &ResamplePlan::full(20)).unwrap();
    let c = candidate_thresholds(&node, 0);
    let mut distinct = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    assert_eq!(c.len(), distinct.len() - 1);
    let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
    assert!(c.iter().all(|&t| t > lo && t < hi));
}

#[test]
fn step_gain_by_hand() {
    let data = Dataset::new(1, vec![0.1, 0.2, 0.8, 0.9], vec![0.0, 0.0, 1.0, 1.0]).unwrap();
    let node = NodeSample::root(&data, &ResamplePlan::full(4)).unwrap();
    let g = impurity_gain(&node, 0, 0.5).unwrap();
    assert!((g.gain - 2.0 * 2.0 / 16.0).abs() < 1e-15);
}

/// Route `x` through a node by hand and collect the leaf's samples.
fn leaf_samples<'a>(node: &'a TreeNode, x: &[f64]) -> &'a [SampleRef] {
    match node {
        TreeNode::Split { split, left, right, .. } => {
            if x[split.feature] <= split.threshold {
                leaf_samples(left, x)
            } else {
                leaf_samples(right, x)
            }
        }
        TreeNode::Leaf(leaf) => match &leaf.payload {
            LeafPayload::Scion { subtree } => leaf_samples(subtree, x),
            _ => &leaf.samples,
        },
    }
}

fn oracle_weights(forest: &ForestModel, x: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; forest.n_train()];
    for tree in forest.trees() {
        let samples = leaf_samples(&tree.root, x);
        let total: f64 = samples.iter().map(|s| f64::from(s.1)).sum();
        for s in samples {
            w[s.0 as usize] += f64::from(s.1) / total / forest.trees().len() as f64;
        }
    }
    w
}

#[test]
fn forest_weights_match_direct_recomputation() {
    let data = uniform_dataset(300, 3, 14, |x| x[0] * x[1] + x[2]);
    let configs = [
        GrowthConfig::new(Algorithm::Cart).trees(10).q_n(3).seed(1),
        GrowthConfig::new(Algorithm::Centered).trees(10).q_n(4).seed(2),
        GrowthConfig::new(Algorithm::Grafted).trees(10).q_n(3).alpha(4.0).seed(3),
        GrowthConfig::new(Algorithm::Grafted)
            .trees(10)
            .q_n(2)
            .alpha(8.0)
            .resample(ResampleMode::WithoutReplacement)
            .sample_size(SampleSize::Divided { divisor: 1.3 })
            .seed(4),
    ];
    let mut r = rng(15);
    for config in &configs {
        let forest = ForestModel::fit(&data, config).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| r.random()).collect();
            let want = oracle_weights(&forest, &x);
            let got = forest.weights(&x).unwrap();
            let diff = want.iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-12, "weights differ by {diff}");
            let sum: f64 = got.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-10);
            let avg: f64 = got.iter().zip(data.targets()).map(|(w, y)| w * y).sum();
            assert!((avg - forest.predict(&x).unwrap()).abs() <= 1e-10);
        }
    }
}

#[test]
fn tree_predictions_at_training_points_are_leaf_means() {
    let mut r = rng(16);
    let rows: Vec<Vec<f64>> = (0..8).map(|_| vec![r.random(), r.random()]).collect();
    let targets: Vec<f64> = (0..8).map(|_| r.random()).collect();
    let data = Dataset::from_rows(&rows, targets).unwrap();
    let forest = ForestModel::fit(&data, &GrowthConfig::new(Algorithm::Cart).trees(1).q_n(2).seed(9)).unwrap();
    let tree = &forest.trees()[0];
    for row in &rows {
        let samples = leaf_samples(&tree.root, row);
        let total: f64 = samples.iter().map(|s| f64::from(s.1)).sum();
        let mean: f64 = samples.iter().map(|s| f64::from(s.1) * data.y(s.index())).sum::<f64>() / total;
        assert!((tree.predict(row).unwrap() - mean).abs() < 1e-12);
    }
}

fn gaussian(a: &[f64], b: &[f64], h: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum();
    (-d2 / (2.0 * h * h)).exp()
}

#[test]
fn nadaraya_watson_matches_double_loop() {
    let mut r = rng(17);
    let pts: Vec<Vec<f64>> = (0..20).map(|_| vec![r.random(), r.random()]).collect();
    let ys: Vec<f64> = (0..20).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
    let h = 0.1;
    let model = fit_nadaraya_watson(pts.concat(), 2, ys.clone(), BandwidthRule::Fixed { h }).unwrap();
    for a in 0..=10 {
        for b in 0..=10 {
            let x = [a as f64 / 10.0, b as f64 / 10.0];
            let (mut num, mut den) = (0.0, 0.0);
            for (p, y) in pts.iter().zip(&ys) {
                let k = gaussian(&x, p, h);
                num += k * y;
                den += k;
            }
            if den < 1e-250 {
                // Far from every point the plain ratio underflows; the model
                // rescales by the nearest distance instead.
                continue;
            }
            assert!((model.predict(&x) - num / den).abs() <= 1e-12);
        }
    }
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

#[test]
fn kernel_ridge_matches_dense_solve() {
    let mut r = rng(18);
    let pts: Vec<Vec<f64>> = (0..15).map(|_| vec![r.random(), r.random(), r.random()]).collect();
    let ys: Vec<f64> = pts.iter().map(|p| (3.0 * p[0]).sin() + p[1] * p[2]).collect();
    let (h, lambda) = (0.4, 1e-2);
    let model = fit_kernel_ridge(pts.concat(), 3, ys.clone(), h, lambda).unwrap();
    let gram: Vec<Vec<f64>> = (0..15)
        .map(|i| {
            (0..15)
                .map(|j| gaussian(&pts[i], &pts[j], h) + if i == j { lambda } else { 0.0 })
                .collect()
        })
        .collect();
    let dual = solve_dense(gram, ys);
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| r.random()).collect();
        let want: f64 = pts.iter().zip(&dual).map(|(p, a)| a * gaussian(&x, p, h)).sum();
        assert!((model.predict(&x) - want).abs() <= 1e-8);
    }
}

#[test]
fn medians_match_sorting() {
    let mut r = rng(19);
    let xs: Vec<f64> = (0..101).map(|_| r.random()).collect();
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(sample_median(&xs), Some(sorted[50]));

    for _ in 0..200 {
        let k = r.random_range(2..12);
        let mut pairs: Vec<(f64, u32)> = (0..k).map(|_| ((r.random::<f64>() * 5.0).floor(), r.random_range(1..4))).collect();
        let mut expanded: Vec<f64> = pairs.iter().flat_map(|&(v, w)| std::iter::repeat_n(v, w as usize)).collect();
        expanded.sort_by(f64::total_cmp);
        let m = expanded.len();
        let want = if expanded[0] == expanded[m - 1] {
            None
        } else {
            Some((expanded[(m - 1) / 2] + expanded[m / 2]) / 2.0)
        };
        assert_eq!(weighted_median(&mut pairs), want);
    }
}

#[test]
fn recommended_depth_closed_form() {
    // floor(ln n / (ln 2 - ln(1 - 3/(4p)))) evaluated independently.
    let f = |p: f64, n: f64| ((n.ln()) / (2f64.ln() - (1.0 - 3.0 / (4.0 * p)).ln())).floor() as u32;
    assert_eq!(recommended_depth(1, 1000, 0.0), 3);
    assert_eq!(recommended_depth(3, 10_000, 0.0), 9);
    for p in 1..8 {
        for n in [50, 400, 5000, 80_000] {
            assert_eq!(recommended_depth(p, n, 0.0), f(p as f64, n as f64));
        }
    }
}

#[test]
fn mesh_error_matches_hand_loop() {
    let mut r = rng(20);
    let points: Vec<f64> = (0..20).map(|_| r.random()).collect();
    let mesh = Mesh { dim: 2, points };
    let cuts = [r.random::<f64>(), r.random::<f64>()];
    let piecewise = move |x: &[f64]| -> f64 {
        match (x[0] <= cuts[0], x[1] <= cuts[1]) {
            (true, true) => 1.5,
            (true, false) => -0.25,
            (false, true) => 3.0,
            (false, false) => 0.0,
        }
    };
    let model = SyntheticModel::new("sum", 2, 0.0, vec![0, 1], |x: &[f64]| x[0] + 2.0 * x[1]).unwrap();
    let predictor = FnPredictor { dim: 2, f: piecewise };
    let mut want = 0.0;
    for i in 0..10 {
        let x = mesh.row(i);
        want += (piecewise(x) - (x[0] + 2.0 * x[1])).powi(2);
    }
    want /= 10.0;
    assert!((mesh_l2_error(&predictor, &model, &mesh).unwrap() - want).abs() <= 1e-12);
}

#[test]
fn cv_table_matches_independent_pass() {
    let data = uniform_dataset(120, 2, 21, |x| x[0] - x[1]);
    let plan = CvPlan {
        folds: 4,
        budget: 64,
        seed: 5,
    };
    let space = SearchSpace {
        q_n: vec![2, 5],
        alpha: vec![1.0, 4.0],
        ..Default::default()
    };
    let config = GrowthConfig::new(Algorithm::Grafted).trees(8).seed(3);
    let result = random_search_cv(&data, &plan, &space, &Learner::Forest { config: config.clone() }).unwrap();
    assert_eq!(result.table.len(), 4);

    let folds = plan.validation_folds(data.n()).unwrap();
    let mut best = (f64::INFINITY, 0);
    for (k, row) in result.table.iter().enumerate() {
        let cfg = config.clone().q_n(row.candidate.q_n.unwrap()).alpha(row.candidate.alpha.unwrap());
        let mut total = 0.0;
        for validation in &folds {
            let train: Vec<usize> = (0..data.n()).filter(|i| !validation.contains(i)).collect();
            let forest = ForestModel::fit(&data.subset(&train).unwrap(), &cfg).unwrap();
            let mse = validation
                .iter()
                .map(|&i| (forest.predict(data.row(i)).unwrap() - data.y(i)).powi(2))
                .sum::<f64>()
                / validation.len() as f64;
            total += mse;
        }
        let mean = total / folds.len() as f64;
        assert!((row.mean_mse - mean).abs() <= 1e-12 * mean.max(1.0));
        if mean < best.0 {
            best = (mean, k);
        }
    }
    assert_eq!(result.best, result.table[best.1].candidate);
}

#[test]
fn boston_split_sizes() {
    for seed in 0..5 {
        let (train, test) = train_test_split(506, 102.0 / 506.0, seed).unwrap();
        assert_eq!((train.len(), test.len()), (404, 102));
        let mut all = [train, test].concat();
        all.sort_unstable();
        assert_eq!(all, (0..506).collect::<Vec<_>>());
    }
}

#[test]
fn low_discrepancy_points_are_distinct_and_centered() {
    let mesh = build_mesh(&MeshSpec::LowDiscrepancy { dim: 5, count: 4096 }).unwrap();
    assert_eq!(mesh.len(), 4096);
    let mut rows: Vec<Vec<u64>> = mesh.rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
    rows.sort();
    rows.dedup();
    assert_eq!(rows.len(), 4096);
    for j in 0..5 {
        let mean = mesh.rows().map(|r| r[j]).sum::<f64>() / 4096.0;
        assert!((mean - 0.5).abs() <= 0.02);
    }
}

#[test]
fn shrinkage_bound_values() {
    assert!((scion_shrinkage_bound(3, 16.0) - (1.0f64 - 5.0 / 24.0).powi(4)).abs() < 1e-15);
    assert!((scion_shrinkage_bound(5, 4.0) - 0.875f64.powi(2)).abs() < 1e-15);
    assert_eq!(scion_shrinkage_bound(2, 1.0), 1.0);
    assert!((scion_shrinkage_bound(2, 10.0) - (1.0f64 - 5.0 / 16.0).powi(3)).abs() < 1e-15);
}
