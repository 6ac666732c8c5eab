use crate::error::{Error, Result};
use crate::forest::ForestModel;

/// Per-feature side lengths of the leaf boxes containing the probes.
#[derive(Debug, Clone, PartialEq)]
pub struct SideLengthStats {
    /// Mean of `l_j` over probes and trees.
    pub mean: Vec<f64>,
    /// Mean of `l_j^2` over probes and trees.
    pub mean_sq: Vec<f64>,
    /// Standard error of `mean_sq`. Probes and trees are both random, so the
    /// variance of the probe means (over probes) and of the tree means (over
    /// trees) are added.
    pub se_sq: Vec<f64>,
    pub probes: usize,
}

/// `(1 - 5 / (8p))^floor(log2 alpha)`: the bound on the expected squared side
/// length of a grafted leaf.
pub fn scion_shrinkage_bound(p: usize, alpha: f64) -> f64 {
    let halvings = alpha.log2().floor().max(0.0) as i32;
    (1.0 - 5.0 / (8.0 * p as f64)).powi(halvings)
}

fn variance_of_mean(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n
}

/// Average leaf-box side lengths at each probe over the trees of `forest`.
/// Lengths are measured in the space the trees were grown in.
pub fn side_length_stats(forest: &ForestModel, probes: &[Vec<f64>]) -> Result<SideLengthStats> {
    let p = forest.dim();
    if probes.is_empty() {
        return Err(Error::Input("no probe points".into()));
    }
    let trees = forest.trees();
    let (k, m) = (probes.len(), trees.len());
    // lengths[probe][tree][feature], flattened.
    let mut lengths = vec![0.0; k * m * p];
    for (i, x) in probes.iter().enumerate() {
        if x.len() != p {
            return Err(Error::Input(format!("probe has {} features, forest expects {p}", x.len())));
        }
        let x = match forest.scaler() {
            Some(s) => s.transform_point(x),
            None => x.clone(),
        };
        for (t, tree) in trees.iter().enumerate() {
            let (_, bounds) = tree.locate(&x)?;
            for j in 0..p {
                lengths[(i * m + t) * p + j] = bounds.side_length(j);
            }
        }
    }
    let at = |i: usize, t: usize, j: usize| lengths[(i * m + t) * p + j];
    let mut mean = vec![0.0; p];
    let mut mean_sq = vec![0.0; p];
    let mut se_sq = vec![0.0; p];
    for j in 0..p {
        let probe_means: Vec<f64> = (0..k).map(|i| (0..m).map(|t| at(i, t, j).powi(2)).sum::<f64>() / m as f64).collect();
        let tree_means: Vec<f64> = (0..m).map(|t| (0..k).map(|i| at(i, t, j).powi(2)).sum::<f64>() / k as f64).collect();
        mean[j] = (0..k).flat_map(|i| (0..m).map(move |t| (i, t))).map(|(i, t)| at(i, t, j)).sum::<f64>() / (k * m) as f64;
        mean_sq[j] = probe_means.iter().sum::<f64>() / k as f64;
        se_sq[j] = (variance_of_mean(&probe_means) + variance_of_mean(&tree_means)).sqrt();
    }
    Ok(SideLengthStats {
        mean,
        mean_sq,
        se_sq,
        probes: probes.len(),
    })
}
