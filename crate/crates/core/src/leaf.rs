//! Leaf estimators for generalized grafting: Nadaraya-Watson and kernel
//! ridge regression with a Gaussian kernel.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bandwidth of the Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    Fixed { h: f64 },
    /// `h = c * n^(-1 / (4 + beta))` for a leaf holding `n` points.
    Rate { c: f64, beta: f64 },
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::Rate { c: 1.0, beta: 1.0 }
    }
}

impl BandwidthRule {
    pub fn resolve(&self, n: usize) -> f64 {
        match *self {
            BandwidthRule::Fixed { h } => h,
            BandwidthRule::Rate { c, beta } => c * (n.max(1) as f64).powf(-1.0 / (4.0 + beta)),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            BandwidthRule::Fixed { h } => h > 0.0 && h.is_finite(),
            BandwidthRule::Rate { c, beta } => c > 0.0 && beta > 0.0 && c.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid bandwidth rule {self:?}")))
        }
    }
}

pub const DEFAULT_RIDGE_PENALTY: f64 = 1e-3;

/// Registry entry naming a leaf estimator and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum LeafRegressorSpec {
    #[default]
    Constant,
    NadarayaWatson { bandwidth: BandwidthRule },
    KernelRidge { bandwidth: BandwidthRule, lambda: f64 },
}

impl LeafRegressorSpec {
    pub const NAMES: [&'static str; 3] = ["constant", "nadaraya_watson", "kernel_ridge"];

    /// Look up a registry name. Unset hyperparameters take their defaults
    /// (rate-rule bandwidth with `c = 1, beta = 1`; ridge penalty `1e-3`).
    pub fn from_name(name: &str, bandwidth: Option<BandwidthRule>, lambda: Option<f64>) -> Result<Self> {
        let spec = match name {
            "constant" => LeafRegressorSpec::Constant,
            "nadaraya_watson" | "nw" => LeafRegressorSpec::NadarayaWatson {
                bandwidth: bandwidth.unwrap_or_default(),
            },
            "kernel_ridge" | "krr" => LeafRegressorSpec::KernelRidge {
                bandwidth: bandwidth.unwrap_or_default(),
                lambda: lambda.unwrap_or(DEFAULT_RIDGE_PENALTY),
            },
            other => {
                return Err(Error::Lookup {
                    kind: "leaf regressor",
                    name: other.to_string(),
                })
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        match self {
            LeafRegressorSpec::Constant => "constant",
            LeafRegressorSpec::NadarayaWatson { .. } => "nadaraya_watson",
            LeafRegressorSpec::KernelRidge { .. } => "kernel_ridge",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LeafRegressorSpec::Constant => Ok(()),
            LeafRegressorSpec::NadarayaWatson { bandwidth } => bandwidth.validate(),
            LeafRegressorSpec::KernelRidge { bandwidth, lambda } => {
                bandwidth.validate()?;
                if *lambda >= 0.0 && lambda.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("ridge penalty must be >= 0 (got {lambda})")))
                }
            }
        }
    }

    /// Fit on row-major `points` of dimension `dim`.
    pub fn fit(&self, points: Vec<f64>, dim: usize, targets: Vec<f64>) -> Result<FittedLeafRegressor> {
        match *self {
            LeafRegressorSpec::Constant => fit_constant(points, dim, targets),
            LeafRegressorSpec::NadarayaWatson { bandwidth } => fit_nadaraya_watson(points, dim, targets, bandwidth),
            LeafRegressorSpec::KernelRidge { bandwidth, lambda } => {
                let h = bandwidth.resolve(targets.len());
                fit_kernel_ridge(points, dim, targets, h, lambda)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeafModelKind {
    Constant,
    NadarayaWatson,
    KernelRidge { lambda: f64, dual: Vec<f64> },
}

/// A fitted leaf estimator. Stores its (feature-masked) training points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLeafRegressor {
    pub kind: LeafModelKind,
    pub dim: usize,
    pub bandwidth: f64,
    pub points: Vec<f64>,
    pub targets: Vec<f64>,
    pub fallback_mean: f64,
    /// Set when fitting degenerated and the estimator predicts the mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn check_shape(points: &[f64], dim: usize, targets: &[f64]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::Input("leaf regressor needs at least one point".into()));
    }
    if dim == 0 || points.len() != dim * targets.len() {
        return Err(Error::Input(format!(
            "{} coordinates for {} points of dimension {dim}",
            points.len(),
            targets.len()
        )));
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    let mut m = 0.0;
    for (k, &v) in values.iter().enumerate() {
        m += (v - m) / (k + 1) as f64;
    }
    m
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn fit_constant(points: Vec<f64>, dim: usize, targets: Vec<f64>) -> Result<FittedLeafRegressor> {
    check_shape(&points, dim, &targets)?;
    Ok(FittedLeafRegressor {
        kind: LeafModelKind::Constant,
        dim,
        bandwidth: 1.0,
        fallback_mean: mean(&targets),
        points: Vec::new(),
        targets: Vec::new(),
        warning: None,
    })
}

pub fn fit_nadaraya_watson(
    points: Vec<f64>,
    dim: usize,
    targets: Vec<f64>,
    rule: BandwidthRule,
) -> Result<FittedLeafRegressor> {
    check_shape(&points, dim, &targets)?;
    rule.validate()?;
    Ok(FittedLeafRegressor {
        kind: LeafModelKind::NadarayaWatson,
        dim,
        bandwidth: rule.resolve(targets.len()),
        fallback_mean: mean(&targets),
        points,
        targets,
        warning: None,
    })
}

/// Solve `(K + lambda I) alpha = y` for the Gaussian kernel matrix `K`.
/// A system that is not numerically positive definite falls back to the
/// mean and records a warning.
pub fn fit_kernel_ridge(
    points: Vec<f64>,
    dim: usize,
    targets: Vec<f64>,
    bandwidth: f64,
    lambda: f64,
) -> Result<FittedLeafRegressor> {
    check_shape(&points, dim, &targets)?;
    BandwidthRule::Fixed { h: bandwidth }.validate()?;
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("ridge penalty must be >= 0 (got {lambda})")));
    }
    let n = targets.len();
    let gram = gaussian_gram(&points, dim, bandwidth, lambda);
    let fallback_mean = mean(&targets);
    let (kind, warning) = match solve_spd(gram, &targets) {
        Some(dual) => (LeafModelKind::KernelRidge { lambda, dual }, None),
        None => (
            LeafModelKind::Constant,
            Some(format!("kernel ridge system of size {n} is singular; predicting the mean")),
        ),
    };
    Ok(FittedLeafRegressor {
        kind,
        dim,
        bandwidth,
        fallback_mean,
        points,
        targets,
        warning,
    })
}

fn gaussian_gram(points: &[f64], dim: usize, h: f64, ridge: f64) -> DMatrix<f64> {
    let n = points.len() / dim;
    let scale = -0.5 / (h * h);
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = &points[i * dim..(i + 1) * dim];
        k[(i, i)] = 1.0 + ridge;
        for j in 0..i {
            let v = (scale * sq_dist(xi, &points[j * dim..(j + 1) * dim])).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn solve_spd(matrix: DMatrix<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    let chol = matrix.cholesky()?;
    let sol = chol.solve(&DVector::from_column_slice(rhs));
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
}

impl FittedLeafRegressor {
    pub fn n(&self) -> usize {
        self.targets.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Prediction at a point already restricted to the fitted features.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.kind {
            LeafModelKind::Constant => self.fallback_mean,
            LeafModelKind::NadarayaWatson => {
                // shifting by the smallest distance keeps the nearest weight at 1
                let scale = 0.5 / (self.bandwidth * self.bandwidth);
                let d2: Vec<f64> = (0..self.n()).map(|i| sq_dist(x, self.point(i))).collect();
                let d_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
                let (mut num, mut den) = (0.0, 0.0);
                for (d, y) in d2.iter().zip(&self.targets) {
                    let w = (-(d - d_min) * scale).exp();
                    num += w * y;
                    den += w;
                }
                if den > 0.0 && num.is_finite() {
                    num / den
                } else {
                    self.fallback_mean
                }
            }
            LeafModelKind::KernelRidge { dual, .. } => {
                let scale = -0.5 / (self.bandwidth * self.bandwidth);
                (0..self.n())
                    .map(|i| dual[i] * (scale * sq_dist(x, self.point(i))).exp())
                    .sum()
            }
        }
    }

    pub fn fell_back(&self) -> bool {
        self.warning.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_nadaraya_watson_is_constant() {
        let f = fit_nadaraya_watson(vec![0.3, 0.4], 2, vec![1.7], BandwidthRule::Fixed { h: 0.01 }).unwrap();
        for x in [[0.3, 0.4], [0.9, 0.0], [100.0, -3.0]] {
            assert_eq!(f.predict(&x), 1.7);
        }
    }

    #[test]
    fn wide_bandwidth_gives_the_mean() {
        let pts = vec![0.1, 0.2, 0.5, 0.9];
        let ys = vec![1.0, 2.0, 4.0, 9.0];
        let f = fit_nadaraya_watson(pts, 1, ys, BandwidthRule::Fixed { h: 1e6 }).unwrap();
        for x in [0.0, 0.5, 1.0] {
            assert!((f.predict(&[x]) - 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn kernel_ridge_single_point_closed_form() {
        let f = fit_kernel_ridge(vec![0.5], 1, vec![3.0], 0.2, 1.0).unwrap();
        assert!((f.predict(&[0.5]) - 1.5).abs() < 1e-15);
        let k = (-0.5f64 * 0.1 * 0.1 / 0.04).exp();
        assert!((f.predict(&[0.6]) - 1.5 * k).abs() < 1e-15);
    }

    #[test]
    fn kernel_ridge_zero_targets() {
        let f = fit_kernel_ridge(vec![0.1, 0.4, 0.8], 1, vec![0.0; 3], 0.3, 1e-3).unwrap();
        assert_eq!(f.predict(&[0.6]), 0.0);
    }

    #[test]
    fn duplicate_points_without_ridge_fall_back() {
        let f = fit_kernel_ridge(vec![0.4, 0.4], 1, vec![1.0, 3.0], 0.3, 0.0).unwrap();
        assert!(f.fell_back());
        assert_eq!(f.predict(&[0.0]), 2.0);
    }

    #[test]
    fn registry_names() {
        for name in LeafRegressorSpec::NAMES {
            assert_eq!(LeafRegressorSpec::from_name(name, None, None).unwrap().name(), name);
        }
        assert!(matches!(
            LeafRegressorSpec::from_name("svm", None, None),
            Err(Error::Lookup { .. })
        ));
        assert!(LeafRegressorSpec::from_name("kernel_ridge", Some(BandwidthRule::Fixed { h: -1.0 }), None).is_err());
    }

    #[test]
    fn rate_rule() {
        let r = BandwidthRule::Rate { c: 2.0, beta: 1.0 };
        assert!((r.resolve(32) - 2.0 * 32f64.powf(-0.2)).abs() < 1e-15);
    }
}
