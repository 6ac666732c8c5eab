use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A regression sample: `n` points in `p` dimensions and their targets.
///
/// Features are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    p: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Build from a row-major feature buffer of length `n * p`.
    pub fn new(p: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        let n = targets.len();
        if n == 0 || p == 0 {
            return Err(Error::Input(format!("dataset needs n >= 1 and p >= 1 (got n={n}, p={p})")));
        }
        if features.len() != n * p {
            return Err(Error::Input(format!(
                "feature buffer has {} entries, expected {n} x {p}",
                features.len()
            )));
        }
        Ok(Dataset {
            n,
            p,
            features,
            targets,
            feature_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.len() != targets.len() {
            return Err(Error::Input(format!(
                "{} feature rows but {} targets",
                rows.len(),
                targets.len()
            )));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Input(format!("row {bad} has {} features, expected {p}", rows[bad].len())));
        }
        Self::new(p, rows.concat(), targets)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::Input(format!("{} feature names for {} features", names.len(), self.p)));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn x(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.p + j]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.p)
    }

    /// True when every feature value lies in `[0, 1]`.
    pub fn is_unit_cube(&self) -> bool {
        self.features.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn require_unit_cube(&self) -> Result<()> {
        match self.features.iter().position(|v| !(0.0..=1.0).contains(v)) {
            None => Ok(()),
            Some(k) => Err(Error::Input(format!(
                "feature ({}, {}) = {} lies outside [0, 1]",
                k / self.p,
                k % self.p,
                self.features[k]
            ))),
        }
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.p);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n {
                return Err(Error::Input(format!("row index {i} out of range for n={}", self.n)));
            }
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        let mut out = Dataset::new(self.p, features, targets)?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }

    /// Same features, different targets.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Dataset> {
        if targets.len() != self.n {
            return Err(Error::Input(format!("{} targets for {} rows", targets.len(), self.n)));
        }
        Ok(Dataset {
            targets,
            ..self.clone()
        })
    }

    /// Smallest box containing every point, or the unit cube when the data
    /// already lives there.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        if self.is_unit_cube() {
            return (vec![0.0; self.p], vec![1.0; self.p]);
        }
        let mut lower = vec![f64::INFINITY; self.p];
        let mut upper = vec![f64::NEG_INFINITY; self.p];
        for row in self.rows() {
            for (j, &v) in row.iter().enumerate() {
                lower[j] = lower[j].min(v);
                upper[j] = upper[j].max(v);
            }
        }
        (lower, upper)
    }
}

/// Per-feature min-max rescaling onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: &Dataset) -> Self {
        let mut min = vec![f64::INFINITY; data.p()];
        let mut max = vec![f64::NEG_INFINITY; data.p()];
        for row in data.rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        MinMaxScaler { min, max }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Constant columns map to 0.
    pub fn transform_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }

    pub fn inverse_point(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| lo + v * (hi - lo))
            .collect()
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.p() != self.dim() {
            return Err(Error::Input(format!(
                "scaler fitted on {} features, dataset has {}",
                self.dim(),
                data.p()
            )));
        }
        let features = data.rows().flat_map(|r| self.transform_point(r)).collect();
        let mut out = Dataset::new(data.p(), features, data.targets().to_vec())?;
        out.feature_names = data.feature_names.clone();
        Ok(out)
    }
}
