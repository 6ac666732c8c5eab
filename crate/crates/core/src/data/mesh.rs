use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest mesh we are willing to materialize.
pub const MAX_MESH_POINTS: usize = 10_000_000;

/// How to place evaluation points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSpec {
    /// Cell centers of a regular grid on the unit cube.
    Grid { dim: usize, resolution: usize },
    /// Cell centers of a regular grid on the box `[lower, upper]`.
    BoxGrid {
        lower: Vec<f64>,
        upper: Vec<f64>,
        resolution: usize,
    },
    /// First `count` points of an additive recurrence sequence on the unit
    /// cube, for dimensions where a grid is out of reach.
    LowDiscrepancy { dim: usize, count: usize },
    /// Grid over the `active` coordinates; the others are held at `fill`.
    Slice {
        dim: usize,
        active: Vec<usize>,
        resolution: usize,
        fill: f64,
    },
}

impl MeshSpec {
    /// Grid for small `dim`, low-discrepancy points of about the same size
    /// otherwise.
    pub fn default_for(dim: usize, budget: usize) -> MeshSpec {
        if dim <= 3 {
            let resolution = ((budget as f64).powf(1.0 / dim as f64).round() as usize).max(1);
            MeshSpec::Grid { dim, resolution }
        } else {
            MeshSpec::LowDiscrepancy { dim, count: budget }
        }
    }
}

/// Row-major evaluation points.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub points: Vec<f64>,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

fn grid_size(resolution: usize, active: usize) -> Result<usize> {
    let mut total: usize = 1;
    for _ in 0..active {
        total = total
            .checked_mul(resolution)
            .filter(|&t| t <= MAX_MESH_POINTS)
            .ok_or_else(|| {
                Error::Config(format!(
                    "mesh of {resolution}^{active} points exceeds the limit of {MAX_MESH_POINTS}"
                ))
            })?;
    }
    Ok(total)
}

fn grid_into(lower: &[f64], upper: &[f64], axes: &[usize], resolution: usize, base: &[f64]) -> Result<Vec<f64>> {
    let dim = base.len();
    let total = grid_size(resolution, axes.len())?;
    let mut points = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; axes.len()];
    for _ in 0..total {
        let mut row = base.to_vec();
        for (k, &j) in axes.iter().enumerate() {
            let t = (idx[k] as f64 + 0.5) / resolution as f64;
            row[j] = lower[k] + t * (upper[k] - lower[k]);
        }
        points.extend_from_slice(&row);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < resolution {
                break;
            }
            *slot = 0;
        }
    }
    Ok(points)
}

/// Positive root of `x^(d+1) = x + 1`.
fn generalized_golden_ratio(d: usize) -> f64 {
    let mut x: f64 = 2.0;
    for _ in 0..200 {
        x = (1.0 + x).powf(1.0 / (d as f64 + 1.0));
    }
    x
}

pub fn build_mesh(spec: &MeshSpec) -> Result<Mesh> {
    match spec {
        MeshSpec::Grid { dim, resolution } => {
            check(*dim, *resolution)?;
            let lower = vec![0.0; *dim];
            let upper = vec![1.0; *dim];
            build_mesh(&MeshSpec::BoxGrid {
                lower,
                upper,
                resolution: *resolution,
            })
        }
        MeshSpec::BoxGrid { lower, upper, resolution } => {
            check(lower.len(), *resolution)?;
            if lower.len() != upper.len() || lower.iter().zip(upper).any(|(a, b)| !(a < b)) {
                return Err(Error::Config("mesh box needs lower < upper in every coordinate".into()));
            }
            let dim = lower.len();
            let axes: Vec<usize> = (0..dim).collect();
            let points = grid_into(lower, upper, &axes, *resolution, &vec![0.0; dim])?;
            Ok(Mesh { dim, points })
        }
        MeshSpec::LowDiscrepancy { dim, count } => {
            check(*dim, *count)?;
            if count.saturating_mul(*dim) > MAX_MESH_POINTS.saturating_mul(4) || *count > MAX_MESH_POINTS {
                return Err(Error::Config(format!("mesh of {count} points in dimension {dim} is too large")));
            }
            let phi = generalized_golden_ratio(*dim);
            let alpha: Vec<f64> = (1..=*dim).map(|j| phi.powi(-(j as i32))).collect();
            let mut points = Vec::with_capacity(count * dim);
            for i in 1..=*count {
                for a in &alpha {
                    points.push((0.5 + i as f64 * a).fract());
                }
            }
            Ok(Mesh { dim: *dim, points })
        }
        MeshSpec::Slice {
            dim,
            active,
            resolution,
            fill,
        } => {
            check(*dim, *resolution)?;
            if active.is_empty() || active.iter().any(|&j| j >= *dim) {
                return Err(Error::Config("slice mesh needs active coordinates within range".into()));
            }
            if !(0.0..=1.0).contains(fill) {
                return Err(Error::Config("slice fill must lie in [0, 1]".into()));
            }
            let lower = vec![0.0; active.len()];
            let upper = vec![1.0; active.len()];
            let points = grid_into(&lower, &upper, active, *resolution, &vec![*fill; *dim])?;
            Ok(Mesh { dim: *dim, points })
        }
    }
}

fn check(dim: usize, size: usize) -> Result<()> {
    if dim == 0 || size == 0 {
        return Err(Error::Config("mesh dimension and size must be positive".into()));
    }
    Ok(())
}
