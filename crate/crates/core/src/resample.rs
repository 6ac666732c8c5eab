use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    /// Bootstrap: multiplicities in `0..=a_n`.
    WithReplacement,
    /// Subsampling: multiplicities in `{0, 1}`.
    WithoutReplacement,
}

/// How often each training row enters one tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    multiplicities: Vec<u32>,
    size: usize,
    mode: ResampleMode,
}

impl ResamplePlan {
    /// Every row exactly once.
    pub fn full(n: usize) -> Self {
        ResamplePlan {
            multiplicities: vec![1; n],
            size: n,
            mode: ResampleMode::WithoutReplacement,
        }
    }

    pub fn from_multiplicities(multiplicities: Vec<u32>, mode: ResampleMode) -> Result<Self> {
        let size: usize = multiplicities.iter().map(|&s| s as usize).sum();
        if size == 0 {
            return Err(Error::Config("resample plan selects no rows".into()));
        }
        if mode == ResampleMode::WithoutReplacement && multiplicities.iter().any(|&s| s > 1) {
            return Err(Error::Config("subsampling plan has a multiplicity above 1".into()));
        }
        Ok(ResamplePlan {
            multiplicities,
            size,
            mode,
        })
    }

    pub fn multiplicities(&self) -> &[u32] {
        &self.multiplicities
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mode(&self) -> ResampleMode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.multiplicities.len()
    }

    /// `(row, multiplicity)` for every row drawn at least once, by row index.
    pub fn drawn(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.multiplicities
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .map(|(i, &s)| (i, s))
    }
}

/// Draw a resample of size `a_n` from `n` rows.
pub fn draw_resample(n: usize, a_n: usize, mode: ResampleMode, seed: u64) -> Result<ResamplePlan> {
    draw_resample_with(n, a_n, mode, &mut stream_rng(seed, Stream::Resample))
}

pub fn draw_resample_with<R: Rng + ?Sized>(
    n: usize,
    a_n: usize,
    mode: ResampleMode,
    rng: &mut R,
) -> Result<ResamplePlan> {
    if n == 0 || a_n == 0 {
        return Err(Error::Config(format!("resample needs n >= 1 and a_n >= 1 (n={n}, a_n={a_n})")));
    }
    let mut multiplicities = vec![0u32; n];
    match mode {
        ResampleMode::WithoutReplacement => {
            if a_n > n {
                return Err(Error::Config(format!(
                    "cannot subsample a_n={a_n} rows without replacement from n={n}"
                )));
            }
            if a_n == n {
                multiplicities.fill(1);
            } else {
                for i in index::sample(rng, n, a_n) {
                    multiplicities[i] = 1;
                }
            }
        }
        ResampleMode::WithReplacement => {
            for _ in 0..a_n {
                multiplicities[rng.random_range(0..n)] += 1;
            }
        }
    }
    Ok(ResamplePlan {
        multiplicities,
        size: a_n,
        mode,
    })
}
