use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::biau::biau_cef;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub type CefFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `Y = m(X) + sigma * Z` with `X` uniform on the unit cube and `Z`
/// standard normal.
#[derive(Clone)]
pub struct SyntheticModel {
    pub name: String,
    pub p: usize,
    pub noise_sd: f64,
    /// Features the regression function depends on.
    pub relevant: Vec<usize>,
    cef: CefFn,
}

impl fmt::Debug for SyntheticModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SyntheticModel")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("noise_sd", &self.noise_sd)
            .field("relevant", &self.relevant)
            .finish_non_exhaustive()
    }
}

impl SyntheticModel {
    pub fn new(
        name: impl Into<String>,
        p: usize,
        noise_sd: f64,
        relevant: Vec<usize>,
        cef: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("synthetic model needs p >= 1".into()));
        }
        if let Some(&j) = relevant.iter().find(|&&j| j >= p) {
            return Err(Error::Config(format!("relevant feature {j} out of range for p={p}")));
        }
        if !(noise_sd >= 0.0) {
            return Err(Error::Config(format!("noise sd must be >= 0 (got {noise_sd})")));
        }
        Ok(SyntheticModel {
            name: name.into(),
            p,
            noise_sd,
            relevant,
            cef: Arc::new(cef),
        })
    }

    pub fn constant(p: usize, value: f64, noise_sd: f64) -> Result<Self> {
        Self::new(format!("constant({value})"), p, noise_sd, vec![], move |_| value)
    }

    /// Regression function at `x`.
    pub fn cef(&self, x: &[f64]) -> f64 {
        (self.cef)(x)
    }

    pub fn with_noise_sd(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }

    /// Same function embedded in `p` dimensions (extra coordinates ignored).
    pub fn with_dim(mut self, p: usize) -> Result<Self> {
        let needed = self.relevant.iter().max().map_or(1, |&j| j + 1);
        if p < needed {
            return Err(Error::Config(format!("{} needs p >= {needed}", self.name)));
        }
        self.p = p;
        Ok(self)
    }
}

/// Draw `n` rows. Features and noise come from separate streams of `seed`.
pub fn sample_model(model: &SyntheticModel, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("sample size must be positive".into()));
    }
    let mut x_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let features: Vec<f64> = (0..n * model.p).map(|_| x_rng.random::<f64>()).collect();
    let targets = features
        .chunks_exact(model.p)
        .map(|x| {
            let z: f64 = noise_rng.sample(StandardNormal);
            model.cef(x) + model.noise_sd * z
        })
        .collect();
    Dataset::new(model.p, features, targets)
}

/// Names of the functions used in the alpha study.
pub const ALPHA_STUDY: [&str; 6] = [
    "sin200_x1x2",
    "x1x2",
    "x1x2_plus_x3",
    "sin_x1x2_plus_sin_x3",
    "neg_cos_poly",
    "sin_x1x2_plus_x1x2x3",
];

/// Names of the error-versus-sample-size models.
pub const ERROR_VS_N: [&str; 6] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

/// Every registered catalog name.
pub fn catalog_names() -> Vec<&'static str> {
    let mut names = ERROR_VS_N.to_vec();
    names.extend(ALPHA_STUDY);
    names.extend(["sparse_x1x2", "biau"]);
    names
}

/// Look up a named model. Catalog models use unit noise except
/// `sparse_x1x2`, whose noise has variance 0.1.
pub fn cef_catalog(name: &str) -> Result<SyntheticModel> {
    let model = match name {
        "fig2" => SyntheticModel::new(name, 3, 1.0, vec![0, 1], |x| 100.0 * (200.0 * x[0] * x[1]).sin()),
        "fig3" => SyntheticModel::new(name, 3, 1.0, vec![0], |x| 100.0 * x[0].powi(4)),
        "fig4" => SyntheticModel::new(name, 3, 1.0, vec![2], |x| (30.0 * x[2].powi(3)).cos()),
        "fig5" => SyntheticModel::new(name, 3, 1.0, vec![0, 1, 2], |x| (200.0 * x[0] + x[1]).cos() + x[2]),
        "fig6" => SyntheticModel::new(name, 3, 1.0, vec![0, 1, 2], |x| x[0] * x[1] * x[2]),
        "fig7" => SyntheticModel::new(name, 3, 1.0, vec![0, 1], |x| x[0] * x[0] + x[1].powi(3)),
        "sin200_x1x2" => SyntheticModel::new(name, 3, 1.0, vec![0, 1], |x| (200.0 * x[0] * x[1]).sin()),
        "x1x2" => SyntheticModel::new(name, 3, 1.0, vec![0, 1], |x| x[0] * x[1]),
        "x1x2_plus_x3" => SyntheticModel::new(name, 3, 1.0, vec![0, 1, 2], |x| x[0] * x[1] + x[2]),
        "sin_x1x2_plus_sin_x3" => {
            SyntheticModel::new(name, 3, 1.0, vec![0, 1, 2], |x| (x[0] * x[1]).sin() + x[2].sin())
        }
        "neg_cos_poly" => SyntheticModel::new(name, 3, 1.0, vec![0, 1, 2], |x| {
            -(x[0].powi(4) * x[1].powi(5) * x[2]).cos() + 0.2 * x[1].powi(3)
        }),
        "sin_x1x2_plus_x1x2x3" => SyntheticModel::new(name, 3, 1.0, vec![0, 1, 2], |x| {
            (x[0] * x[1]).sin() + x[0] * x[1] * x[2]
        }),
        "sparse_x1x2" => SyntheticModel::new(name, 2, 0.1f64.sqrt(), vec![0, 1], |x| x[0] * x[1]),
        "biau" => SyntheticModel::new(name, 2, 1.0, vec![0, 1], biau_cef),
        other => {
            return Err(Error::Lookup {
                kind: "catalog model",
                name: other.to_string(),
            })
        }
    }?;
    Ok(model)
}
