use rayon::prelude::*;

use crate::data::{Mesh, SyntheticModel};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::Predictor;

/// Mean of `(prediction - m(x))^2` over the mesh. The sum runs in mesh order
/// so the result does not depend on the thread count.
pub fn mesh_l2_error<P: Predictor + ?Sized>(predictor: &P, model: &SyntheticModel, mesh: &Mesh) -> Result<f64> {
    if predictor.dim() != model.p || mesh.dim != model.p {
        return Err(Error::Input(format!(
            "dimension mismatch: predictor {}, model {}, mesh {}",
            predictor.dim(),
            model.p,
            mesh.dim
        )));
    }
    if mesh.is_empty() {
        return Err(Error::Input("empty mesh".into()));
    }
    let rows: Vec<&[f64]> = mesh.rows().collect();
    let sq = rows
        .par_iter()
        .map(|x| predictor.predict_point(x).map(|v| (v - model.cef(x)).powi(2)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(sq.iter().sum::<f64>() / sq.len() as f64)
}

/// Mean squared error on the rows `test` of `data`.
pub fn test_error<P: Predictor + ?Sized>(predictor: &P, data: &Dataset, test: &[usize]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Input("empty test set".into()));
    }
    if let Some(&i) = test.iter().find(|&&i| i >= data.n()) {
        return Err(Error::Input(format!("test index {i} out of range for n={}", data.n())));
    }
    let sq = test
        .par_iter()
        .map(|&i| predictor.predict_point(data.row(i)).map(|v| (data.y(i) - v).powi(2)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(sq.iter().sum::<f64>() / sq.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_mesh, MeshSpec};
    use crate::eval::FnPredictor;

    #[test]
    fn constant_against_constant() {
        let model = SyntheticModel::constant(2, 1.5, 0.0).unwrap();
        let mesh = build_mesh(&MeshSpec::Grid { dim: 2, resolution: 4 }).unwrap();
        let p = FnPredictor { dim: 2, f: |_: &[f64]| -0.5 };
        assert_eq!(mesh_l2_error(&p, &model, &mesh).unwrap(), 4.0);
        let exact = FnPredictor { dim: 2, f: |_: &[f64]| 1.5 };
        assert_eq!(mesh_l2_error(&exact, &model, &mesh).unwrap(), 0.0);
    }

    #[test]
    fn zero_predictor_on_ones() {
        let d = Dataset::from_rows(&[vec![0.1], vec![0.2]], vec![1.0, 1.0]).unwrap();
        let p = FnPredictor { dim: 1, f: |_: &[f64]| 0.0 };
        assert_eq!(test_error(&p, &d, &[0, 1]).unwrap(), 1.0);
        assert!(test_error(&p, &d, &[2]).is_err());
        assert!(test_error(&p, &d, &[]).is_err());
    }
}
