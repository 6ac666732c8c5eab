use std::path::Path;

use crate::dataset::{Dataset, MinMaxScaler};
use crate::error::{Error, Result};

/// A parsed CSV, optionally rescaled onto the unit cube.
#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub target_name: String,
    /// Set when the features were min-max rescaled; maps raw rows onto the
    /// rows of `dataset`.
    pub scaler: Option<MinMaxScaler>,
}

/// Columns of the standard 506-row Boston housing table, in file order.
pub const BOSTON_COLUMNS: [&str; 14] = [
    "CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE", "DIS", "RAD", "TAX", "PTRATIO", "B", "LSTAT", "MEDV",
];
pub const BOSTON_ROWS: usize = 506;

fn ingest_at(path: &Path, row: Option<usize>, column: Option<&str>, message: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        row,
        column: column.map(str::to_string),
        message: message.into(),
    }
}

/// Read a headered numeric CSV. Every column except `target_column` becomes
/// a feature, in file order. Rows are numbered from 1 after the header.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| ingest_at(path, None, None, e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| ingest_at(path, None, None, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(ingest_at(path, None, None, "missing header"));
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| ingest_at(path, Some(row), None, e.to_string()))?;
        if record.len() != header.len() {
            return Err(ingest_at(
                path,
                Some(row),
                None,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let values = record
            .iter()
            .zip(&header)
            .map(|(field, name)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ingest_at(path, Some(row), Some(name), format!("not a finite number: `{field}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(ingest_at(path, None, None, "no data rows"));
    }
    Ok((header, rows))
}

/// Load a training table. With `normalize`, features are min-max rescaled
/// onto `[0, 1]` and the scaler is returned alongside.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str, normalize: bool) -> Result<LoadedCsv> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    let target = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| ingest_at(path, None, Some(target_column), "target column not found"))?;
    if header.len() < 2 {
        return Err(ingest_at(path, None, None, "need at least one feature column"));
    }
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target)
        .map(|(_, h)| h.clone())
        .collect();
    let p = names.len();
    let mut features = Vec::with_capacity(rows.len() * p);
    let mut targets = Vec::with_capacity(rows.len());
    for row in &rows {
        for (j, &v) in row.iter().enumerate() {
            if j == target {
                targets.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let dataset = Dataset::new(p, features, targets)?.with_feature_names(names)?;
    let (dataset, scaler) = if normalize {
        let scaler = MinMaxScaler::fit(&dataset);
        (scaler.transform(&dataset)?, Some(scaler))
    } else {
        (dataset, None)
    };
    Ok(LoadedCsv {
        dataset,
        target_name: target_column.to_string(),
        scaler,
    })
}

/// Read query rows. When `names` is given, those columns are selected by
/// name (extra columns are ignored); otherwise all columns are used.
pub fn load_features(path: impl AsRef<Path>, names: Option<&[String]>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let (header, rows) = read_table(path)?;
    let Some(names) = names else {
        return Ok(rows);
    };
    let idx = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| ingest_at(path, None, Some(n), "feature column not found"))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect())
}

/// Check that a loaded table looks like the standard Boston housing data.
pub fn validate_boston_profile(loaded: &LoadedCsv) -> Result<()> {
    let d = &loaded.dataset;
    let names = d.feature_names().unwrap_or(&[]);
    let expected: Vec<&str> = BOSTON_COLUMNS.iter().copied().filter(|&c| c != "MEDV").collect();
    if d.n() != BOSTON_ROWS || loaded.target_name != "MEDV" || names.iter().map(String::as_str).ne(expected) {
        return Err(Error::Input(format!(
            "expected {BOSTON_ROWS} rows with columns {} (target MEDV); found {} rows, target `{}`",
            BOSTON_COLUMNS.join(","),
            d.n(),
            loaded.target_name
        )));
    }
    Ok(())
}

/// Write a dataset with a header; the target is the last column.
pub fn write_dataset_csv(path: impl AsRef<Path>, data: &Dataset, target_name: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (1..=data.p()).map(|j| format!("x{j}")).collect(),
    };
    header.push(target_name.to_string());
    w.write_record(&header)?;
    for (row, y) in data.rows().zip(data.targets()) {
        w.write_record(row.iter().chain(std::iter::once(y)).map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_normalizes() {
        let f = write("a,y,b\n0,1,10\n2,2,30\n1,3,20\n");
        let raw = load_csv(f.path(), "y", false).unwrap();
        assert_eq!(raw.dataset.p(), 2);
        assert_eq!(raw.dataset.row(1), &[2.0, 30.0]);
        assert_eq!(raw.dataset.targets(), &[1.0, 2.0, 3.0]);
        let norm = load_csv(f.path(), "y", true).unwrap();
        assert_eq!(norm.dataset.row(1), &[1.0, 1.0]);
        assert_eq!(norm.dataset.row(2), &[0.5, 0.5]);
        assert!(norm.dataset.is_unit_cube());
    }

    #[test]
    fn reports_bad_cell() {
        let f = write("a,y\n1,2\nfoo,3\n");
        match load_csv(f.path(), "y", false) {
            Err(Error::Ingest { row, column, .. }) => {
                assert_eq!(row, Some(2));
                assert_eq!(column.as_deref(), Some("a"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_target_and_empty_file() {
        let f = write("a,b\n1,2\n");
        assert!(matches!(load_csv(f.path(), "y", false), Err(Error::Ingest { .. })));
        let e = write("a,y\n");
        assert!(matches!(load_csv(e.path(), "y", false), Err(Error::Ingest { .. })));
        assert!(load_csv("/nonexistent/file.csv", "y", false).is_err());
    }

    #[test]
    fn round_trip_and_select_by_name() {
        let d = Dataset::from_rows(&[vec![0.25, 0.5], vec![0.75, 0.125]], vec![1.5, -2.0])
            .unwrap()
            .with_feature_names(vec!["u".into(), "v".into()])
            .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_dataset_csv(f.path(), &d, "y").unwrap();
        let back = load_csv(f.path(), "y", false).unwrap();
        assert_eq!(back.dataset, d);
        let names = vec!["v".to_string(), "u".to_string()];
        let rows = load_features(f.path(), Some(&names)).unwrap();
        assert_eq!(rows[0], vec![0.5, 0.25]);
    }
}
