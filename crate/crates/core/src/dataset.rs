//! Tabular data: a dense feature matrix with optional response and a
//! missingness mask, plus CSV ingestion/emission.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<F> {
    data: Vec<F>,
    rows: usize,
    cols: usize,
}

impl<F: Scalar> Matrix<F> {
    pub fn from_vec(data: Vec<F>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { data, rows, cols })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![F::zero(); rows * cols],
            rows,
            cols,
        }
    }

    /// Builds a matrix from one row per element of `rows`.
    pub fn from_rows(rows: &[&[F]]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(data, n, p)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> F {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: F) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[F] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<F> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// New matrix keeping `cols` (in the given order) for the given rows.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            for &c in cols {
                data.push(self.get(r, c));
            }
        }
        Self {
            data,
            rows: rows.len(),
            cols: cols.len(),
        }
    }
}

/// A feature matrix with optional response vector and missingness mask.
///
/// Missing cells hold `NaN` as a sentinel; the mask is authoritative.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dataset<F> {
    features: Matrix<F>,
    response: Option<Vec<F>>,
    missing_mask: Vec<bool>,
    feature_names: Vec<String>,
    response_name: Option<String>,
}

impl<F: Scalar> Dataset<F> {
    /// Builds a complete (mask all false) dataset.
    pub fn new(
        features: Matrix<F>,
        response: Option<Vec<F>>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let mask = vec![false; features.rows() * features.cols()];
        Self::with_mask(features, response, mask, feature_names, None)
    }

    pub fn with_mask(
        features: Matrix<F>,
        response: Option<Vec<F>>,
        missing_mask: Vec<bool>,
        feature_names: Vec<String>,
        response_name: Option<String>,
    ) -> Result<Self> {
        let (n, p) = (features.rows(), features.cols());
        if n == 0 || p == 0 {
            return Err(Error::Domain(format!(
                "dataset must have n >= 1 and p >= 1, got n={n}, p={p}"
            )));
        }
        if let Some(y) = &response {
            if y.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: y.len(),
                });
            }
        }
        if missing_mask.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                actual: missing_mask.len(),
            });
        }
        if feature_names.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: feature_names.len(),
            });
        }
        Ok(Self {
            features,
            response,
            missing_mask,
            feature_names,
            response_name,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix<F> {
        &self.features
    }

    pub fn features_mut(&mut self) -> &mut Matrix<F> {
        &mut self.features
    }

    pub fn response(&self) -> Option<&[F]> {
        self.response.as_deref()
    }

    pub fn set_response(&mut self, response: Option<Vec<F>>, name: Option<String>) {
        self.response = response;
        self.response_name = name;
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn response_name(&self) -> Option<&str> {
        self.response_name.as_deref()
    }

    #[inline]
    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing_mask[row * self.n_features() + col]
    }

    pub fn set_missing(&mut self, row: usize, col: usize, missing: bool) {
        let p = self.n_features();
        self.missing_mask[row * p + col] = missing;
        if missing {
            self.features.set(row, col, F::nan());
        }
    }

    pub fn has_missing(&self) -> bool {
        self.missing_mask.iter().any(|&m| m)
    }

    /// Number of missing cells per column.
    pub fn missing_counts(&self) -> Vec<usize> {
        let p = self.n_features();
        let mut counts = vec![0usize; p];
        for (idx, &m) in self.missing_mask.iter().enumerate() {
            if m {
                counts[idx % p] += 1;
            }
        }
        counts
    }

    /// Column indices with at least one missing cell.
    pub fn missing_columns(&self) -> Vec<usize> {
        self.missing_counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, _)| j)
            .collect()
    }

    /// Fails when any feature cell is missing or non-finite; estimators call
    /// this before consuming a dataset.
    pub fn require_complete(&self) -> Result<()> {
        if self.has_missing() {
            return Err(Error::Domain(
                "dataset contains missing cells; impute before fitting".into(),
            ));
        }
        for row in 0..self.n_rows() {
            for &v in self.features.row(row).iter() {
                if !v.is_finite() {
                    return Err(Error::Domain(format!(
                        "non-finite feature value in row {row}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn require_response(&self) -> Result<&[F]> {
        self.response
            .as_deref()
            .ok_or_else(|| Error::Config("dataset has no response column".into()))
    }
}

/// Tokens (after trimming) treated as missing cells on load.
fn is_missing_token(tok: &str) -> bool {
    tok.is_empty() || tok.eq_ignore_ascii_case("na") || tok.eq_ignore_ascii_case("nan")
}

/// Loads a CSV file with a mandatory header row.
///
/// Every non-missing cell must parse as a number; empty or `NA`/`NaN` cells
/// set the missing mask. When `response_column` is given, that column is
/// split out of the features; a missing value in it is an error.
pub fn load_dataset<F: Scalar>(
    path: impl AsRef<Path>,
    response_column: Option<&str>,
) -> Result<Dataset<F>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;

    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let response_idx = match response_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Config(format!("response column '{name}' not found")))?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != response_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let p = feature_names.len();
    if p == 0 {
        return Err(Error::Config(
            "file has no feature columns besides the response".into(),
        ));
    }

    let mut data: Vec<F> = Vec::new();
    let mut mask: Vec<bool> = Vec::new();
    let mut response: Vec<F> = Vec::new();
    let mut n = 0usize;

    for (rec_idx, record) in reader.records().enumerate() {
        let row_no = rec_idx + 1;
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row: row_no,
                message: format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            });
        }
        for (col, tok) in record.iter().enumerate() {
            let is_response = Some(col) == response_idx;
            if is_missing_token(tok) {
                if is_response {
                    return Err(Error::Parse {
                        row: row_no,
                        message: format!("missing response value in column '{}'", headers[col]),
                    });
                }
                data.push(F::nan());
                mask.push(true);
                continue;
            }
            let value: f64 = tok.parse().map_err(|_| Error::Parse {
                row: row_no,
                message: format!("non-numeric value '{tok}' in column '{}'", headers[col]),
            })?;
            if is_response {
                response.push(F::from_f64_lossy(value));
            } else {
                data.push(F::from_f64_lossy(value));
                mask.push(false);
            }
        }
        n += 1;
    }

    if n == 0 {
        return Err(Error::Domain("CSV file has no data rows".into()));
    }

    let features = Matrix::from_vec(data, n, p)?;
    Dataset::with_mask(
        features,
        response_idx.map(|_| response),
        mask,
        feature_names,
        response_column.map(|s| s.to_string()),
    )
}

/// Writes a dataset back to CSV with the same schema it loads from:
/// feature columns by name, the response column (if any) appended, and
/// missing cells emitted as empty fields.
pub fn save_dataset<F: Scalar>(dataset: &Dataset<F>, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = dataset.feature_names().to_vec();
    if dataset.response().is_some() {
        header.push(dataset.response_name().unwrap_or("y").to_string());
    }
    writer.write_record(&header)?;

    for row in 0..dataset.n_rows() {
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for col in 0..dataset.n_features() {
            if dataset.is_missing(row, col) {
                record.push(String::new());
            } else {
                record.push(format!("{}", dataset.features().get(row, col)));
            }
        }
        if let Some(y) = dataset.response() {
            record.push(format!("{}", y[row]));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn loads_complete_file() {
        let f = write_temp("x1,x2,y\n1,2,3\n4,5,6\n7,8,9\n");
        let d: Dataset<f64> = load_dataset(f.path(), Some("y")).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.response(), Some(&[3.0, 6.0, 9.0][..]));
        assert!(!d.has_missing());
        assert_eq!(d.feature_names(), &["x1".to_string(), "x2".to_string()]);
    }

    #[test]
    fn empty_cell_sets_mask_only_there() {
        let f = write_temp("x1,x2,y\n1,2,3\n4,,6\n7,8,9\n");
        let d: Dataset<f64> = load_dataset(f.path(), Some("y")).unwrap();
        assert!(d.is_missing(1, 1));
        assert!(d.features().get(1, 1).is_nan());
        let missing: usize = d.missing_counts().iter().sum();
        assert_eq!(missing, 1);
    }

    #[test]
    fn non_numeric_token_names_row() {
        let f = write_temp("x1,x2,y\n1,2,3\n4,abc,6\n");
        let err = load_dataset::<f64>(f.path(), Some("y")).unwrap_err();
        match err {
            Error::Parse { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("abc"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_response_column_is_config_error() {
        let f = write_temp("x1,x2\n1,2\n");
        let err = load_dataset::<f64>(f.path(), Some("y")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn csv_round_trip_preserves_mask_and_values() {
        let f = write_temp("a,b,y\n1.5,,0.25\n,2.25,1\n3,4,2\n");
        let d: Dataset<f64> = load_dataset(f.path(), Some("y")).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_dataset(&d, out.path()).unwrap();
        let d2: Dataset<f64> = load_dataset(out.path(), Some("y")).unwrap();
        assert_eq!(d.n_rows(), d2.n_rows());
        for r in 0..d.n_rows() {
            for c in 0..d.n_features() {
                assert_eq!(d.is_missing(r, c), d2.is_missing(r, c));
                if !d.is_missing(r, c) {
                    assert_eq!(d.features().get(r, c), d2.features().get(r, c));
                }
            }
        }
        assert_eq!(d.response(), d2.response());
    }

    #[test]
    fn ragged_row_is_parse_error() {
        let f = write_temp("x1,x2,y\n1,2,3\n4,5\n");
        let err = load_dataset::<f64>(f.path(), Some("y")).unwrap_err();
        assert!(matches!(err, Error::Csv(_) | Error::Parse { .. }));
    }
}
