//! Datasets: CSV loading against a schema, checksum manifests for the
//! bundled files, standardization, and synthetic generators.

mod bundled;
mod synthetic;

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numkit::stats::{mean, sd};
use crate::numkit::{Matrix, Vector};

pub use bundled::{
    bundled_data_dir, epilepsy_glmm, load_bundled, load_epilepsy, pima_design, read_manifest,
    ManifestEntry, PimaModel, EPILEPSY_OUTLIER,
};
pub use synthetic::{
    bernoulli_true_beta, gaussian_true_beta, make_bernoulli_synthetic, make_gaussian_synthetic,
};

/// Location and scale removed from a standardized column.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnTransform {
    pub column: String,
    pub mean: f64,
    pub sd: f64,
}

/// A named numeric table. Rows are observations.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub columns: Vec<String>,
    pub data: Matrix,
    pub provenance: String,
    /// Hex sha-256 of the source file, if loaded from disk.
    pub checksum: Option<String>,
    pub transforms: Vec<ColumnTransform>,
}

/// Columns to extract and, optionally, the number of rows the file must have.
/// An empty column list keeps every column in file order.
#[derive(Clone, Debug, Default)]
pub struct Schema {
    pub columns: Vec<String>,
    pub expected_rows: Option<usize>,
}

impl Schema {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            expected_rows: None,
        }
    }

    pub fn all() -> Self {
        Self::default()
    }

    pub fn rows(mut self, n: usize) -> Self {
        self.expected_rows = Some(n);
        self
    }
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<String>,
        data: Matrix,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let name = name.into();
        if columns.len() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.ncols(),
                actual: columns.len(),
                context: "dataset column names",
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(name, "non-finite value"));
        }
        Ok(Self {
            name,
            columns,
            data,
            provenance: provenance.into(),
            checksum: None,
            transforms: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn column_index(&self, column: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| Error::MissingColumn {
                source_name: self.name.clone(),
                column: column.to_string(),
            })
    }

    pub fn column(&self, column: &str) -> Result<Vector> {
        let j = self.column_index(column)?;
        Ok(self.data.column(j).into_owned())
    }

    /// Design matrix with a leading intercept column followed by `columns`.
    pub fn design(&self, columns: &[&str]) -> Result<Matrix> {
        let idx: Vec<usize> = columns
            .iter()
            .map(|c| self.column_index(c))
            .collect::<Result<_>>()?;
        Ok(Matrix::from_fn(self.n_rows(), idx.len() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                self.data[(i, idx[j - 1])]
            }
        }))
    }
}

/// Hex sha-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads a headed, comma-separated numeric file.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let bytes = fs::read(path)?;
    let mut ds = parse_csv(&name, &bytes, schema)?;
    ds.checksum = Some(sha256_hex(&bytes));
    ds.provenance = path.display().to_string();
    Ok(ds)
}

/// Parses CSV bytes; `name` labels errors.
pub fn parse_csv(name: &str, bytes: &[u8], schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::data(name, "no header row"));
    }
    let wanted: Vec<String> = if schema.columns.is_empty() {
        header.clone()
    } else {
        schema.columns.clone()
    };
    let idx: Vec<usize> = wanted
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| Error::MissingColumn {
                    source_name: name.to_string(),
                    column: c.clone(),
                })
        })
        .collect::<Result<_>>()?;

    let mut values = Vec::new();
    let mut n = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (&j, col) in idx.iter().zip(&wanted) {
            let cell = record.get(j).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                source_name: name.to_string(),
                row: row + 1,
                column: col.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    source_name: name.to_string(),
                    row: row + 1,
                    column: col.clone(),
                    value: cell.to_string(),
                });
            }
            values.push(v);
        }
        n += 1;
    }
    if let Some(expected) = schema.expected_rows {
        if expected != n {
            return Err(Error::RowCount {
                source_name: name.to_string(),
                expected,
                actual: n,
            });
        }
    }
    let data = Matrix::from_row_slice(n, wanted.len(), &values);
    Dataset::new(name, wanted, data, "")
}

/// Centers and scales `columns` to sample mean 0 and SD 1 (divisor n − 1).
pub fn standardize(ds: &Dataset, columns: &[&str]) -> Result<Dataset> {
    let mut out = ds.clone();
    for &c in columns {
        let j = ds.column_index(c)?;
        let col: Vec<f64> = ds.data.column(j).iter().copied().collect();
        if col.len() < 2 {
            return Err(Error::data(
                &ds.name,
                format!("column `{c}` needs two rows to standardize"),
            ));
        }
        let (m, s) = (mean(&col), sd(&col));
        if !(s > 0.0) {
            return Err(Error::data(
                &ds.name,
                format!("column `{c}` has zero variance"),
            ));
        }
        for (i, v) in col.iter().enumerate() {
            out.data[(i, j)] = (v - m) / s;
        }
        out.transforms.push(ColumnTransform {
            column: c.to_string(),
            mean: m,
            sd: s,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, schema: &Schema) -> Result<Dataset> {
        parse_csv("t", text.as_bytes(), schema)
    }

    #[test]
    fn empty_file_fails() {
        assert!(matches!(parse("", &Schema::all()), Err(Error::Data { .. })));
    }

    #[test]
    fn named_errors() {
        let text = "a,b\n1,2\n3,x\n";
        match parse(text, &Schema::new(&["a", "c"])) {
            Err(Error::MissingColumn { column, .. }) => assert_eq!(column, "c"),
            other => panic!("{other:?}"),
        }
        match parse(text, &Schema::new(&["b"])) {
            Err(Error::NonNumeric {
                row, column, value, ..
            }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "b", "x"))
            }
            other => panic!("{other:?}"),
        }
        match parse(text, &Schema::new(&["a"]).rows(3)) {
            Err(Error::RowCount {
                expected, actual, ..
            }) => assert_eq!((expected, actual), (3, 2)),
            other => panic!("{other:?}"),
        }
        assert!(parse("a\nNaN\n", &Schema::all()).is_err());
    }

    #[test]
    fn schema_selects_and_orders() {
        let ds = parse("a,b,c\n1,2,3\n4,5,6\n", &Schema::new(&["c", "a"]).rows(2)).unwrap();
        assert_eq!(ds.columns, vec!["c", "a"]);
        assert_eq!(ds.data, Matrix::from_row_slice(2, 2, &[3.0, 1.0, 6.0, 4.0]));
        let x = ds.design(&["a"]).unwrap();
        assert_eq!(x, Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 4.0]));
    }

    #[test]
    fn standardize_hand_values() {
        let ds = parse("a,b\n1,7\n2,7\n3,7\n", &Schema::all()).unwrap();
        let s = standardize(&ds, &["a"]).unwrap();
        assert_eq!(s.column("a").unwrap().as_slice(), &[-1.0, 0.0, 1.0]);
        assert_eq!(
            s.transforms,
            vec![ColumnTransform {
                column: "a".into(),
                mean: 2.0,
                sd: 1.0
            }]
        );
        assert!(standardize(&ds, &["b"]).is_err());
    }

    #[test]
    fn standardize_is_location_invariant() {
        let a = parse("a\n1.5\n-2\n4\n0.25\n", &Schema::all()).unwrap();
        let b = parse("a\n101.5\n98\n104\n100.25\n", &Schema::all()).unwrap();
        let sa = standardize(&a, &["a"]).unwrap();
        let sb = standardize(&b, &["a"]).unwrap();
        for (x, y) in sa.data.iter().zip(sb.data.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
