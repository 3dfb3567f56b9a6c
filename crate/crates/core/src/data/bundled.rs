use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{load_csv, sha256_hex, standardize, Dataset, Schema};
use crate::error::{Error, Result};
use crate::model::PoissonGlmm;
use crate::numkit::{Matrix, Vector};

/// Subject label of the epilepsy outlier (baseline count 151).
pub const EPILEPSY_OUTLIER: i64 = 49;

const MANIFEST: &str = "MANIFEST.csv";

/// One line of `MANIFEST.csv`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub rows: usize,
}

/// Directory holding the bundled CSV files: `$MLIK_DATA_DIR` if set,
/// otherwise the `data/` directory at the workspace root.
pub fn bundled_data_dir() -> PathBuf {
    match std::env::var_os("MLIK_DATA_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST);
    let mut reader = csv::Reader::from_path(&path)?;
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Loads `<name>.csv` from `dir`, checking its sha-256 and row count
/// against the manifest.
pub fn load_bundled(dir: &Path, name: &str) -> Result<Dataset> {
    let file = format!("{name}.csv");
    let entry = read_manifest(dir)?
        .into_iter()
        .find(|e| e.name == file)
        .ok_or_else(|| Error::data(name, "not listed in the data manifest"))?;
    let path = dir.join(&file);
    let bytes = fs::read(&path)?;
    let digest = sha256_hex(&bytes);
    if digest != entry.sha256 {
        return Err(Error::data(
            name,
            format!(
                "checksum mismatch: manifest {} but file hashes to {digest}",
                entry.sha256
            ),
        ));
    }
    let mut ds = super::parse_csv(name, &bytes, &Schema::all().rows(entry.rows))?;
    ds.checksum = Some(digest);
    ds.provenance = format!("bundled {}", path.display());
    Ok(ds)
}

/// Covariate sets for the Pima diabetes models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PimaModel {
    M1,
    M2,
}

impl PimaModel {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            PimaModel::M1 => &["npreg", "glu", "bmi", "ped"],
            PimaModel::M2 => &["npreg", "glu", "bmi", "ped", "age"],
        }
    }
}

/// Response (`type`) and design matrix with intercept and standardized
/// covariates.
pub fn pima_design(pima: &Dataset, model: PimaModel) -> Result<(Vector, Matrix)> {
    let cols = model.columns();
    let std = standardize(pima, cols)?;
    Ok((pima.column("type")?, std.design(cols)?))
}

/// Reads the wide epilepsy file (`subject, base, y1..y4, trt`) into long
/// format with columns `subject, t, y, x1, x2, offset`. Period 0 is the
/// 8-week baseline (offset 8); periods 1–4 are 2-week windows (offset 2).
/// `x1` marks the post-baseline periods and `x2` the treatment group.
pub fn load_epilepsy(path: impl AsRef<Path>, remove_outlier: bool) -> Result<Dataset> {
    let wide = load_csv(
        path,
        &Schema::new(&["subject", "base", "y1", "y2", "y3", "y4", "trt"]),
    )?;
    let n = wide.n_rows();
    let mut seen = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(5 * n);
    for i in 0..n {
        let subject = wide.data[(i, 0)];
        if subject.fract() != 0.0 {
            return Err(Error::data(
                &wide.name,
                format!("subject label {subject} is not an integer"),
            ));
        }
        if seen.contains(&subject) {
            return Err(Error::data(
                &wide.name,
                format!("malformed panel: subject {subject} has more than 5 records"),
            ));
        }
        seen.push(subject);
        if remove_outlier && subject as i64 == EPILEPSY_OUTLIER {
            continue;
        }
        let trt = wide.data[(i, 6)];
        for t in 0..5 {
            let (x1, offset) = if t == 0 { (0.0, 8.0) } else { (1.0, 2.0) };
            rows.extend_from_slice(&[subject, t as f64, wide.data[(i, 1 + t)], x1, trt, offset]);
        }
    }
    let columns = ["subject", "t", "y", "x1", "x2", "offset"]
        .map(String::from)
        .to_vec();
    let mut ds = Dataset::new(
        "epilepsy-long",
        columns,
        Matrix::from_row_slice(rows.len() / 6, 6, &rows),
        format!("{} in long format", wide.provenance),
    )?;
    ds.checksum = wide.checksum;
    Ok(ds)
}

/// Poisson GLMM for the long-format epilepsy data.
pub fn epilepsy_glmm(long: &Dataset) -> Result<PoissonGlmm> {
    let labels: Vec<i64> = long.column("subject")?.iter().map(|&s| s as i64).collect();
    PoissonGlmm::new(
        long.column("y")?,
        long.column("x1")?,
        long.column("x2")?,
        long.column("offset")?,
        &labels,
    )
}
