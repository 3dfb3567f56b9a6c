//! Model fixtures shared by the benchmarks.

use mlik::data::{
    bundled_data_dir, epilepsy_glmm, load_bundled, load_epilepsy, make_gaussian_synthetic,
    pima_design, PimaModel,
};
use mlik::model::{BinaryRegression, GaussLinReg};
use mlik::ModelSpec;

/// Logistic regression on the Pima data with `σβ² = 100`.
pub fn pima_logit(model: PimaModel) -> ModelSpec {
    let pima = load_bundled(&bundled_data_dir(), "pima").expect("bundled pima data");
    let (y, x) = pima_design(&pima, model).expect("pima design");
    ModelSpec::LogitReg(BinaryRegression::new(y, x, 0.0, 100.0).expect("valid prior"))
}

/// Linear regression on the simulated `n = 47` design with `p` covariates.
pub fn synthetic_gausslinreg(p: usize) -> ModelSpec {
    let ds = make_gaussian_synthetic(47, p, 1).expect("synthetic data");
    let cols: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let x = ds.design(&cols).expect("design");
    let y = ds.column("y").expect("response");
    ModelSpec::GaussLinReg(GaussLinReg::new(y, x, 0.0, 100.0, 1.0, 1.0).expect("valid prior"))
}

/// Epilepsy GLMM with the outlying subject removed.
pub fn epilepsy() -> ModelSpec {
    let dir = bundled_data_dir();
    load_bundled(&dir, "epilepsy").expect("bundled epilepsy data");
    let long = load_epilepsy(dir.join("epilepsy.csv"), true).expect("epilepsy panel");
    ModelSpec::PoissonGlmm(epilepsy_glmm(&long).expect("glmm"))
}
