use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    bundled_data_dir, epilepsy_glmm, load_bundled, load_csv, load_epilepsy,
    make_bernoulli_synthetic, make_gaussian_synthetic, standardize, Dataset, Schema,
};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorId};
use crate::model::{BinaryRegression, GaussLinReg, ModelSpec, ToyGaussian};

/// Default size of the synthetic Gaussian regression instance.
pub const SYNTHETIC_GAUSSIAN: (usize, usize, u64) = (47, 8, 1);
/// Default size of the synthetic probit instance.
pub const SYNTHETIC_BERNOULLI: (usize, usize, u64) = (2000, 11, 1);

/// Model family named in a scenario file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Toy,
    Gausslinreg,
    Probit,
    Logit,
    Glmm,
}

/// One scenario exactly as written (after merging `[defaults]`).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDef {
    pub model: ModelKind,
    pub estimator: EstimatorId,
    /// Free-form row label used by the table layouts (e.g. "M1").
    pub label: Option<String>,
    pub dataset: Option<String>,
    pub response: Option<String>,
    pub covariates: Option<Vec<String>>,
    #[serde(default)]
    pub standardize: bool,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub data_seed: Option<u64>,
    pub remove_outlier: Option<bool>,
    pub y: Option<f64>,
    pub sigma0: Option<f64>,
    pub sigma1: Option<f64>,
    pub prior_mean: Option<f64>,
    pub prior_var: Option<f64>,
    pub prior_sd: Option<f64>,
    pub shape: Option<f64>,
    pub rate: Option<f64>,
    #[serde(default)]
    pub config: EstimatorConfig,
}

/// Hyperparameters recorded with every result.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prior_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prior_var: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rate: Option<f64>,
}

/// A scenario with its model built and configuration fixed.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub id: String,
    pub label: Option<String>,
    pub model: ModelKind,
    pub dataset: String,
    pub estimator: EstimatorId,
    pub hyper: Hyper,
    pub config: EstimatorConfig,
    pub spec: ModelSpec,
}

/// Parsed scenario file: definitions keyed by id, in id order.
#[derive(Clone, Debug)]
pub struct SuiteFile {
    pub scenarios: BTreeMap<String, ScenarioDef>,
    /// Directory that relative dataset paths are resolved against.
    pub base_dir: PathBuf,
}

fn merge(base: &toml::Table, over: &toml::Table) -> toml::Table {
    let mut out = base.clone();
    for (k, v) in over {
        match (out.get(k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => {
                let merged = merge(a, b);
                out.insert(k.clone(), toml::Value::Table(merged));
            }
            _ => {
                out.insert(k.clone(), v.clone());
            }
        }
    }
    out
}

impl SuiteFile {
    /// Parses a scenario file: an optional `[defaults]` table merged into
    /// every `[scenarios.<id>]` table. `seed_override` replaces the seed of
    /// scenarios that do not set one themselves.
    pub fn parse(text: &str, base_dir: &Path, seed_override: Option<u64>) -> Result<Self> {
        let root: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for key in root.keys() {
            if key != "defaults" && key != "scenarios" {
                return Err(Error::Config(format!("unknown top-level section `{key}`")));
            }
        }
        let table = |key: &str| -> Result<toml::Table> {
            match root.get(key) {
                None => Ok(toml::Table::new()),
                Some(toml::Value::Table(t)) => Ok(t.clone()),
                Some(_) => Err(Error::Config(format!("`{key}` must be a table"))),
            }
        };
        let mut defaults = table("defaults")?;
        if let Some(seed) = seed_override {
            let mut cfg = match defaults.remove("config") {
                Some(toml::Value::Table(t)) => t,
                _ => toml::Table::new(),
            };
            cfg.insert("seed".into(), toml::Value::Integer(seed as i64));
            defaults.insert("config".into(), toml::Value::Table(cfg));
        }
        let mut scenarios = BTreeMap::new();
        for (id, value) in table("scenarios")? {
            let toml::Value::Table(t) = value else {
                return Err(Error::Config(format!("scenario `{id}` must be a table")));
            };
            let merged = merge(&defaults, &t);
            let def: ScenarioDef = merged
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(format!("scenario `{id}`: {e}")))?;
            def.config
                .validate()
                .map_err(|e| Error::Config(format!("scenario `{id}`: {e}")))?;
            scenarios.insert(id, def);
        }
        Ok(Self {
            scenarios,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn from_path(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, dir, seed_override)
    }

    /// Loads datasets and builds every model. Any failure here is an
    /// unresolved reference.
    pub fn resolve(&self, data_dir: Option<&Path>) -> Result<Vec<Scenario>> {
        let data_dir = data_dir
            .map(Path::to_path_buf)
            .unwrap_or_else(bundled_data_dir);
        let mut cache: HashMap<String, Dataset> = HashMap::new();
        self.scenarios
            .iter()
            .map(|(id, def)| {
                resolve_one(id, def, &self.base_dir, &data_dir, &mut cache)
                    .map_err(|e| Error::Config(format!("scenario `{id}`: {e}")))
            })
            .collect()
    }
}

fn need(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("missing `{what}`")))
}

fn load_dataset(
    def: &ScenarioDef,
    name: &str,
    base_dir: &Path,
    data_dir: &Path,
    cache: &mut HashMap<String, Dataset>,
) -> Result<Dataset> {
    let key = format!(
        "{name}|{:?}|{:?}|{:?}|{:?}",
        def.n, def.p, def.data_seed, def.remove_outlier
    );
    if let Some(ds) = cache.get(&key) {
        return Ok(ds.clone());
    }
    let ds = match name {
        "pima" | "uscrime" => load_bundled(data_dir, name)?,
        "synthetic-gaussian" => {
            let (n, p, s) = SYNTHETIC_GAUSSIAN;
            make_gaussian_synthetic(
                def.n.unwrap_or(n),
                def.p.unwrap_or(p),
                def.data_seed.unwrap_or(s),
            )?
        }
        "synthetic-bernoulli" => {
            let (n, p, s) = SYNTHETIC_BERNOULLI;
            make_bernoulli_synthetic(
                def.n.unwrap_or(n),
                def.p.unwrap_or(p),
                def.data_seed.unwrap_or(s),
            )?
        }
        "epilepsy" => {
            load_bundled(data_dir, "epilepsy")?;
            load_epilepsy(
                data_dir.join("epilepsy.csv"),
                def.remove_outlier.unwrap_or(true),
            )?
        }
        path if path.ends_with(".csv") => {
            let full = base_dir.join(path);
            match def.model {
                ModelKind::Glmm => load_epilepsy(&full, def.remove_outlier.unwrap_or(true))?,
                _ => load_csv(&full, &Schema::all())?,
            }
        }
        other => return Err(Error::Config(format!("unknown dataset `{other}`"))),
    };
    cache.insert(key, ds.clone());
    Ok(ds)
}

fn regression_data(
    def: &ScenarioDef,
    ds: &Dataset,
) -> Result<(crate::numkit::Vector, crate::numkit::Matrix)> {
    let response = def.response.clone().unwrap_or_else(|| {
        if ds.name == "pima" {
            "type".into()
        } else {
            "y".into()
        }
    });
    let covariates: Vec<String> = match &def.covariates {
        Some(c) => c.clone(),
        None if ds.name.contains("-synthetic-") => ds
            .columns
            .iter()
            .filter(|c| **c != response)
            .cloned()
            .collect(),
        None => {
            return Err(Error::Config(format!(
                "dataset `{}` needs an explicit `covariates` list",
                ds.name
            )))
        }
    };
    let cols: Vec<&str> = covariates.iter().map(String::as_str).collect();
    let ds = if def.standardize {
        standardize(ds, &cols)?
    } else {
        ds.clone()
    };
    Ok((ds.column(&response)?, ds.design(&cols)?))
}

fn resolve_one(
    id: &str,
    def: &ScenarioDef,
    base_dir: &Path,
    data_dir: &Path,
    cache: &mut HashMap<String, Dataset>,
) -> Result<Scenario> {
    let prior_var = match (def.prior_var, def.prior_sd) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "set only one of `prior_var` and `prior_sd`".into(),
            ))
        }
        (Some(v), None) => Some(v),
        (None, Some(s)) => Some(s * s),
        (None, None) => None,
    };
    let mut hyper = Hyper::default();
    let dataset_name = def.dataset.clone().unwrap_or_else(|| "none".into());
    let spec = match def.model {
        ModelKind::Toy => {
            if def.dataset.is_some() {
                return Err(Error::Config("the toy model takes no dataset".into()));
            }
            let (y, s0, s1) = (
                need(def.y, "y")?,
                need(def.sigma0, "sigma0")?,
                need(def.sigma1, "sigma1")?,
            );
            hyper.y = Some(y);
            hyper.sigma0 = Some(s0);
            hyper.sigma1 = Some(s1);
            ModelSpec::ToyGaussian(ToyGaussian::new(y, s0, s1)?)
        }
        ModelKind::Gausslinreg | ModelKind::Probit | ModelKind::Logit => {
            let name = def
                .dataset
                .as_deref()
                .ok_or_else(|| Error::Config("missing `dataset`".into()))?;
            let ds = load_dataset(def, name, base_dir, data_dir, cache)?;
            let (y, x) = regression_data(def, &ds)?;
            let mean = def.prior_mean.unwrap_or(0.0);
            let var = need(prior_var, "prior_var")?;
            hyper.prior_mean = Some(mean);
            hyper.prior_var = Some(var);
            match def.model {
                ModelKind::Gausslinreg => {
                    let (a, b) = (def.shape.unwrap_or(1.0), def.rate.unwrap_or(1.0));
                    hyper.shape = Some(a);
                    hyper.rate = Some(b);
                    ModelSpec::GaussLinReg(GaussLinReg::new(y, x, mean, var, a, b)?)
                }
                ModelKind::Probit => ModelSpec::ProbitReg(BinaryRegression::new(y, x, mean, var)?),
                _ => ModelSpec::LogitReg(BinaryRegression::new(y, x, mean, var)?),
            }
        }
        ModelKind::Glmm => {
            let name = def.dataset.as_deref().unwrap_or("epilepsy");
            let ds = load_dataset(def, name, base_dir, data_dir, cache)?;
            let mut m = epilepsy_glmm(&ds)?;
            if let Some(v) = prior_var {
                m.beta_prior_var = v;
            }
            hyper.prior_var = Some(m.beta_prior_var);
            ModelSpec::PoissonGlmm(m)
        }
    };
    Ok(Scenario {
        id: id.to_string(),
        label: def.label.clone(),
        model: def.model,
        dataset: dataset_name,
        estimator: def.estimator,
        hyper,
        config: def.config.clone(),
        spec,
    })
}
