use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of an evidence method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorId {
    Exact,
    Quadrature,
    Inla,
    Laplace,
    LaplaceMap,
    HarmonicMean,
    Chib,
    ChibJeliazkov,
    PowerPosterior,
    Ais,
    NestedSampling,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 11] = [
        EstimatorId::Exact,
        EstimatorId::Quadrature,
        EstimatorId::Inla,
        EstimatorId::Laplace,
        EstimatorId::LaplaceMap,
        EstimatorId::HarmonicMean,
        EstimatorId::Chib,
        EstimatorId::ChibJeliazkov,
        EstimatorId::PowerPosterior,
        EstimatorId::Ais,
        EstimatorId::NestedSampling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::Exact => "exact",
            EstimatorId::Quadrature => "quadrature",
            EstimatorId::Inla => "inla",
            EstimatorId::Laplace => "laplace",
            EstimatorId::LaplaceMap => "laplace-map",
            EstimatorId::HarmonicMean => "harmonic-mean",
            EstimatorId::Chib => "chib",
            EstimatorId::ChibJeliazkov => "chib-jeliazkov",
            EstimatorId::PowerPosterior => "power-posterior",
            EstimatorId::Ais => "ais",
            EstimatorId::NestedSampling => "nested-sampling",
        }
    }

    /// Whether the method consumes random numbers.
    pub fn is_stochastic(self) -> bool {
        !matches!(
            self,
            EstimatorId::Exact | EstimatorId::Quadrature | EstimatorId::Inla | EstimatorId::Laplace
        )
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Diagnostic {
    Number(f64),
    Text(String),
}

impl From<f64> for Diagnostic {
    fn from(v: f64) -> Self {
        Diagnostic::Number(v)
    }
}

impl From<usize> for Diagnostic {
    fn from(v: usize) -> Self {
        Diagnostic::Number(v as f64)
    }
}

impl From<&str> for Diagnostic {
    fn from(v: &str) -> Self {
        Diagnostic::Text(v.to_owned())
    }
}

impl From<String> for Diagnostic {
    fn from(v: String) -> Self {
        Diagnostic::Text(v)
    }
}

/// A log marginal likelihood with its Monte Carlo error and bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEstimate {
    pub estimator: EstimatorId,
    pub log_ml: f64,
    /// Absent for deterministic methods.
    pub mc_se: Option<f64>,
    pub n_iterations: u64,
    #[serde(with = "secs")]
    pub wall_time: Duration,
    pub diagnostics: BTreeMap<String, Diagnostic>,
}

impl EvidenceEstimate {
    pub fn new(estimator: EstimatorId, log_ml: f64) -> Self {
        Self {
            estimator,
            log_ml,
            mc_se: None,
            n_iterations: 0,
            wall_time: Duration::ZERO,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.mc_se = Some(se);
        self
    }

    pub fn with_iterations(mut self, n: u64) -> Self {
        self.n_iterations = n;
        self
    }

    pub fn with_diag(mut self, key: &str, value: impl Into<Diagnostic>) -> Self {
        self.diagnostics.insert(key.to_owned(), value.into());
        self
    }

    pub fn diag_number(&self, key: &str) -> Option<f64> {
        match self.diagnostics.get(key) {
            Some(Diagnostic::Number(v)) => Some(*v),
            _ => None,
        }
    }

    /// Checks the invariants: finite value and non-negative error.
    pub fn validated(self) -> Result<Self> {
        if !self.log_ml.is_finite() {
            return Err(Error::Estimator(format!(
                "{} produced non-finite log evidence",
                self.estimator
            )));
        }
        match self.mc_se {
            Some(se) if !(se >= 0.0) => Err(Error::Estimator(format!(
                "{} produced invalid standard error {se}",
                self.estimator
            ))),
            _ => Ok(self),
        }
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_round_trip() {
        for id in EstimatorId::ALL {
            assert_eq!(id.as_str().parse::<EstimatorId>().unwrap(), id);
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(json, format!("\"{}\"", id.as_str()));
        }
        assert!("bridge".parse::<EstimatorId>().is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(EvidenceEstimate::new(EstimatorId::Ais, f64::NAN)
            .validated()
            .is_err());
        assert!(EvidenceEstimate::new(EstimatorId::Ais, 1.0)
            .with_se(-1.0)
            .validated()
            .is_err());
        assert!(EvidenceEstimate::new(EstimatorId::Ais, 1.0)
            .with_se(0.0)
            .validated()
            .is_ok());
    }
}
