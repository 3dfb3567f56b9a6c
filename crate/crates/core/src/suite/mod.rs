//! Scenario files, the replication runner and comparison tables.
//!
//! A scenario file is TOML with an optional `[defaults]` table and one
//! `[scenarios.<id>]` table per scenario:
//!
//! ```toml
//! [defaults]
//! model = "toy"
//! y = 2.0
//! sigma1 = 1.0
//!
//! [scenarios.t1-hm-1000]
//! sigma0 = 1000.0
//! estimator = "harmonic-mean"
//! [scenarios.t1-hm-1000.config]
//! iterations = 1000000
//! replications = 5
//! ```
//!
//! Replication `r` of a scenario draws from stream `r` of the scenario's
//! seed, so output does not depend on the worker count.

mod scenario;
mod tables;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use scenario::{
    Hyper, ModelKind, Scenario, ScenarioDef, SuiteFile, SYNTHETIC_BERNOULLI, SYNTHETIC_GAUSSIAN,
};
pub use tables::{emit_table, Layout, Table, GAP};

use crate::error::{Error, Result};
use crate::estimators::{evaluate, Diagnostic, EstimatorId, EvidenceEstimate};
use crate::numkit::stats::{mean, sd};
use crate::numkit::RngStream;

pub const RESULTS_FILE: &str = "results.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

/// One line of `results.jsonl`. Wall-clock time is kept out so that the
/// file is reproducible byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub model: ModelKind,
    pub dataset: String,
    pub estimator: EstimatorId,
    pub replication: u64,
    pub seed: u64,
    /// Configured main-run length (`iterations`).
    pub budget: u64,
    pub hyper: Hyper,
    pub log_ml: Option<f64>,
    pub mc_se: Option<f64>,
    pub n_iterations: Option<u64>,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, Diagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub n_ok: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                n_ok: 0,
                mean: f64::NAN,
                sd: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        Self {
            n_ok: values.len(),
            mean: mean(values),
            sd: if values.len() > 1 { sd(values) } else { 0.0 },
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Every replication of one scenario.
#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    /// Estimate or error message per replication, in replication order.
    pub replications: Vec<std::result::Result<EvidenceEstimate, String>>,
    pub summary: Summary,
    pub wall_clock: Duration,
}

impl ScenarioResult {
    pub fn failed(&self) -> bool {
        self.replications.iter().any(|r| r.is_err())
    }

    pub fn records(&self) -> Vec<ReplicationRecord> {
        let s = &self.scenario;
        self.replications
            .iter()
            .enumerate()
            .map(|(r, out)| {
                let (log_ml, mc_se, n_iterations, diagnostics, error) = match out {
                    Ok(e) => (
                        Some(e.log_ml),
                        e.mc_se,
                        Some(e.n_iterations),
                        e.diagnostics.clone(),
                        None,
                    ),
                    Err(msg) => (None, None, None, BTreeMap::new(), Some(msg.clone())),
                };
                ReplicationRecord {
                    scenario: s.id.clone(),
                    label: s.label.clone(),
                    model: s.model,
                    dataset: s.dataset.clone(),
                    estimator: s.estimator,
                    replication: r as u64,
                    seed: s.config.seed,
                    budget: s.config.iterations as u64,
                    hyper: s.hyper.clone(),
                    log_ml,
                    mc_se,
                    n_iterations,
                    diagnostics,
                    error,
                }
            })
            .collect()
    }
}

/// Runs one replication of a scenario.
pub fn run_replication(s: &Scenario, replication: u64) -> Result<EvidenceEstimate> {
    let mut rng = RngStream::new(s.config.seed, replication);
    evaluate(&s.spec, s.estimator, &s.config, &mut rng)
}

/// Runs every (scenario, replication) pair on a pool of `jobs` workers.
pub fn run_scenarios(scenarios: &[Scenario], jobs: usize) -> Result<Vec<ScenarioResult>> {
    let tasks: Vec<(usize, u64)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.config.replications as u64).map(move |r| (i, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outputs: Vec<(std::result::Result<EvidenceEstimate, String>, Duration)> =
        pool.install(|| {
            tasks
                .par_iter()
                .map(|&(i, r)| {
                    let start = Instant::now();
                    let out = run_replication(&scenarios[i], r).map_err(|e| e.to_string());
                    (out, start.elapsed())
                })
                .collect()
        });

    let mut outputs = outputs.into_iter();
    Ok(scenarios
        .iter()
        .map(|s| {
            let reps: Vec<_> = outputs.by_ref().take(s.config.replications).collect();
            let wall_clock = reps.iter().map(|(_, d)| *d).sum();
            let replications: Vec<_> = reps.into_iter().map(|(o, _)| o).collect();
            let values: Vec<f64> = replications
                .iter()
                .filter_map(|o| o.as_ref().ok().map(|e| e.log_ml))
                .collect();
            ScenarioResult {
                scenario: s.clone(),
                summary: Summary::of(&values),
                replications,
                wall_clock,
            }
        })
        .collect())
}

/// Outcome of [`run_suite`].
#[derive(Debug)]
pub struct SuiteOutcome {
    pub results: Vec<ScenarioResult>,
}

impl SuiteOutcome {
    /// 0 when every replication succeeded, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.results.iter().any(ScenarioResult::failed) {
            1
        } else {
            0
        }
    }
}

/// Parses, resolves and runs a scenario file, writing `results.jsonl`,
/// `summary.csv` and `timings.csv` into `out_dir`. Resolution failures are
/// returned as errors (exit status 2); estimator failures are recorded and
/// reported through [`SuiteOutcome::exit_code`].
pub fn run_suite(
    config: &Path,
    jobs: usize,
    out_dir: &Path,
    seed: Option<u64>,
    data_dir: Option<&Path>,
) -> Result<SuiteOutcome> {
    let file = SuiteFile::from_path(config, seed)?;
    let scenarios = file.resolve(data_dir)?;
    let results = run_scenarios(&scenarios, jobs)?;
    write_outputs(&results, out_dir)?;
    Ok(SuiteOutcome { results })
}

pub fn write_outputs(results: &[ScenarioResult], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut jsonl = fs::File::create(out_dir.join(RESULTS_FILE))?;
    for res in results {
        for rec in res.records() {
            serde_json::to_writer(&mut jsonl, &rec)?;
            jsonl.write_all(b"\n")?;
        }
    }

    let mut summary = csv::Writer::from_path(out_dir.join(SUMMARY_FILE))?;
    summary.write_record([
        "scenario",
        "model",
        "dataset",
        "estimator",
        "replications",
        "n_ok",
        "mean",
        "sd",
        "min",
        "max",
    ])?;
    for res in results {
        let s = &res.scenario;
        let m = &res.summary;
        summary.write_record([
            s.id.clone(),
            serde_plain(&s.model),
            s.dataset.clone(),
            s.estimator.to_string(),
            res.replications.len().to_string(),
            m.n_ok.to_string(),
            fmt4(m.mean),
            fmt4(m.sd),
            fmt4(m.min),
            fmt4(m.max),
        ])?;
    }
    summary.flush()?;

    let mut timings = csv::Writer::from_path(out_dir.join(TIMINGS_FILE))?;
    timings.write_record(["scenario", "replication", "wall_time_s"])?;
    for res in results {
        for (r, out) in res.replications.iter().enumerate() {
            let t = out
                .as_ref()
                .map(|e| e.wall_time.as_secs_f64())
                .unwrap_or(f64::NAN);
            timings.write_record([res.scenario.id.clone(), r.to_string(), format!("{t:.6}")])?;
        }
    }
    timings.flush()?;
    Ok(())
}

/// Reads `results.jsonl` back.
pub fn read_results(path: &Path) -> Result<Vec<ReplicationRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Mean log evidence per scenario, in first-appearance order, skipping
/// failed replications.
pub fn scenario_means(records: &[ReplicationRecord]) -> Vec<(String, f64)> {
    let mut order: Vec<String> = Vec::new();
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        if !values.contains_key(&r.scenario) {
            order.push(r.scenario.clone());
        }
        let v = values.entry(r.scenario.clone()).or_default();
        if let Some(x) = r.log_ml {
            v.push(x);
        }
    }
    order
        .into_iter()
        .filter_map(|id| {
            let v = &values[&id];
            (!v.is_empty()).then(|| (id.clone(), mean(v)))
        })
        .collect()
}

pub(crate) fn fmt4(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        GAP.to_string()
    }
}

fn serde_plain(kind: &ModelKind) -> String {
    serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUITE: &str = r#"
[defaults]
model = "toy"
y = 2.0
sigma1 = 1.0
[defaults.config]
iterations = 2000
burn_in = 10
replications = 3
seed = 11

[scenarios.exact]
estimator = "exact"
sigma0 = 10.0
[scenarios.exact.config]
replications = 1

[scenarios.hm]
estimator = "harmonic-mean"
sigma0 = 10.0

[scenarios.ais]
estimator = "ais"
sigma0 = 10.0
[scenarios.ais.config.ais]
n_particles = 150
n_temperatures = 20
"#;

    fn run(jobs: usize) -> (Vec<u8>, i32) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("suite.toml");
        fs::write(&cfg, SUITE).unwrap();
        let out = dir.path().join("out");
        let outcome = run_suite(&cfg, jobs, &out, None, None).unwrap();
        (
            fs::read(out.join(RESULTS_FILE)).unwrap(),
            outcome.exit_code(),
        )
    }

    #[test]
    fn replay_is_byte_identical_across_worker_counts() {
        let (a, code) = run(1);
        let (b, _) = run(3);
        assert_eq!(code, 0);
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(!text.contains("wall_time"));
    }

    #[test]
    fn empty_suite_is_success() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("s.toml");
        fs::write(&cfg, "").unwrap();
        let outcome = run_suite(&cfg, 2, &dir.path().join("o"), None, None).unwrap();
        assert_eq!(outcome.exit_code(), 0);
        assert_eq!(
            fs::read_to_string(dir.path().join("o").join(RESULTS_FILE)).unwrap(),
            ""
        );
    }

    #[test]
    fn estimator_failure_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("s.toml");
        fs::write(
            &cfg,
            "[scenarios.x]\nmodel='toy'\ny=1.0\nsigma0=1.0\nsigma1=1.0\nestimator='chib'\n",
        )
        .unwrap();
        let out = dir.path().join("o");
        let outcome = run_suite(&cfg, 1, &out, None, None).unwrap();
        assert_eq!(outcome.exit_code(), 1);
        let recs = read_results(&out.join(RESULTS_FILE)).unwrap();
        assert!(recs[0].error.is_some() && recs[0].log_ml.is_none());
    }

    #[test]
    fn summary_recomputes_from_records() {
        let s = Summary::of(&[1.0, 2.0, 6.0]);
        assert_eq!((s.n_ok, s.mean, s.min, s.max), (3, 3.0, 1.0, 6.0));
        assert!((s.sd - 7f64.sqrt()).abs() < 1e-12);
    }
}
