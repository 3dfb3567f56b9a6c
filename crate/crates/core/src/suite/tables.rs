use std::fmt::Write as _;
use std::str::FromStr;

use super::{fmt4, ModelKind, ReplicationRecord};
use crate::error::{Error, Result};
use crate::estimators::EstimatorId;
use crate::numkit::stats::mean;

/// Printed in place of a missing cell.
pub const GAP: &str = "--";

/// Number of replication columns in the replicated tables.
const REPLICATION_COLUMNS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Table1,
    Table2,
    Table3,
    Table4,
    Figure2,
    Glmm,
}

impl Layout {
    pub const ALL: [Layout; 6] = [
        Layout::Table1,
        Layout::Table2,
        Layout::Table3,
        Layout::Table4,
        Layout::Figure2,
        Layout::Glmm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Layout::Table1 => "table1",
            Layout::Table2 => "table2",
            Layout::Table3 => "table3",
            Layout::Table4 => "table4",
            Layout::Figure2 => "figure2",
            Layout::Glmm => "glmm",
        }
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown layout `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Cells rendered as [`GAP`].
    pub missing: usize,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            missing: 0,
        }
    }

    fn cell(&mut self, v: Option<f64>) -> String {
        match v {
            Some(x) if x.is_finite() => fmt4(x),
            _ => {
                self.missing += 1;
                GAP.to_string()
            }
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| {} |", self.header.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(self.header.len()));
        for row in &self.rows {
            let _ = writeln!(s, "| {} |", row.join(" | "));
        }
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn num(v: f64) -> String {
    // Hyperparameters print without trailing zeros: 1000, 10, 0.1.
    format!("{v}")
}

fn ok(records: &[&ReplicationRecord], est: EstimatorId) -> Vec<f64> {
    let mut v: Vec<(u64, f64)> = records
        .iter()
        .filter(|r| r.estimator == est)
        .filter_map(|r| r.log_ml.map(|x| (r.replication, x)))
        .collect();
    v.sort_by_key(|(r, _)| *r);
    v.into_iter().map(|(_, x)| x).collect()
}

fn mean_of(records: &[&ReplicationRecord], est: EstimatorId) -> Option<f64> {
    let v = ok(records, est);
    (!v.is_empty()).then(|| mean(&v))
}

/// Groups records by `key`, keeping first-appearance order.
fn group<'a, K: PartialEq + Clone>(
    records: impl Iterator<Item = &'a ReplicationRecord>,
    key: impl Fn(&ReplicationRecord) -> K,
) -> Vec<(K, Vec<&'a ReplicationRecord>)> {
    let mut out: Vec<(K, Vec<&ReplicationRecord>)> = Vec::new();
    for r in records {
        let k = key(r);
        match out.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(r),
            None => out.push((k, vec![r])),
        }
    }
    out
}

fn label(r: &ReplicationRecord) -> String {
    r.label.clone().unwrap_or_else(|| r.dataset.clone())
}

fn replicated(
    records: &[ReplicationRecord],
    model: ModelKind,
    reference: EstimatorId,
    replicated: EstimatorId,
    title: &str,
) -> Table {
    let mut header = vec!["M", "mu_beta", "sigma_beta", title];
    let names: Vec<String> = (1..=REPLICATION_COLUMNS)
        .map(|i| format!("Chib {i}"))
        .collect();
    header.extend(names.iter().map(String::as_str));
    let mut t = Table::new(&header);
    let mut groups = group(records.iter().filter(|r| r.model == model), |r| {
        (
            label(r),
            r.hyper.prior_mean.unwrap_or(f64::NAN).to_bits(),
            r.hyper.prior_var.unwrap_or(f64::NAN).to_bits(),
        )
    });
    groups.sort_by(|a, b| {
        a.0 .0
            .cmp(&b.0 .0)
            .then(f64::from_bits(b.0 .2).total_cmp(&f64::from_bits(a.0 .2)))
    });
    for ((lab, mu, var), recs) in groups {
        let mut row = vec![
            lab,
            num(f64::from_bits(mu)),
            num(f64::from_bits(var).sqrt()),
        ];
        let reference_value = mean_of(&recs, reference);
        row.push(t.cell(reference_value));
        let reps = ok(&recs, replicated);
        for i in 0..REPLICATION_COLUMNS {
            let c = t.cell(reps.get(i).copied());
            row.push(c);
        }
        t.rows.push(row);
    }
    t
}

fn table1(records: &[ReplicationRecord]) -> Table {
    let mut header = vec!["sigma0", "sigma1", "D", "Exact", "INLA"];
    let names: Vec<String> = (1..=REPLICATION_COLUMNS)
        .map(|i| format!("H.mean {i}"))
        .collect();
    header.extend(names.iter().map(String::as_str));
    let mut t = Table::new(&header);
    let mut groups = group(records.iter().filter(|r| r.model == ModelKind::Toy), |r| {
        [r.hyper.sigma0, r.hyper.sigma1, r.hyper.y].map(|v| v.unwrap_or(f64::NAN).to_bits())
    });
    groups.sort_by(|a, b| f64::from_bits(b.0[0]).total_cmp(&f64::from_bits(a.0[0])));
    for (key, recs) in groups {
        let mut row: Vec<String> = key.iter().map(|&b| num(f64::from_bits(b))).collect();
        let exact = mean_of(&recs, EstimatorId::Exact);
        row.push(t.cell(exact));
        let inla = mean_of(&recs, EstimatorId::Inla);
        row.push(t.cell(inla));
        let hm = ok(&recs, EstimatorId::HarmonicMean);
        for i in 0..REPLICATION_COLUMNS {
            let c = t.cell(hm.get(i).copied());
            row.push(c);
        }
        t.rows.push(row);
    }
    t
}

/// Row order and names of the logit comparison table.
const TABLE4_METHODS: [(EstimatorId, &str); 8] = [
    (EstimatorId::Inla, "INLA"),
    (EstimatorId::Laplace, "Laplace approximation"),
    (EstimatorId::ChibJeliazkov, "Chib and Jeliazkov's method"),
    (EstimatorId::LaplaceMap, "Laplace approximation MAP"),
    (EstimatorId::HarmonicMean, "Harmonic mean estimator"),
    (EstimatorId::PowerPosterior, "Power posteriors"),
    (EstimatorId::Ais, "Annealed importance sampling"),
    (EstimatorId::NestedSampling, "Nested sampling"),
];

const TABLE4_COLUMNS: [(&str, f64); 4] = [("M1", 100.0), ("M2", 100.0), ("M1", 1.0), ("M2", 1.0)];

fn table4(records: &[ReplicationRecord]) -> Table {
    let header: Vec<String> = std::iter::once("Method".to_string())
        .chain(
            TABLE4_COLUMNS
                .iter()
                .map(|(m, v)| format!("{m} (sigma_beta^2={})", num(*v))),
        )
        .collect();
    let mut t = Table {
        header,
        rows: Vec::new(),
        missing: 0,
    };
    for (est, name) in TABLE4_METHODS {
        let mut row = vec![name.to_string()];
        for (lab, var) in TABLE4_COLUMNS {
            let recs: Vec<&ReplicationRecord> = records
                .iter()
                .filter(|r| {
                    r.model == ModelKind::Logit
                        && r.label.as_deref() == Some(lab)
                        && r.hyper.prior_var == Some(var)
                })
                .collect();
            let v = mean_of(&recs, est);
            row.push(t.cell(v));
        }
        t.rows.push(row);
    }
    t
}

fn figure2(records: &[ReplicationRecord]) -> Table {
    let mut t = Table::new(&["estimator", "iterations", "replication", "log_ml"]);
    let mut rows: Vec<&ReplicationRecord> = records
        .iter()
        .filter(|r| {
            r.model == ModelKind::Gausslinreg
                && matches!(r.estimator, EstimatorId::Chib | EstimatorId::Inla)
        })
        .collect();
    rows.sort_by_key(|r| (r.estimator, r.budget, r.replication));
    if !rows.iter().any(|r| r.estimator == EstimatorId::Chib) {
        let gap = t.cell(None);
        t.rows
            .push(vec!["chib".into(), GAP.into(), GAP.into(), gap]);
    }
    for r in rows {
        let iterations = if r.estimator == EstimatorId::Inla {
            "0".to_string()
        } else {
            r.budget.to_string()
        };
        let v = t.cell(r.log_ml);
        t.rows.push(vec![
            r.estimator.to_string(),
            iterations,
            r.replication.to_string(),
            v,
        ]);
    }
    t
}

fn glmm(records: &[ReplicationRecord]) -> Table {
    let mut t = Table::new(&["Method", "replications", "log_ml"]);
    let recs: Vec<&ReplicationRecord> = records
        .iter()
        .filter(|r| r.model == ModelKind::Glmm)
        .collect();
    let mut methods: Vec<EstimatorId> = recs.iter().map(|r| r.estimator).collect();
    methods.push(EstimatorId::Inla);
    methods.sort();
    methods.dedup();
    for est in methods {
        let n = recs
            .iter()
            .filter(|r| r.estimator == est && r.log_ml.is_some())
            .count();
        let v = mean_of(&recs, est);
        let cell = t.cell(v);
        t.rows.push(vec![est.to_string(), n.to_string(), cell]);
    }
    t
}

/// Renders `layout` from result records. Absent cells are printed as
/// [`GAP`] and counted in [`Table::missing`].
pub fn emit_table(records: &[ReplicationRecord], layout: Layout) -> Table {
    match layout {
        Layout::Table1 => table1(records),
        Layout::Table2 => replicated(
            records,
            ModelKind::Gausslinreg,
            EstimatorId::Inla,
            EstimatorId::Chib,
            "INLA",
        ),
        Layout::Table3 => replicated(
            records,
            ModelKind::Probit,
            EstimatorId::Inla,
            EstimatorId::Chib,
            "INLA",
        ),
        Layout::Table4 => table4(records),
        Layout::Figure2 => figure2(records),
        Layout::Glmm => glmm(records),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::Hyper;

    fn rec(
        model: ModelKind,
        est: EstimatorId,
        rep: u64,
        v: f64,
        hyper: Hyper,
        label: Option<&str>,
    ) -> ReplicationRecord {
        ReplicationRecord {
            scenario: format!("{est}-{rep}"),
            label: label.map(str::to_string),
            model,
            dataset: "d".into(),
            estimator: est,
            replication: rep,
            seed: 0,
            budget: 100,
            hyper,
            log_ml: Some(v),
            mc_se: None,
            n_iterations: Some(1),
            diagnostics: Default::default(),
            error: None,
        }
    }

    fn toy(s0: f64) -> Hyper {
        Hyper {
            y: Some(2.0),
            sigma0: Some(s0),
            sigma1: Some(1.0),
            ..Hyper::default()
        }
    }

    #[test]
    fn table1_layout() {
        let mut recs = vec![
            rec(
                ModelKind::Toy,
                EstimatorId::Exact,
                0,
                -3.2463,
                toy(10.0),
                None,
            ),
            rec(
                ModelKind::Toy,
                EstimatorId::Exact,
                0,
                -7.82671,
                toy(1000.0),
                None,
            ),
            rec(
                ModelKind::Toy,
                EstimatorId::Inla,
                0,
                -7.8267,
                toy(1000.0),
                None,
            ),
        ];
        for r in 0..5 {
            recs.push(rec(
                ModelKind::Toy,
                EstimatorId::HarmonicMean,
                r,
                -2.4 - r as f64 * 0.01,
                toy(1000.0),
                None,
            ));
        }
        let t = emit_table(&recs, Layout::Table1);
        assert_eq!(t.header[..5], ["sigma0", "sigma1", "D", "Exact", "INLA"]);
        assert_eq!(t.header.len(), 10);
        assert_eq!(t.rows[0][..5], ["1000", "1", "2", "-7.8267", "-7.8267"]);
        assert_eq!(t.rows[0][9], "-2.4400");
        assert_eq!(t.rows[1][4], GAP);
        assert_eq!(t.missing, 6);
        assert!(t.to_markdown().starts_with("| sigma0 | sigma1 |"));
        assert!(t
            .to_csv()
            .unwrap()
            .starts_with("sigma0,sigma1,D,Exact,INLA,H.mean 1"));
    }

    #[test]
    fn table4_shape_and_gaps() {
        let h = Hyper {
            prior_mean: Some(0.0),
            prior_var: Some(100.0),
            ..Hyper::default()
        };
        let recs = vec![rec(
            ModelKind::Logit,
            EstimatorId::Inla,
            0,
            -257.25,
            h,
            Some("M1"),
        )];
        let t = emit_table(&recs, Layout::Table4);
        assert_eq!(t.rows.len(), 8);
        assert_eq!(t.header.len(), 5);
        assert_eq!(t.rows[0][1], "-257.2500");
        assert_eq!(t.missing, 31);
    }

    #[test]
    fn single_cell_glmm() {
        let recs = vec![rec(
            ModelKind::Glmm,
            EstimatorId::Inla,
            0,
            -915.1,
            Hyper::default(),
            None,
        )];
        let t = emit_table(&recs, Layout::Glmm);
        assert_eq!(
            t.rows,
            vec![vec!["inla".to_string(), "1".into(), "-915.1000".into()]]
        );
        assert_eq!(t.missing, 0);
    }

    #[test]
    fn layout_names_round_trip() {
        for l in Layout::ALL {
            assert_eq!(l.as_str().parse::<Layout>().unwrap(), l);
        }
        assert!("table9".parse::<Layout>().is_err());
    }
}
