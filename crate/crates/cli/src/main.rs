//! `mlik`: run evidence scenarios, render comparison tables and compute
//! posterior model probabilities.

use std::fmt::Write as _;
use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use mlik::selection::model_posteriors;
use mlik::suite::{emit_table, read_results, run_suite, scenario_means, Layout, RESULTS_FILE};

#[derive(Parser)]
#[command(name = "mlik", version, about = "Marginal likelihood experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario in a TOML file and write results.jsonl, summary.csv
    /// and timings.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long, env = "MLIK_JOBS")]
        jobs: Option<NonZeroUsize>,
        /// Overrides every scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory holding the bundled CSV files and MANIFEST.csv.
        #[arg(long, env = "MLIK_DATA_DIR")]
        data_dir: Option<PathBuf>,
    },
    /// Render a results file in one of the comparison layouts.
    Table {
        /// table1, table2, table3, table4, figure2 or glmm.
        #[arg(long)]
        layout: Layout,
        /// Directory containing results.jsonl.
        #[arg(long = "in")]
        input: PathBuf,
        /// Where to write <layout>.md and <layout>.csv (defaults to --in).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Posterior probabilities and log Bayes factors across scenarios.
    Posteriors {
        #[arg(long = "in")]
        input: PathBuf,
        /// `equal`, or a CSV file with columns `scenario,prior`.
        #[arg(long, default_value = "equal")]
        prior: String,
    },
}

/// Exit status for bad input: unreadable files, unresolved references.
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            seed,
            data_dir,
        } => run(&config, &out, jobs, seed, data_dir.as_deref()),
        Command::Table { layout, input, out } => {
            table(layout, &input, out.as_deref().unwrap_or(&input))
        }
        Command::Posteriors { input, prior } => posteriors(&input, &prior),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(
    config: &Path,
    out: &Path,
    jobs: Option<NonZeroUsize>,
    seed: Option<u64>,
    data_dir: Option<&Path>,
) -> anyhow::Result<u8> {
    let jobs = jobs
        .or_else(|| std::thread::available_parallelism().ok())
        .map_or(1, NonZeroUsize::get);
    let outcome = run_suite(config, jobs, out, seed, data_dir)?;
    for res in &outcome.results {
        let s = &res.summary;
        eprintln!(
            "{}: {}/{} ok, mean {:.4}, sd {:.4} ({:.1}s)",
            res.scenario.id,
            s.n_ok,
            res.replications.len(),
            s.mean,
            s.sd,
            res.wall_clock.as_secs_f64()
        );
        for (r, e) in res.replications.iter().enumerate() {
            if let Err(msg) = e {
                eprintln!("  replication {r} failed: {msg}");
            }
        }
    }
    Ok(outcome.exit_code() as u8)
}

fn table(layout: Layout, input: &Path, out: &Path) -> anyhow::Result<u8> {
    let records = read_results(&input.join(RESULTS_FILE))
        .with_context(|| format!("reading {}", input.join(RESULTS_FILE).display()))?;
    let t = emit_table(&records, layout);
    let md = t.to_markdown();
    fs::create_dir_all(out)?;
    fs::write(out.join(format!("{}.md", layout.as_str())), &md)?;
    fs::write(out.join(format!("{}.csv", layout.as_str())), t.to_csv()?)?;
    print!("{md}");
    if t.missing > 0 {
        eprintln!("{} missing cell(s)", t.missing);
        return Ok(1);
    }
    Ok(0)
}

fn read_priors(path: &Path) -> anyhow::Result<Vec<(String, f64)>> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("{}: missing column `{name}`", path.display()))
    };
    let (id_col, prior_col) = (col("scenario")?, col("prior")?);
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let prior: f64 = rec[prior_col]
                .trim()
                .parse()
                .with_context(|| format!("{}: bad prior {:?}", path.display(), &rec[prior_col]))?;
            Ok((rec[id_col].trim().to_string(), prior))
        })
        .collect()
}

fn posteriors(input: &Path, prior: &str) -> anyhow::Result<u8> {
    let records = read_results(&input.join(RESULTS_FILE))
        .with_context(|| format!("reading {}", input.join(RESULTS_FILE).display()))?;
    let means = scenario_means(&records);
    let (ids, log_ml, priors): (Vec<String>, Vec<f64>, Vec<f64>) = if prior == "equal" {
        let n = means.len();
        let (ids, lm): (Vec<_>, Vec<_>) = means.into_iter().unzip();
        (ids, lm, vec![1.0; n])
    } else {
        let mut ids = Vec::new();
        let mut lm = Vec::new();
        let mut pr = Vec::new();
        for (id, p) in read_priors(Path::new(prior))? {
            let Some((_, m)) = means.iter().find(|(s, _)| *s == id) else {
                bail!(
                    "scenario `{id}` has no successful replication in {}",
                    input.display()
                );
            };
            ids.push(id);
            lm.push(*m);
            pr.push(p);
        }
        (ids, lm, pr)
    };
    let post = model_posteriors(&log_ml, &priors)?;

    let total: f64 = priors.iter().sum();
    let mut s = String::from("| scenario | log_ml | prior | posterior |\n|---|---|---|---|\n");
    for (i, id) in ids.iter().enumerate() {
        let _ = writeln!(
            s,
            "| {id} | {:.4} | {:.4} | {:.4} |",
            log_ml[i],
            priors[i] / total,
            post.probabilities[i]
        );
    }
    let _ = write!(s, "\n| log BF |");
    for id in &ids {
        let _ = write!(s, " {id} |");
    }
    let _ = write!(s, "\n|---|{}\n", "---|".repeat(ids.len()));
    for (i, id) in ids.iter().enumerate() {
        let _ = write!(s, "| {id} |");
        for bf in &post.log_bayes_factors[i] {
            let _ = write!(s, " {bf:.4} |");
        }
        s.push('\n');
    }
    print!("{s}");
    Ok(0)
}
