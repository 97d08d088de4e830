//! Runs several configs and writes one trace per config plus a summary table.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use log::{error, info};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::experiment::{plan_json, run_experiment, RunError, SummaryRecord, SUMMARY_HEADER};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep needs at least one config")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Replaces every config's seed so all algorithms see the same data split and streams.
    pub seed: Option<u64>,
    /// Run configs concurrently.
    pub concurrent: bool,
}

#[derive(Debug)]
pub struct ConfigOutcome {
    pub label: String,
    pub trace_path: PathBuf,
    pub result: Result<SummaryRecord, RunError>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub outcomes: Vec<ConfigOutcome>,
    pub summary_path: PathBuf,
}

impl SweepReport {
    pub fn failures(&self) -> impl Iterator<Item = (&str, &RunError)> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().err().map(|e| (o.label.as_str(), e)))
    }

    /// Worst exit code among the children, 0 if all succeeded.
    pub fn exit_code(&self) -> i32 {
        self.failures().map(|(_, e)| e.exit_code()).max().unwrap_or(0)
    }
}

/// Labels made unique by appending `-2`, `-3`, ... to repeats.
fn unique_labels(configs: &[ExperimentConfig]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    configs
        .iter()
        .map(|c| {
            let base = c.label();
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 { base } else { format!("{base}-{n}") }
        })
        .collect()
}

pub fn summary_csv<'a>(records: impl IntoIterator<Item = &'a SummaryRecord>) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), SweepError> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|source| SweepError::Write { path: path.to_path_buf(), source })
}

fn run_one(cfg: &ExperimentConfig, label: &str, out_dir: &Path) -> Result<ConfigOutcome, SweepError> {
    let trace_path = out_dir.join(format!("{label}.csv"));
    let result = match run_experiment(cfg) {
        Ok(mut out) => {
            out.summary.name = label.to_string();
            write(&trace_path, out.trace.to_csv_string().as_bytes())?;
            let plan = serde_json::to_string_pretty(&plan_json(cfg, &out.plan)).expect("plan json");
            write(&out_dir.join(format!("{label}.plan.json")), plan.as_bytes())?;
            info!(
                "{label}: {} rounds, to target {:?}, final gap {:?}",
                out.summary.comm_rounds_total, out.summary.comm_rounds_to_target, out.summary.final_gap
            );
            Ok(out.summary)
        }
        Err(e) => {
            error!("{label}: {e}");
            Err(e)
        }
    };
    Ok(ConfigOutcome { label: label.to_string(), trace_path, result })
}

/// Runs every config, writing `<label>.csv`, `<label>.plan.json` and `summary.csv`
/// into `out_dir`. A failing config is reported in its outcome and does not stop the others.
pub fn sweep(configs: &[ExperimentConfig], out_dir: &Path, opts: &SweepOptions) -> Result<SweepReport, SweepError> {
    if configs.is_empty() {
        return Err(SweepError::Empty);
    }
    fs::create_dir_all(out_dir).map_err(|source| SweepError::Write { path: out_dir.to_path_buf(), source })?;
    let configs: Vec<ExperimentConfig> = configs
        .iter()
        .cloned()
        .map(|mut c| {
            if let Some(seed) = opts.seed {
                c.seed = seed;
            }
            c
        })
        .collect();
    let labels = unique_labels(&configs);
    let outcomes: Vec<ConfigOutcome> = if opts.concurrent {
        configs.par_iter().zip(&labels).map(|(c, l)| run_one(c, l, out_dir)).collect::<Result<_, _>>()?
    } else {
        configs.iter().zip(&labels).map(|(c, l)| run_one(c, l, out_dir)).collect::<Result<_, _>>()?
    };
    let summary_path = out_dir.join("summary.csv");
    write(&summary_path, summary_csv(outcomes.iter().filter_map(|o| o.result.as_ref().ok())).as_bytes())?;
    Ok(SweepReport { outcomes, summary_path })
}
