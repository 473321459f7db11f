//! Experiment reports: a JSON document with full per-run detail and a
//! one-row-per-run CSV summary. Everything wall-clock lives under the
//! `timing` key so deterministic content can be compared by deleting
//! that single subtree.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::VarianceRatio;
use crate::runner::config::ExperimentConfig;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Validation score for one ridge strength on the validation stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationScore {
    pub gamma: f64,
    pub final_average_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub selected_gamma: f64,
    /// One entry per grid value, in grid order, so the selection can be
    /// rechecked against the report alone.
    pub validation_scores: Vec<ValidationScore>,
    /// Lower-triangular rows: entry [t][i] is accuracy on task i's test
    /// split after learning task t.
    pub accuracy_matrix: Vec<Vec<f64>>,
    pub average_accuracy: f64,
    /// Absent for single-task streams, where forgetting is undefined.
    pub forgetting: Option<f64>,
    pub variance_ratio_stack: VarianceRatio,
    pub variance_ratio_embedding: VarianceRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_average_accuracy: f64,
    pub std_average_accuracy: f64,
    pub mean_forgetting: Option<f64>,
    pub std_forgetting: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub seed: u64,
    /// Seconds spent in the classifier update for each experiment task,
    /// in stream order. Excludes encoding, prediction, and IO.
    pub task_update_seconds: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub runs: Vec<RunTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub runs: Vec<RunResult>,
    pub aggregate: Aggregate,
    pub timing: TimingReport,
}

/// Sample standard deviation; 0.0 for a single observation.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

pub fn aggregate_runs(runs: &[RunResult]) -> Result<Aggregate> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("report runs".into()));
    }
    let accuracies: Vec<f64> = runs.iter().map(|r| r.average_accuracy).collect();
    let forgettings: Vec<f64> = runs.iter().filter_map(|r| r.forgetting).collect();
    let (mean_forgetting, std_forgetting) = if forgettings.len() == runs.len() {
        let mean = forgettings.iter().sum::<f64>() / forgettings.len() as f64;
        (Some(mean), Some(sample_std(&forgettings)))
    } else {
        (None, None)
    };
    Ok(Aggregate {
        mean_average_accuracy: accuracies.iter().sum::<f64>() / accuracies.len() as f64,
        std_average_accuracy: sample_std(&accuracies),
        mean_forgetting,
        std_forgetting,
    })
}

fn vr_cell(vr: &VarianceRatio) -> String {
    match vr {
        VarianceRatio::Finite(v) => format!("{v}"),
        VarianceRatio::Unbounded => "unbounded".into(),
    }
}

pub fn summary_csv(report: &RunReport) -> Result<String> {
    if report.runs.is_empty() {
        return Err(Error::EmptyInput("report runs".into()));
    }
    let num_tasks = report.runs[0].accuracy_matrix.len();
    let mut out = String::from("seed,gamma,average_accuracy,forgetting,vr_stack,vr_embedding");
    for t in 1..=num_tasks {
        out.push_str(&format!(",task_{t}_seconds"));
    }
    out.push('\n');
    for run in &report.runs {
        let timing = report
            .timing
            .runs
            .iter()
            .find(|t| t.seed == run.seed)
            .ok_or_else(|| Error::LengthMismatch {
                context: "timing entries vs runs".into(),
                left: report.timing.runs.len(),
                right: report.runs.len(),
            })?;
        let forgetting = run
            .forgetting
            .map(|f| format!("{f}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            run.seed,
            run.selected_gamma,
            run.average_accuracy,
            forgetting,
            vr_cell(&run.variance_ratio_stack),
            vr_cell(&run.variance_ratio_embedding),
        ));
        for seconds in &timing.task_update_seconds {
            out.push_str(&format!(",{seconds}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes report.json and summary.csv into `dir`. Validates before
/// touching the filesystem: an empty report writes nothing.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<()> {
    if report.runs.is_empty() {
        return Err(Error::EmptyInput("report runs".into()));
    }
    let csv = summary_csv(report)?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    fs::write(&json_path, format!("{json}\n")).map_err(|e| Error::io(&json_path, e))?;
    let csv_path = dir.join("summary.csv");
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))
}
