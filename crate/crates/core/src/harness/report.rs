//! Artifact plumbing: accuracy-curve CSVs, loss-trace CSVs, summary JSON,
//! and run directories with a reproducibility manifest.

use super::eval::EvalReport;
use super::train::TraceRow;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{SystemTime, UNIX_EPOCH};

/// Format tag stored in every run manifest.
pub const RUN_MANIFEST_FORMAT: &str = "boolicl-run-v1";

/// Reproducibility record written alongside a run's artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    /// Unix seconds at manifest creation.
    pub created_unix: u64,
    /// The run's full configuration, as JSON.
    pub config: serde_json::Value,
    /// `git rev-parse HEAD` of the working tree, or `"unknown"`.
    pub git_hash: String,
    pub seed: u64,
    pub wall_secs: f64,
}

impl RunManifest {
    pub fn new(config: serde_json::Value, seed: u64, wall_secs: f64) -> Self {
        let created_unix =
            SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        RunManifest {
            format: RUN_MANIFEST_FORMAT.to_string(),
            created_unix,
            config,
            git_hash: git_hash(),
            seed,
            wall_secs,
        }
    }
}

/// Commit hash of the enclosing working tree, or `"unknown"` when git is
/// unavailable (deleted history, no git binary, not a repository).
pub fn git_hash() -> String {
    let out = Command::new("git").args(["rev-parse", "HEAD"]).output();
    match out {
        Ok(o) if o.status.success() => {
            let s = String::from_utf8_lossy(&o.stdout).trim().to_string();
            if s.is_empty() {
                "unknown".to_string()
            } else {
                s
            }
        }
        _ => "unknown".to_string(),
    }
}

/// Accuracy curve as CSV: one row per position, stable column order.
pub fn curve_csv_string(report: &EvalReport) -> String {
    let mut s = String::from("position,k_examples,accuracy,stderr\n");
    for row in &report.per_position {
        let _ = writeln!(s, "{},{},{},{}", row.position, row.k_examples, row.accuracy, row.stderr);
    }
    s
}

/// Loss/grad-norm trace as CSV: one row per recorded step.
pub fn trace_csv_string(trace: &[TraceRow]) -> String {
    let mut s = String::from("step,loss,grad_norm\n");
    for row in trace {
        let _ = writeln!(s, "{},{},{}", row.step, row.loss, row.grad_norm);
    }
    s
}

/// One headline row per evaluation, in input order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub model: String,
    pub n_eval: usize,
    pub last_point: f64,
    pub last_point_stderr: f64,
    pub mean_over_positions: f64,
}

/// Headline accuracies of a suite of evaluations as pretty-printed JSON with
/// a fixed field order.
pub fn summary_json_string(reports: &[EvalReport]) -> Result<String> {
    let rows: Vec<SummaryRow> = reports
        .iter()
        .map(|r| SummaryRow {
            task: r.task.clone(),
            model: r.model.clone(),
            n_eval: r.n_eval,
            last_point: r.last_point,
            last_point_stderr: r.per_position.last().map_or(0.0, |s| s.stderr),
            mean_over_positions: r.mean_over_positions,
        })
        .collect();
    Ok(serde_json::to_string_pretty(&rows)?)
}

/// Write `contents` to `path`, creating parent directories as needed.
pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Create a fresh run directory `<base>/<label>` (or `<label>-2`, `-3`, …
/// when earlier runs already claimed the name) and return its path.
pub fn create_run_dir(base: &Path, label: &str) -> Result<PathBuf> {
    fs::create_dir_all(base)?;
    for attempt in 0..1000u32 {
        let name = if attempt == 0 { label.to_string() } else { format!("{label}-{}", attempt + 1) };
        let dir = base.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(crate::Error::invalid("run directory", format!("too many runs named {label:?}")))
}

/// Serialize `manifest` to `<dir>/manifest.json` and return that path.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    write_string(&path, &serde_json::to_string_pretty(manifest)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::eval::{evaluate, LearnerPredictor};
    use crate::learners::by_name;
    use crate::sampler::{TaskConfig, TaskKind};

    fn small_report() -> EvalReport {
        let cfg = TaskConfig::new(TaskKind::Conjunction, 4, 6);
        let pred = LearnerPredictor(by_name("null").unwrap());
        evaluate(&pred, &cfg, 32, 7).unwrap()
    }

    #[test]
    fn curve_csv_has_header_plus_one_row_per_position() {
        let report = small_report();
        let csv = curve_csv_string(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "position,k_examples,accuracy,stderr");
        assert_eq!(lines.len(), 1 + 6);
        assert!(lines[1].starts_with("1,0,"));
    }

    #[test]
    fn trace_csv_lists_recorded_steps() {
        let trace = vec![
            TraceRow { step: 0, loss: 0.7, grad_norm: 1.5 },
            TraceRow { step: 100, loss: 0.3, grad_norm: 0.4 },
        ];
        let csv = trace_csv_string(&trace);
        assert_eq!(csv, "step,loss,grad_norm\n0,0.7,1.5\n100,0.3,0.4\n");
    }

    #[test]
    fn report_json_round_trip_is_lossless() {
        let report = small_report();
        let json = serde_json::to_string(&report).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn summary_lists_one_row_per_report_in_order() {
        let report = small_report();
        let json = summary_json_string(&[report.clone(), report.clone()]).unwrap();
        let rows: Vec<SummaryRow> = serde_json::from_str(&json).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].task, report.task);
        assert_eq!(rows[0].last_point, report.last_point);
    }

    #[test]
    fn run_dirs_do_not_collide_and_manifests_round_trip() {
        let base = std::env::temp_dir().join(format!("boolicl-report-test-{}", std::process::id()));
        let _ = fs::remove_dir_all(&base);

        let d1 = create_run_dir(&base, "trial").unwrap();
        let d2 = create_run_dir(&base, "trial").unwrap();
        assert_ne!(d1, d2);
        assert!(d2.ends_with("trial-2"));

        let manifest = RunManifest::new(serde_json::json!({"steps": 3}), 42, 1.25);
        assert_eq!(manifest.format, RUN_MANIFEST_FORMAT);
        let path = write_manifest(&d1, &manifest).unwrap();
        let back: RunManifest =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(back, manifest);

        let _ = fs::remove_dir_all(&base);
    }
}
