use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::experiments::{self, Check};
use crate::plot;
use crate::scenario::{Format, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    /// Ran to completion but a check missed its tolerance.
    ChecksFailed,
    RuntimeError,
    MonitorAbort,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::ChecksFailed | Status::RuntimeError => 2,
            Status::MonitorAbort => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl From<Check> for RecordCheck {
    fn from(c: Check) -> Self {
        Self { name: c.name, value: c.value, tolerance: c.tolerance, passed: c.passed }
    }
}

/// Summary of one run, written as `run_record.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    /// SHA-256 of the scenario text as read.
    pub scenario_sha256: String,
    pub tool_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub output_dir: PathBuf,
    pub files: Vec<FileEntry>,
    pub plots: Vec<FileEntry>,
    pub checks: Vec<RecordCheck>,
    pub status: Status,
    pub passed: bool,
    pub diagnostic: Option<String>,
}

pub const RECORD_FILE: &str = "run_record.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: &[u8]) -> std::io::Result<FileEntry> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&path, contents)?;
    Ok(FileEntry { name: name.to_string(), bytes: contents.len() as u64, sha256: sha256_hex(contents) })
}

/// Runs a validated scenario, writes its results and `run_record.json` into
/// `output_dir`, and returns the record. Failures are reported through
/// [`RunRecord::status`].
pub fn run(scenario: &Scenario, source: &str, output_dir: &Path) -> RunRecord {
    let mut record = RunRecord {
        experiment: scenario.experiment.to_string(),
        scenario_sha256: sha256_hex(source.as_bytes()),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: now(),
        finished_unix: f64::NAN,
        output_dir: output_dir.to_path_buf(),
        files: Vec::new(),
        plots: Vec::new(),
        checks: Vec::new(),
        status: Status::Success,
        passed: false,
        diagnostic: None,
    };
    if let Err(e) = std::fs::create_dir_all(output_dir) {
        record.status = Status::RuntimeError;
        record.diagnostic = Some(format!("cannot create {}: {e}", output_dir.display()));
        record.finished_unix = now();
        return record;
    }

    match experiments::execute(scenario) {
        Err(e) => {
            record.status = Status::RuntimeError;
            record.diagnostic = Some(format!("{}: {e}", scenario.experiment));
        }
        Ok(outputs) => {
            let formats = &scenario.output.formats;
            let mut written = Vec::new();
            if formats.contains(&Format::Csv) {
                for (name, table) in &outputs.tables {
                    written.push((name.clone(), table.render().into_bytes()));
                }
            }
            if formats.contains(&Format::Json) {
                for (name, value) in &outputs.reports {
                    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
                    text.push('\n');
                    written.push((name.clone(), text.into_bytes()));
                }
            }
            for (name, bytes) in written {
                match write_file(output_dir, &name, &bytes) {
                    Ok(entry) => record.files.push(entry),
                    Err(e) => {
                        record.status = Status::RuntimeError;
                        record.diagnostic = Some(format!("cannot write {name}: {e}"));
                    }
                }
            }
            record.checks = outputs.checks.into_iter().map(RecordCheck::from).collect();
            if record.status == Status::Success {
                if let Some(trip) = outputs.halted {
                    record.status = Status::MonitorAbort;
                    record.diagnostic = Some(format!("partial results: {trip}"));
                } else if record.checks.iter().any(|c| !c.passed) {
                    record.status = Status::ChecksFailed;
                    let failing: Vec<&str> =
                        record.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                    record.diagnostic = Some(format!("checks outside tolerance: {}", failing.join("; ")));
                }
            }
            if matches!(record.status, Status::Success | Status::ChecksFailed) && formats.contains(&Format::Csv) {
                match plot::emit_plot_data(&record) {
                    Ok(plots) => record.plots = plots,
                    Err(e) => {
                        record.status = Status::RuntimeError;
                        record.diagnostic = Some(format!("plot data: {e}"));
                    }
                }
            }
        }
    }
    record.passed = record.status == Status::Success;
    record.finished_unix = now();
    let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
    text.push('\n');
    if let Err(e) = std::fs::write(output_dir.join(RECORD_FILE), text) {
        record.status = Status::RuntimeError;
        record.passed = false;
        record.diagnostic = Some(format!("cannot write {RECORD_FILE}: {e}"));
    }
    record
}
