//! Scenario-driven runner for the `localclock` experiments.
//!
//! A scenario is a TOML file naming one experiment plus its system, grid and
//! tolerances. [`scenario::parse_scenario`] reads and validates it,
//! [`record::run`] executes it and writes result tables, JSON reports, plot
//! files and a `run_record.json` into an output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiments;
pub mod plot;
pub mod record;
pub mod scenario;

use std::path::{Path, PathBuf};

pub use record::{run, RunRecord, Status};
pub use scenario::{parse_scenario, parse_str, Scenario, ScenarioError};

/// Exit code for a scenario that fails to parse or validate.
pub const EXIT_INVALID: i32 = 1;

/// Output directory of one scenario.
///
/// An explicit override wins; with several scenarios it becomes a parent
/// directory holding one subdirectory per scenario file stem. Without an
/// override the scenario's own `output.directory` is used, resolved against
/// the scenario file's directory, and otherwise `localclock-output/<stem>`.
pub fn output_dir(path: &Path, scenario: &Scenario, override_dir: Option<&Path>, batch: bool) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
    match (override_dir, &scenario.output.directory) {
        (Some(dir), _) if batch => dir.join(stem),
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(dir)) => {
            let dir = Path::new(dir);
            if dir.is_absolute() {
                dir.to_path_buf()
            } else {
                path.parent().unwrap_or(Path::new(".")).join(dir)
            }
        }
        (None, None) => Path::new("localclock-output").join(stem),
    }
}
