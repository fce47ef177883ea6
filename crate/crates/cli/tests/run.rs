use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use localclock_cli::plot::{emit_plot_data, PlotError};
use localclock_cli::record::{sha256_hex, RunRecord, Status, RECORD_FILE};
use localclock_cli::{parse_str, run};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn localclock(args: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_localclock")).args(args).env_remove("LOCALCLOCK_OUTPUT_DIR").output().unwrap()
}

fn run_into(name: &str, dir: &Path) -> (i32, RunRecord) {
    let out = localclock(&[Path::new("-o"), dir, &scenario(name)]);
    let record = std::fs::read_to_string(dir.join(RECORD_FILE)).map(|t| serde_json::from_str(&t).unwrap());
    let code = out.status.code().unwrap();
    match record {
        Ok(r) => (code, r),
        Err(_) => panic!("no record; exit {code}, stderr {}", String::from_utf8_lossy(&out.stderr)),
    }
}

/// Data rows of a result CSV, skipping comments and the header.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn assert_listed_files_exist(record: &RunRecord) {
    for f in record.files.iter().chain(&record.plots) {
        let bytes = std::fs::read(record.output_dir.join(&f.name)).unwrap();
        assert!(!bytes.is_empty(), "{} is empty", f.name);
        assert_eq!(bytes.len() as u64, f.bytes);
        assert_eq!(sha256_hex(&bytes), f.sha256, "{}", f.name);
    }
}

#[test]
fn free_asymptotics_match_the_free_packet_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, record) = run_into("asymptotics_free.toml", tmp.path());
    assert_eq!(code, 0, "{record:?}");
    assert_eq!(record.status, Status::Success);
    assert!(record.passed && record.checks.iter().all(|c| c.passed));
    assert_listed_files_exist(&record);
    let mut plots: Vec<&str> = record.plots.iter().map(|p| p.name.as_str()).collect();
    plots.sort_unstable();
    assert_eq!(plots, ["plots/energy_mismatch.csv", "plots/escape_norm.csv", "plots/velocity_mismatch.csv"]);
    assert!(tmp.path().join("fits.csv").is_file());

    // σ = 1, k₀ = 2, μ = 1 on n = 4096 points over [-200, 200)
    let (sigma, k0, n, extent, radius) = (1.0f64, 2.0, 4096usize, 400.0, 10.0);
    let dx = extent / n as f64;
    for row in rows(&tmp.path().join("diagnostics.csv")) {
        let (t, escape, energy, velocity) = (row[0], row[1], row[2], row[3]);
        let s2 = sigma * sigma * (1.0 + (t / (2.0 * sigma * sigma)).powi(2));
        let inside: f64 = (0..n)
            .map(|j| -0.5 * extent + j as f64 * dx)
            .filter(|x| x * x < radius * radius)
            .map(|x| (-(x - k0 * t).powi(2) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt() * dx)
            .sum();
        assert!((escape - inside.sqrt()).abs() < 1e-6, "t = {t}: {escape} vs {}", inside.sqrt());
        assert_eq!(energy, 0.0);
        // x(t) - t p = x(0) for free motion, so the mismatch is σ/t; the
        // periodic box adds at most the outside mass times the jump of x/t
        let outside: f64 = (0..n)
            .map(|j| 0.5 * extent + j as f64 * dx)
            .map(|x| (-(x - k0 * t).powi(2) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2).sqrt() * dx)
            .sum();
        let slack = 1e-9 * velocity + outside.sqrt() * extent / t;
        assert!((velocity - sigma / t).abs() < slack, "t = {t}: {velocity} vs {}", sigma / t);
    }
    let header = std::fs::read_to_string(tmp.path().join("plots/velocity_mismatch.csv")).unwrap();
    assert!(header.contains("# shows: asymptotics, third limit"), "{header}");
}

#[test]
fn bound_state_control_stays_put() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, record) = run_into("asymptotics_bound.toml", tmp.path());
    assert_eq!(code, 0, "{record:?}");
    for row in rows(&tmp.path().join("diagnostics.csv")) {
        assert!(row[1] >= 0.9, "{row:?}");
    }
}

#[test]
fn two_level_equivalence_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, record) = run_into("equivalence.toml", tmp.path());
    assert_eq!(code, 0, "{record:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("equivalence_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["dimension"], 2);
    for route in ["ergodic", "fourier_laplace", "stone"] {
        assert_eq!(report[route]["passed"], true, "{route}");
    }
    assert_listed_files_exist(&record);
}

#[test]
fn time_reversed_clock_is_caught() {
    let text = std::fs::read_to_string(scenario("equivalence.toml")).unwrap() + "clock = \"time_reversed\"\n";
    let s = parse_str(&text).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let record = run(&s, &text, tmp.path());
    assert_eq!(record.status, Status::ChecksFailed);
    assert_eq!(record.status.exit_code(), 2);
    assert!(record.diagnostic.unwrap().contains("fourier_laplace"));
}

#[test]
fn monitor_trip_keeps_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, record) = run_into("monitor_trip.toml", tmp.path());
    assert_eq!(code, 3);
    assert_eq!(record.status, Status::MonitorAbort);
    assert!(!record.passed);
    assert!(record.diagnostic.as_deref().unwrap().contains("boundary monitor"));
    assert!(record.plots.is_empty() && !tmp.path().join("plots").exists());
    let partial = rows(&tmp.path().join("diagnostics.csv"));
    assert!(!partial.is_empty() && partial.len() < 8, "{} rows", partial.len());
    assert_listed_files_exist(&record);
}

#[test]
fn identical_configs_give_identical_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (_, first) = run_into("stone.toml", a.path());
    let (_, second) = run_into("stone.toml", b.path());
    assert!(!first.files.is_empty());
    assert_eq!(first.files, second.files);
    assert_eq!(first.plots, second.plots);
    assert_eq!(first.scenario_sha256, second.scenario_sha256);

    let text = std::fs::read_to_string(scenario("stone.toml")).unwrap().replace("seed = 7", "seed = 8");
    let c = tempfile::tempdir().unwrap();
    let reseeded = run(&parse_str(&text).unwrap(), &text, c.path());
    assert_ne!(reseeded.files[0].sha256, first.files[0].sha256);
}

#[test]
fn two_clocks_plot_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, record) = run_into("two_clocks.toml", tmp.path());
    assert_eq!(code, 0, "{record:?}");
    let names: Vec<&str> = record.plots.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["plots/clock_centers.csv", "plots/clock_widths.csv"]);
    let text = std::fs::read_to_string(tmp.path().join("plots/clock_widths.csv")).unwrap();
    assert!(text.contains("t,width_half_laplacian,width_nonrelativistic"));
    let widths = rows(&tmp.path().join("plots/clock_widths.csv"));
    assert!(widths.last().unwrap()[2] > 2.0 * widths[0][2]);
    let centers = rows(&tmp.path().join("plots/clock_centers.csv"));
    let last = centers.last().unwrap();
    assert!((last[1] / last[0] - 1.0).abs() < 0.01 && (last[2] / last[0] - 2.0).abs() < 0.02, "{last:?}");
}

#[test]
fn beats_plot_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, record) = run_into("beats.toml", tmp.path());
    assert_eq!(code, 0, "{record:?}");
    let names: Vec<&str> = record.plots.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["plots/beat_time_series.csv", "plots/beat_peaks.csv"]);
    let peaks = rows(&tmp.path().join("plots/beat_peaks.csv"));
    // harmonic levels are one apart
    let bin = 2.0 * std::f64::consts::PI / (2048.0 * 0.1);
    assert!((peaks[0][0] - 1.0).abs() <= bin, "{peaks:?}");
}

#[test]
fn every_shipped_scenario_succeeds_in_one_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml") && !p.ends_with("monitor_trip.toml"))
        .collect();
    paths.sort();
    let mut args: Vec<&Path> = vec![Path::new("-o"), tmp.path()];
    args.extend(paths.iter().map(PathBuf::as_path));
    let out = localclock(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for p in &paths {
        let stem = p.file_stem().unwrap();
        assert!(tmp.path().join(stem).join(RECORD_FILE).is_file(), "{}", p.display());
    }
}

#[test]
fn batch_exit_code_is_the_worst() {
    let tmp = tempfile::tempdir().unwrap();
    let out = localclock(&[Path::new("-o"), tmp.path(), &scenario("ergodic.toml"), &scenario("monitor_trip.toml")]);
    assert_eq!(out.status.code(), Some(3));
    assert!(tmp.path().join("ergodic/plots").is_dir());
}

#[test]
fn invalid_configs_exit_one_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "experiment = \"theorem1\"\n[grid]\nn = 100\nextent = 10.0\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = localclock(&[Path::new("-o"), &out_dir, &scenario("ergodic.toml"), &bad]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("power of two"), "{stderr}");
    assert!(!out_dir.exists());
}

#[test]
fn clashing_output_directories_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let shared = tmp.path().join("shared");
    let (a, b) = (tmp.path().join("a.toml"), tmp.path().join("b.toml"));
    let body = std::fs::read_to_string(scenario("ergodic.toml")).unwrap() + "\n[output]\ndirectory = \"shared\"\n";
    std::fs::write(&a, &body).unwrap();
    std::fs::write(&b, &body).unwrap();
    let out = localclock(&[&a, &b]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("also used by"));
    assert!(!shared.exists());
}

#[test]
fn dry_run_only_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = localclock(&[Path::new("--dry-run"), Path::new("-o"), tmp.path(), &scenario("stone.toml")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("valid stone scenario"));
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn output_dir_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_localclock"))
        .arg(scenario("ergodic.toml"))
        .env("LOCALCLOCK_OUTPUT_DIR", tmp.path())
        .env("LOCALCLOCK_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("ergodic.csv").is_file());
}

#[test]
fn json_only_skips_tables_and_plots() {
    let text = std::fs::read_to_string(scenario("ergodic.toml")).unwrap() + "\n[output]\nformats = [\"json\"]\n";
    let tmp = tempfile::tempdir().unwrap();
    let record = run(&parse_str(&text).unwrap(), &text, tmp.path());
    assert_eq!(record.status, Status::Success);
    assert!(record.files.iter().all(|f| f.name.ends_with(".json")));
    assert!(record.plots.is_empty());
}

#[test]
fn plot_data_needs_the_result_files() {
    let text = std::fs::read_to_string(scenario("ergodic.toml")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let record = run(&parse_str(&text).unwrap(), &text, tmp.path());
    std::fs::remove_file(tmp.path().join("ergodic.csv")).unwrap();
    assert!(matches!(emit_plot_data(&record), Err(PlotError::MissingFile(f)) if f == "ergodic.csv"));
}

#[test]
fn floats_use_seventeen_significant_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, _) = run_into("asymptotics_free.toml", tmp.path());
    let text = std::fs::read_to_string(tmp.path().join("diagnostics.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",0.20000000000000001"), "{text}");
}
