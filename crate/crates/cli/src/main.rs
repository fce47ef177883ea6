use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use localclock_cli::{output_dir, parse_scenario, run, Scenario, Status, EXIT_INVALID};
use rayon::prelude::*;

/// Run localclock scenario files.
#[derive(Debug, Parser)]
#[command(name = "localclock", version)]
struct Args {
    /// Scenario TOML files.
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    /// Output directory; with several scenarios, one subdirectory per file.
    #[arg(short, long, env = "LOCALCLOCK_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Validate the scenarios and exit.
    #[arg(long)]
    dry_run: bool,
    /// More progress output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let batch = args.configs.len() > 1;

    let mut jobs: Vec<(PathBuf, Scenario, String, PathBuf)> = Vec::new();
    let mut invalid = false;
    for path in &args.configs {
        let loaded = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))
            .and_then(|text| parse_scenario(path).map(|s| (s, text)).map_err(|e| e.to_string()));
        match loaded {
            Ok((scenario, text)) => {
                let dir = output_dir(path, &scenario, args.output_dir.as_deref(), batch);
                jobs.push((path.clone(), scenario, text, dir));
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                invalid = true;
            }
        }
    }
    let mut seen: HashMap<&PathBuf, &PathBuf> = HashMap::new();
    for (path, _, _, dir) in &jobs {
        if let Some(first) = seen.insert(dir, path) {
            eprintln!("{}: output directory {} is also used by {}", path.display(), dir.display(), first.display());
            invalid = true;
        }
    }
    if invalid {
        return ExitCode::from(EXIT_INVALID as u8);
    }
    if args.dry_run {
        for (path, scenario, _, dir) in &jobs {
            println!("{}: valid {} scenario -> {}", path.display(), scenario.experiment, dir.display());
        }
        return ExitCode::SUCCESS;
    }

    let threads = std::env::var("LOCALCLOCK_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    let verbose = args.verbose;
    let codes: Vec<i32> = pool.install(|| {
        jobs.par_iter()
            .map(|(path, scenario, text, dir)| {
                if verbose > 0 {
                    eprintln!("{}: running {} into {}", path.display(), scenario.experiment, dir.display());
                }
                let record = run(scenario, text, dir);
                if verbose > 1 {
                    for c in &record.checks {
                        eprintln!(
                            "  [{}] {} = {:.3e} (tolerance {:.3e})",
                            if c.passed { "pass" } else { "FAIL" },
                            c.name,
                            c.value,
                            c.tolerance
                        );
                    }
                }
                let label = match record.status {
                    Status::Success => "ok",
                    Status::ChecksFailed => "checks failed",
                    Status::RuntimeError => "error",
                    Status::MonitorAbort => "aborted by monitor",
                };
                match &record.diagnostic {
                    Some(d) => eprintln!("{}: {label}: {d}", path.display()),
                    None => println!("{}: {label} ({} files)", path.display(), record.files.len() + record.plots.len()),
                }
                record.status.exit_code()
            })
            .collect()
    });
    ExitCode::from(codes.into_iter().max().unwrap_or(0) as u8)
}
