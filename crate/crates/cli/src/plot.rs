//! Plot-ready CSV files derived from the result files of a run.
//!
//! Each file starts with `#` comment lines naming the figure, its axes and
//! what it illustrates, then a header row; values are copied verbatim from
//! the result files.

use std::path::Path;

use localclock::io::{Cell, CsvTable};

use crate::record::{write_file, FileEntry, RunRecord};

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("result file {0} is missing")]
    MissingFile(String),
    #[error("result file {file} has no column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("cannot read {file}: {message}")]
    Read { file: String, message: String },
    #[error("cannot write {file}: {source}")]
    Write { file: String, source: std::io::Error },
}

/// One figure: selected columns of a result file plus its annotations.
struct Figure {
    source: &'static str,
    columns: &'static [&'static str],
    name: &'static str,
    title: &'static str,
    x: &'static str,
    y: &'static str,
    anchor: &'static str,
    optional: bool,
}

const fn figure(
    source: &'static str,
    columns: &'static [&'static str],
    name: &'static str,
    title: &'static str,
    axes: (&'static str, &'static str),
    anchor: &'static str,
) -> Figure {
    Figure { source, columns, name, title, x: axes.0, y: axes.1, anchor, optional: false }
}

fn figures(experiment: &str) -> Vec<Figure> {
    match experiment {
        "asymptotics" => vec![
            figure(
                "diagnostics.csv",
                &["t", "escape_norm"],
                "plots/escape_norm.csv",
                "escape norm ‖χ(|x|<R) e^{-itH}ψ‖",
                ("t", "escape_norm"),
                "asymptotics, first limit: the state leaves every bounded region",
            ),
            figure(
                "diagnostics.csv",
                &["t", "energy_mismatch"],
                "plots/energy_mismatch.csv",
                "energy mismatch ‖(φ(H) - φ(H₀)) e^{-itH}ψ‖",
                ("t", "energy_mismatch"),
                "asymptotics, second limit: the full energy approaches the kinetic energy",
            ),
            figure(
                "diagnostics.csv",
                &["t", "velocity_mismatch"],
                "plots/velocity_mismatch.csv",
                "velocity mismatch ‖(x/t - p/μ) e^{-itH}ψ‖",
                ("t", "velocity_mismatch"),
                "asymptotics, third limit: position over local time approaches velocity",
            ),
        ],
        "two_clocks" => Vec::new(),
        "ergodic" => vec![figure(
            "ergodic.csv",
            &["probe", "horizon", "error"],
            "plots/ergodic_convergence.csv",
            "error of the time-averaged projector",
            ("horizon", "error"),
            "mean ergodic limit of the local clock",
        )],
        "stone" => vec![figure(
            "stone_scan.csv",
            &["probe", "epsilon", "lambda", "density", "broadened"],
            "plots/stone_density.csv",
            "Stone density from resolvent solves and from the eigendecomposition",
            ("lambda", "density"),
            "spectral density from resolvent boundary values",
        )],
        "fourier_laplace" => vec![
            figure(
                "fourier_laplace.csv",
                &["probe", "re_z", "im_z", "relative_error"],
                "plots/fourier_laplace_error.csv",
                "relative error of the time-integral resolvent",
                ("im_z", "relative_error"),
                "resolvent as a Fourier-Laplace transform of the clock",
            ),
            Figure {
                optional: true,
                ..figure(
                    "fourier_laplace_tail.csv",
                    &["probe", "re_z", "im_z", "horizon", "relative_error", "tail_factor"],
                    "plots/fourier_laplace_tail.csv",
                    "truncation error against the tail factor e^{-|Im z| T}",
                    ("horizon", "relative_error"),
                    "resolvent as a Fourier-Laplace transform of the clock",
                )
            },
        ],
        "klein_gordon" => vec![figure(
            "kg_energy.csv",
            &["t", "energy", "relative_drift"],
            "plots/kg_energy.csv",
            "field energy under the leapfrog clock",
            ("t", "relative_drift"),
            "relativistic clock on a classical field",
        )],
        "com_separation" => vec![figure(
            "com_spectra.csv",
            &["index", "full", "separated"],
            "plots/com_spectra.csv",
            "two-particle spectrum against center-of-mass plus relative spectrum",
            ("index", "eigenvalue"),
            "separation of center-of-mass motion",
        )],
        "beats" => vec![
            figure(
                "beat_signal.csv",
                &["t", "density"],
                "plots/beat_time_series.csv",
                "probability density at the probe point",
                ("t", "density"),
                "beats of a superposition of eigenstates",
            ),
            figure(
                "beat_peaks.csv",
                &["omega", "amplitude"],
                "plots/beat_peaks.csv",
                "spectral peaks of the beat signal",
                ("omega", "amplitude"),
                "beat frequencies equal level gaps",
            ),
        ],
        "equivalence" => vec![figure(
            "equivalence.csv",
            &["check", "probe", "parameter", "error", "tolerance"],
            "plots/equivalence_errors.csv",
            "errors of the three routes to the spectral data",
            ("parameter", "error"),
            "equivalence of clock, resolvent and spectral descriptions",
        )],
        _ => Vec::new(),
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn column(&self, file: &str, name: &str) -> Result<usize, PlotError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PlotError::MissingColumn { file: file.to_string(), column: name.to_string() })
    }
}

fn read_table(dir: &Path, file: &str) -> Result<Table, PlotError> {
    let path = dir.join(file);
    if !path.is_file() {
        return Err(PlotError::MissingFile(file.to_string()));
    }
    let read_err = |e: csv::Error| PlotError::Read { file: file.to_string(), message: e.to_string() };
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&path).map_err(read_err)?;
    let header = reader.headers().map_err(read_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for r in reader.records() {
        rows.push(r.map_err(read_err)?.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}

fn annotated(title: &str, x: &str, y: &str, anchor: &str, header: Vec<String>) -> CsvTable {
    CsvTable::new(header)
        .comment(format!("figure: {title}"))
        .comment(format!("x: {x}"))
        .comment(format!("y: {y}"))
        .comment(format!("shows: {anchor}"))
}

fn save(dir: &Path, name: &str, table: &CsvTable) -> Result<FileEntry, PlotError> {
    write_file(dir, name, table.render().as_bytes())
        .map_err(|source| PlotError::Write { file: name.to_string(), source })
}

/// Writes the plot files of a run into `plots/` under its output directory.
pub fn emit_plot_data(record: &RunRecord) -> Result<Vec<FileEntry>, PlotError> {
    let dir = record.output_dir.as_path();
    let mut written = Vec::new();
    for fig in figures(&record.experiment) {
        if fig.optional && !dir.join(fig.source).is_file() {
            continue;
        }
        let source = read_table(dir, fig.source)?;
        let idx: Vec<usize> = fig.columns.iter().map(|c| source.column(fig.source, c)).collect::<Result<_, _>>()?;
        let mut table =
            annotated(fig.title, fig.x, fig.y, fig.anchor, fig.columns.iter().map(|c| c.to_string()).collect());
        for row in &source.rows {
            table.push(idx.iter().map(|&i| Cell::Text(row[i].clone())).collect());
        }
        written.push(save(dir, fig.name, &table)?);
    }
    if record.experiment == "two_clocks" {
        written.extend(two_clock_figures(dir)?);
    }
    Ok(written)
}

/// Pivots the long two-clock table into one column per clock.
fn two_clock_figures(dir: &Path) -> Result<Vec<FileEntry>, PlotError> {
    let file = "two_clocks.csv";
    let source = read_table(dir, file)?;
    let (clock, t, center, width) = (
        source.column(file, "clock")?,
        source.column(file, "t")?,
        source.column(file, "center")?,
        source.column(file, "width")?,
    );
    let pick = |name: &str, col: usize| -> Vec<(String, String)> {
        source.rows.iter().filter(|r| r[clock] == name).map(|r| (r[t].clone(), r[col].clone())).collect()
    };
    let mut out = Vec::new();
    for (col, quantity, name) in
        [(center, "center", "plots/clock_centers.csv"), (width, "width", "plots/clock_widths.csv")]
    {
        let half = pick("half_laplacian", col);
        let nr = pick("nonrelativistic", col);
        let mut table = annotated(
            &format!("packet {quantity} under both clocks"),
            "t",
            quantity,
            "two clocks: unit speed under (-Δ)^{1/2}, speed k₀ and spreading under -Δ/2",
            vec!["t".into(), format!("{quantity}_half_laplacian"), format!("{quantity}_nonrelativistic")],
        );
        for ((t, a), (_, b)) in half.iter().zip(&nr) {
            table.push(vec![Cell::Text(t.clone()), Cell::Text(a.clone()), Cell::Text(b.clone())]);
        }
        out.push(save(dir, name, &table)?);
    }
    Ok(out)
}
