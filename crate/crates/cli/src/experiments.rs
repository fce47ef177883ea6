//! One function per experiment; each returns tables, reports and checks.

use localclock::clock::{evolve_klein_gordon, two_clocks_compare, FieldState};
use localclock::fit::{linear_fit, power_law_fit};
use localclock::grid::{Grid, Representation, WaveFunction};
use localclock::io::{field_table, Cell, CsvTable};
use localclock::linalg::{self, seeded_unit_vectors, DenseHermitian};
use localclock::nbody::{
    assemble_relative_hamiltonian, com_separation_check, densify, jacobi_frame, GridHamiltonian, HamiltonianOperator,
    ParticleSystem, Potential,
};
use localclock::resolvent::{
    density_scan, equivalence_report, fourier_laplace_resolvent, fourier_laplace_truncated, maximal_step,
    minimal_horizon, resolvent_apply, EquivalenceSettings, Solver,
};
use localclock::scattering::{geometric_times, is_decreasing, run_asymptotics_suite_with_spectrum, SuiteConfig};
use localclock::spectral::{
    beat_signal, broadened_measure, diagonalize, eigen_projector, ergodic_projector, Evolver, SpectralData,
    TimeReversed,
};
use num_complex::Complex64;
use serde::Serialize;

use crate::scenario::{ClockChoice, Expectation, Experiment, Scenario, Shape};

/// Comparison of one computed quantity against a configured tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, tolerance: 1.0, passed: ok }
    }
}

#[derive(Debug, Default)]
pub struct Outputs {
    /// `(file name, table)`, written when the csv format is on.
    pub tables: Vec<(String, CsvTable)>,
    /// `(file name, value)`, written when the json format is on.
    pub reports: Vec<(String, serde_json::Value)>,
    pub checks: Vec<Check>,
    /// Boundary-monitor trip that cut the run short.
    pub halted: Option<String>,
}

impl Outputs {
    fn table(&mut self, name: &str, table: CsvTable) {
        self.tables.push((name.to_string(), table));
    }

    fn report(&mut self, name: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("report serializes");
        self.reports.push((name.to_string(), value));
    }
}

/// An operation failed; `context` names the step.
#[derive(Debug, thiserror::Error)]
#[error("{context}: {source}")]
pub struct ExperimentError {
    pub context: String,
    #[source]
    pub source: localclock::Error,
}

type Result<T> = std::result::Result<T, ExperimentError>;

trait Context<T> {
    fn context(self, what: &str) -> Result<T>;
}

impl<T> Context<T> for localclock::Result<T> {
    fn context(self, what: &str) -> Result<T> {
        self.map_err(|source| ExperimentError { context: what.to_string(), source })
    }
}

fn invalid(what: &str, message: String) -> ExperimentError {
    ExperimentError { context: what.to_string(), source: localclock::Error::InvalidConfig(message) }
}

/// Runs a validated scenario.
pub fn execute(s: &Scenario) -> Result<Outputs> {
    match s.experiment {
        Experiment::Asymptotics => asymptotics(s),
        Experiment::TwoClocks => two_clocks(s),
        Experiment::Ergodic => ergodic(s),
        Experiment::Stone => stone(s),
        Experiment::FourierLaplace => fourier_laplace(s),
        Experiment::KleinGordon => klein_gordon(s),
        Experiment::ComSeparation => com_separation(s),
        Experiment::Beats => beats(s),
        Experiment::Equivalence => equivalence(s),
    }
}

fn grid(s: &Scenario) -> Result<Grid> {
    let g = s.grid.as_ref().ok_or_else(|| invalid("grid", "missing [grid] section".into()))?;
    Grid::new(g.dims, g.n, g.extent).context("building the grid")
}

fn grid_hamiltonian(s: &Scenario, grid: &Grid) -> Result<GridHamiltonian> {
    let sys = &s.system;
    let default = sys.potential.unwrap_or(Potential::None);
    if sys.masses.len() == 1 {
        return GridHamiltonian::single(grid, sys.masses[0], default).context("building the Hamiltonian");
    }
    let d = grid.dims() / (sys.masses.len() - 1);
    let mut particles = ParticleSystem::new(sys.masses.clone(), d).context("building the particle system")?;
    for i in 0..sys.masses.len() {
        for j in i + 1..sys.masses.len() {
            let potential = sys.pairs.iter().find(|p| p.i == i && p.j == j).map_or(default, |p| p.potential);
            if !potential.is_none() {
                particles = particles.with_pair(i, j, potential).context("adding a pair potential")?;
            }
        }
    }
    let frame = jacobi_frame(particles.masses()).context("building the Jacobi frame")?;
    assemble_relative_hamiltonian(&frame, grid, &particles).context("assembling the relative Hamiltonian")
}

/// The system as an operator, plus its grid when it lives on one.
fn hamiltonian(s: &Scenario) -> Result<(HamiltonianOperator, Option<Grid>)> {
    if let Some(levels) = &s.system.levels {
        return Ok((DenseHermitian::diagonal(levels).into(), None));
    }
    if let Some(n) = s.system.random {
        return Ok((DenseHermitian::random(n, s.seed).into(), None));
    }
    let grid = grid(s)?;
    Ok((grid_hamiltonian(s, &grid)?.into(), Some(grid)))
}

fn spectrum(h: &HamiltonianOperator) -> Result<SpectralData> {
    let dense = densify(h).context("densifying the Hamiltonian")?;
    diagonalize(&dense).context("diagonalizing the Hamiltonian")
}

fn packet(s: &Scenario, grid: &Grid, sd: Option<&SpectralData>) -> Result<WaveFunction> {
    let p = s.packet.as_ref().ok_or_else(|| invalid("packet", "missing [packet] section".into()))?;
    let zeros = vec![0.0; grid.dims()];
    let center = p.center.clone().unwrap_or_else(|| zeros.clone());
    let momentum = p.momentum.clone().unwrap_or(zeros);
    let width = p.width.unwrap_or(1.0);
    match p.shape {
        Shape::Gaussian => WaveFunction::gaussian(grid, &center, width, &momentum).context("building the packet"),
        Shape::Bump => WaveFunction::bump(grid, &center, width, &momentum).context("building the packet"),
        Shape::Eigenstate => {
            let sd = sd.ok_or_else(|| invalid("packet", "eigenstate packets need the spectrum".into()))?;
            let index = p.index.unwrap_or(0);
            let mut psi = WaveFunction::unnormalized(grid, sd.eigenvector(index), Representation::Position)
                .context("building the eigenstate packet")?;
            psi.normalize().context("normalizing the eigenstate packet")?;
            Ok(psi)
        }
    }
}

/// Unit-norm state vectors: the packet on a grid, the probes otherwise.
fn states(s: &Scenario, grid: Option<&Grid>, sd: Option<&SpectralData>) -> Result<Vec<Vec<Complex64>>> {
    if let Some(g) = grid {
        let psi = packet(s, g, sd)?;
        let scale = g.cell_volume().sqrt();
        return Ok(vec![psi.amplitudes().iter().map(|a| a * scale).collect()]);
    }
    let dim = s.finite_dim().unwrap_or(0);
    let probe = s.probe.as_ref().ok_or_else(|| invalid("probe", "missing [probe] section".into()))?;
    let mut out: Vec<Vec<Complex64>> = probe
        .vectors
        .iter()
        .map(|v| {
            let mut v: Vec<Complex64> = v.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
            let n = linalg::norm(&v);
            v.iter_mut().for_each(|x| *x /= n);
            v
        })
        .collect();
    out.extend(seeded_unit_vectors(dim, probe.random, s.seed));
    Ok(out)
}

fn float_row(values: &[f64]) -> Vec<Cell> {
    values.iter().map(|v| Cell::Float(*v)).collect()
}

fn asymptotics(s: &Scenario) -> Result<Outputs> {
    let a = s.asymptotics.as_ref().ok_or_else(|| invalid("asymptotics", "missing section".into()))?;
    let grid = grid(s)?;
    let h = grid_hamiltonian(s, &grid)?;
    let eigenstate = s.packet.as_ref().is_some_and(|p| p.shape == Shape::Eigenstate);
    let sd = if h.is_free() && !eigenstate { None } else { Some(spectrum(&HamiltonianOperator::from(h.clone()))?) };
    let psi = packet(s, &grid, sd.as_ref())?;
    let times = match &a.times {
        Some(t) => t.clone(),
        None => geometric_times(a.t_min, a.t_max, a.count, a.direction).context("building the time grid")?,
    };
    let mut config = SuiteConfig::new(a.radius, times);
    config.test_function = a.test_function;
    config.continuum_filter = a.continuum_filter;
    config.continuum_threshold = a.continuum_threshold;
    config.boundary_threshold = a.boundary_threshold;
    config.origin = a.origin.clone();
    let outcome = run_asymptotics_suite_with_spectrum(&h, sd.as_ref(), &psi, &config).context("asymptotics suite")?;
    let series = &outcome.series;

    let mut out = Outputs::default();
    let mut table = CsvTable::new(["t", "escape_norm", "energy_mismatch", "velocity_mismatch"]);
    for i in 0..series.times.len() {
        table.push(float_row(&[
            series.times[i],
            series.escape[i],
            series.energy_mismatch[i],
            series.velocity_mismatch[i],
        ]));
    }
    out.table("diagnostics.csv", table);
    let mut fits =
        CsvTable::new(["series", "exponent", "prefactor", "r_squared", "exponent_stderr", "t_first", "t_last"]);
    for f in &series.fits {
        let (e, p, r, se) = f.fit.map_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN), |x| {
            (x.exponent, x.prefactor, x.r_squared, x.exponent_stderr)
        });
        let mut row = vec![Cell::from(f.series.as_str())];
        row.extend(float_row(&[e, p, r, se, f.window.0, f.window.1]));
        fits.push(row);
    }
    out.table("fits.csv", fits);
    out.report("asymptotics.json", &outcome);

    if a.expect == Expectation::Bound {
        let floor = series.escape.iter().copied().fold(f64::INFINITY, f64::min);
        out.checks.push(Check {
            name: "smallest escape_norm".into(),
            value: floor,
            tolerance: a.bound_floor,
            passed: floor >= a.bound_floor,
        });
    } else {
        out.checks.push(Check::flag("escape_norm decreasing", is_decreasing(&series.escape)));
        out.checks.push(Check::flag("energy_mismatch decreasing", is_decreasing(&series.energy_mismatch)));
        out.checks.push(Check::flag("velocity_mismatch decreasing", is_decreasing(&series.velocity_mismatch)));
        let exponent = series.fit("velocity_mismatch").map_or(f64::NAN, |f| f.exponent);
        out.checks.push(Check::at_most(
            format!("velocity_mismatch exponent {exponent} vs {}", a.exponent_target),
            (exponent - a.exponent_target).abs(),
            a.exponent_tolerance,
        ));
    }
    out.halted = outcome.halted.as_ref().map(|e| e.to_string());
    Ok(out)
}

fn two_clocks(s: &Scenario) -> Result<Outputs> {
    let grid = grid(s)?;
    let psi = packet(s, &grid, None)?;
    let p = s.propagator.as_ref().ok_or_else(|| invalid("propagator", "missing section".into()))?;
    let samples = p.steps() / p.record_every + 1;
    let report = two_clocks_compare(&psi, p.t_final, samples).context("two-clock comparison")?;

    // d⟨x⟩/dt = ⟨ω'(k)⟩ for a Fourier multiplier ω
    let hat = psi.to_momentum();
    let weight: f64 = hat.amplitudes().iter().map(|a| a.norm_sqr()).sum();
    let moment = |f: &dyn Fn(f64) -> f64| {
        hat.amplitudes().iter().zip(grid.kvalues()).map(|(a, k)| a.norm_sqr() * f(*k)).sum::<f64>() / weight
    };
    let expected_half = moment(&|k: f64| if k == 0.0 { 0.0 } else { k.signum() });
    let expected_nr = moment(&|k| k);

    let mut out = Outputs::default();
    let mut table = CsvTable::new(["clock", "t", "center", "width"]);
    for run in [&report.half_laplacian, &report.nonrelativistic] {
        for i in 0..run.times.len() {
            let mut row = vec![Cell::from(run.clock.as_str())];
            row.extend(float_row(&[run.times[i], run.centers[i], run.widths[i]]));
            table.push(row);
        }
    }
    out.table("two_clocks.csv", table);
    out.report("two_clocks.json", &report);
    let tol = s.two_clocks_block().speed_tolerance;
    let relative = |got: f64, want: f64| (got - want).abs() / want.abs().max(1.0);
    out.checks.push(Check::at_most(
        format!("half_laplacian speed {} vs {expected_half}", report.half_laplacian.center_slope),
        relative(report.half_laplacian.center_slope, expected_half),
        tol,
    ));
    out.checks.push(Check::at_most(
        format!("nonrelativistic speed {} vs {expected_nr}", report.nonrelativistic.center_slope),
        relative(report.nonrelativistic.center_slope, expected_nr),
        tol,
    ));
    out.checks.push(Check::flag("nonrelativistic width grows", report.nonrelativistic.width_rate > 0.0));
    Ok(out)
}

fn ergodic(s: &Scenario) -> Result<Outputs> {
    let b = s.ergodic.as_ref().ok_or_else(|| invalid("ergodic", "missing section".into()))?;
    let (h, grid) = hamiltonian(s)?;
    let sd = spectrum(&h)?;
    let probes = states(s, grid.as_ref(), Some(&sd))?;
    let projector = eigen_projector(&sd, b.lambda);
    let exact: Vec<Vec<Complex64>> = probes.iter().map(|p| projector.apply(p)).collect();

    let mut horizons = b.horizons.clone();
    horizons.sort_by(f64::total_cmp);
    let mut errors = vec![Vec::new(); probes.len()];
    let mut table = CsvTable::new(["probe", "horizon", "step", "error"]);
    for &t in &horizons {
        let est = ergodic_projector(&sd, b.lambda, t, &probes, b.step).context("ergodic average")?;
        for (k, image) in est.images.iter().enumerate() {
            let err = linalg::distance(image, &exact[k]);
            errors[k].push(err);
            table.push(vec![Cell::from(k), Cell::Float(t), Cell::Float(est.step), Cell::Float(err)]);
        }
    }
    let mut out = Outputs::default();
    out.table("ergodic.csv", table);
    let rates: Vec<Option<f64>> = errors.iter().map(|e| power_law_fit(&horizons, e).ok().map(|f| f.exponent)).collect();
    out.report(
        "ergodic.json",
        serde_json::json!({
            "lambda": b.lambda,
            "projector_rank": projector.rank(),
            "horizons": horizons,
            "errors": errors,
            "fitted_exponents": rates,
        }),
    );
    for (k, e) in errors.iter().enumerate() {
        let last = *e.last().unwrap_or(&f64::NAN);
        out.checks.push(Check::at_most(
            format!("probe {k} error at T = {}", horizons.last().unwrap()),
            last,
            b.tolerance,
        ));
    }
    Ok(out)
}

fn stone(s: &Scenario) -> Result<Outputs> {
    let b = s.stone_block();
    let (h, grid) = hamiltonian(s)?;
    let sd = spectrum(&h)?;
    let probes = states(s, grid.as_ref(), Some(&sd))?;
    let eig = sd.eigenvalues();
    let lo = b.lambda_min.unwrap_or(eig[0] - 20.0);
    let hi = b.lambda_max.unwrap_or(eig[eig.len() - 1] + 20.0);
    let smallest = b.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let step = b.step.unwrap_or(0.5 * smallest);
    let count = ((hi - lo) / step).floor() as usize + 1;
    let lambdas: Vec<f64> = (0..count).map(|i| lo + i as f64 * step).collect();

    let mut out = Outputs::default();
    let mut table = CsvTable::new(["probe", "epsilon", "lambda", "density", "broadened"]);
    let mut summaries = Vec::new();
    for (k, psi) in probes.iter().enumerate() {
        for &eps in &b.epsilons {
            let scan = density_scan(&h, &lambdas, eps, psi, b.solver).context("Stone density scan")?;
            let mut worst: f64 = 0.0;
            let mut peak: f64 = 0.0;
            for (&l, &d) in lambdas.iter().zip(&scan.values) {
                let oracle = broadened_measure(&sd, l, eps, psi).context("broadened spectral measure")?;
                worst = worst.max((d - oracle).abs());
                peak = peak.max(oracle.abs());
                table.push(vec![Cell::from(k), Cell::Float(eps), Cell::Float(l), Cell::Float(d), Cell::Float(oracle)]);
            }
            out.checks.push(Check::at_most(
                format!("probe {k} eps {eps} pointwise error relative to peak"),
                worst / peak.max(f64::MIN_POSITIVE),
                b.pointwise_tolerance,
            ));
            out.checks.push(Check::at_most(
                format!("probe {k} eps {eps} integral deficit"),
                scan.deficit().abs(),
                b.integral_tolerance,
            ));
            summaries.push(serde_json::json!({
                "probe": k,
                "epsilon": eps,
                "integral": scan.integral,
                "norm_sqr": scan.norm_sqr,
                "warning": scan.warning,
            }));
        }
    }
    out.table("stone_scan.csv", table);
    out.report(
        "stone.json",
        serde_json::json!({ "lambda_min": lo, "lambda_max": hi, "step": step, "scans": summaries }),
    );
    Ok(out)
}

fn fourier_laplace(s: &Scenario) -> Result<Outputs> {
    let b = s.fourier_laplace_block();
    let (h, grid) = hamiltonian(s)?;
    let free = h.as_grid().filter(|g| g.is_free()).map(|g| g.kinetic().clone());
    let sd = match free {
        Some(_) => None,
        None => Some(spectrum(&h)?),
    };
    let evolver: &dyn Evolver = match (&free, &sd) {
        (Some(k), _) => k,
        (None, Some(sd)) => sd,
        (None, None) => unreachable!("one clock is always available"),
    };
    let solver = if grid.is_some() { Solver::ShiftedGrid } else { Solver::DirectDense };
    let probes = states(s, grid.as_ref(), sd.as_ref())?;
    let bound = evolver.spectral_bound();

    let mut out = Outputs::default();
    let mut table = CsvTable::new(["probe", "re_z", "im_z", "horizon", "step", "relative_error"]);
    let mut tail = CsvTable::new(["probe", "re_z", "im_z", "horizon", "relative_error", "tail_factor"]);
    for (k, psi) in probes.iter().enumerate() {
        for &[re, im] in &b.shifts {
            let z = Complex64::new(re, im);
            let direct = resolvent_apply(&h, z, psi, solver).context("direct resolvent solve")?;
            let scale = linalg::norm(&direct);
            let t_max = b.horizon_factor * minimal_horizon(z);
            let dt = b.step_factor * maximal_step(z, bound);
            let fl =
                fourier_laplace_resolvent(evolver, z, psi, t_max, dt, None).context("Fourier-Laplace quadrature")?;
            let err = linalg::distance(&fl, &direct) / scale;
            table.push(vec![
                Cell::from(k),
                Cell::Float(re),
                Cell::Float(im),
                Cell::Float(t_max),
                Cell::Float(dt),
                Cell::Float(err),
            ]);
            out.checks.push(Check::at_most(format!("probe {k} z = {re}{im:+}i relative error"), err, b.tolerance));

            if b.tail_horizons.is_empty() {
                continue;
            }
            let mut logs = Vec::new();
            for &t in &b.tail_horizons {
                let truncated = fourier_laplace_truncated(evolver, z, psi, t, dt).context("truncated quadrature")?;
                let e = linalg::distance(&truncated, &direct) / scale;
                logs.push(e.ln());
                tail.push(vec![
                    Cell::from(k),
                    Cell::Float(re),
                    Cell::Float(im),
                    Cell::Float(t),
                    Cell::Float(e),
                    Cell::Float((-im.abs() * t).exp()),
                ]);
            }
            if b.tail_horizons.len() >= 2 {
                let rate = linear_fit(&b.tail_horizons, &logs).map_or(f64::NAN, |f| f.slope);
                out.checks.push(Check::at_most(
                    format!("probe {k} z = {re}{im:+}i tail rate {rate} vs {}", -im.abs()),
                    (rate + im.abs()).abs() / im.abs(),
                    0.1,
                ));
            }
        }
    }
    out.table("fourier_laplace.csv", table);
    if !b.tail_horizons.is_empty() {
        out.table("fourier_laplace_tail.csv", tail);
    }
    Ok(out)
}

fn klein_gordon(s: &Scenario) -> Result<Outputs> {
    let b = s.klein_gordon.as_ref().ok_or_else(|| invalid("klein_gordon", "missing section".into()))?;
    let p = s.propagator.as_ref().ok_or_else(|| invalid("propagator", "missing section".into()))?;
    let grid = grid(s)?;
    let q: Vec<f64> =
        grid.positions().iter().map(|x| (-(x - b.center).powi(2) / (2.0 * b.width * b.width)).exp()).collect();
    let field = FieldState::new(&grid, q, vec![0.0; grid.len()], b.c, b.mu_field).context("building the field")?;
    let traj = evolve_klein_gordon(&field, p).context("Klein-Gordon leapfrog")?;
    let energies = traj.energies();
    let e0 = energies[0];

    let mut out = Outputs::default();
    out.table("kg_field.csv", field_table(&traj));
    let mut table = CsvTable::new(["t", "energy", "relative_drift"]);
    for (t, e) in traj.times.iter().zip(&energies) {
        table.push(float_row(&[*t, *e, (e - e0).abs() / e0.abs()]));
    }
    out.table("kg_energy.csv", table);
    out.checks.push(Check::at_most("relative energy drift", traj.max_energy_drift(), b.energy_tolerance));
    out.report(
        "klein_gordon.json",
        serde_json::json!({
            "stable_step": field.stable_step(),
            "max_frequency": field.max_frequency(),
            "max_energy_drift": traj.max_energy_drift(),
            "generator": traj.generator,
        }),
    );
    Ok(out)
}

fn com_separation(s: &Scenario) -> Result<Outputs> {
    let grid = grid(s)?;
    let sys = &s.system;
    let potential = sys.pairs.first().map(|p| p.potential).or(sys.potential).unwrap_or(Potential::None);
    let mut particles = ParticleSystem::new(sys.masses.clone(), 1).context("building the particle system")?;
    if !potential.is_none() {
        particles = particles.with_pair(0, 1, potential).context("adding the pair potential")?;
    }
    let report = com_separation_check(&particles, &grid).context("center-of-mass separation")?;
    let mut table = CsvTable::new(["index", "full", "separated", "deviation"]);
    for (i, (a, b)) in report.full.iter().zip(&report.separated).enumerate() {
        table.push(vec![Cell::from(i), Cell::Float(*a), Cell::Float(*b), Cell::Float((a - b).abs())]);
    }
    let mut out = Outputs::default();
    out.table("com_spectra.csv", table);
    out.checks.push(Check::at_most("spectrum deviation", report.max_deviation, report.tolerance));
    out.report("com_separation.json", &report);
    Ok(out)
}

fn beats(s: &Scenario) -> Result<Outputs> {
    let b = s.beats.as_ref().ok_or_else(|| invalid("beats", "missing section".into()))?;
    let (h, grid) = hamiltonian(s)?;
    let sd = spectrum(&h)?;
    let probe = match (b.probe_index, &b.probe_position, &grid) {
        (Some(i), _, _) => i,
        (None, Some(x), Some(g)) => nearest_point(g, x),
        _ => 0,
    };
    let a = Complex64::new(1.0 / (b.components.len() as f64).sqrt(), 0.0);
    let components: Vec<(usize, Complex64)> = b.components.iter().map(|&j| (j, a)).collect();
    let times: Vec<f64> = (0..b.samples).map(|i| i as f64 * b.dt).collect();
    let beat = beat_signal(&sd, &components, probe, &times).context("beat signal")?;

    let mut out = Outputs::default();
    out.table("beat_signal.csv", CsvTable::from_columns(["t", "density"], &[&beat.times, &beat.values]));
    let (omega, amp): (Vec<f64>, Vec<f64>) = beat.spectrum.iter().copied().unzip();
    out.table("beat_spectrum.csv", CsvTable::from_columns(["omega", "amplitude"], &[&omega, &amp]));
    let peak_amps: Vec<f64> =
        beat.peaks.iter().map(|w| beat.spectrum.iter().find(|(o, _)| o == w).map_or(f64::NAN, |(_, a)| *a)).collect();
    out.table("beat_peaks.csv", CsvTable::from_columns(["omega", "amplitude"], &[&beat.peaks, &peak_amps]));

    let mut energies: Vec<f64> = b.components.iter().map(|&j| sd.eigenvalues()[j]).collect();
    energies.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = Vec::new();
    for (i, x) in energies.iter().enumerate() {
        for y in &energies[i + 1..] {
            if y - x > 1e-9 && !gaps.iter().any(|g| (g - (y - x)).abs() <= 1e-9) {
                gaps.push(y - x);
            }
        }
    }
    gaps.sort_by(f64::total_cmp);
    if gaps.is_empty() {
        out.checks.push(Check::flag("constant signal", beat.peaks.is_empty()));
    }
    for g in &gaps {
        let miss = beat.peaks.iter().map(|p| (p - g).abs()).fold(f64::INFINITY, f64::min);
        out.checks.push(Check::at_most(format!("peak near gap {g}"), miss, beat.bin_width));
    }
    out.report(
        "beats.json",
        serde_json::json!({
            "probe_index": probe,
            "gaps": gaps,
            "peaks": beat.peaks,
            "dominant": beat.dominant,
            "bin_width": beat.bin_width,
        }),
    );
    Ok(out)
}

fn nearest_point(grid: &Grid, x: &[f64]) -> usize {
    let mut p = vec![0.0; grid.dims()];
    let mut best = (f64::INFINITY, 0);
    for i in 0..grid.len() {
        grid.point(i, &mut p);
        let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

fn equivalence(s: &Scenario) -> Result<Outputs> {
    let b = s.equivalence_block();
    let (h, grid) = hamiltonian(s)?;
    let sd = spectrum(&h)?;
    let probes = states(s, grid.as_ref(), Some(&sd))?;
    let energies = match &b.energies {
        Some(e) => e.clone(),
        None => {
            let clusters = sd.clusters();
            if clusters.len() > 16 {
                return Err(invalid(
                    "equivalence",
                    format!("{} distinct eigenvalues; list equivalence.energies explicitly", clusters.len()),
                ));
            }
            clusters.into_iter().map(|(mean, _)| mean).collect()
        }
    };
    let mut settings = EquivalenceSettings::new(probes, energies);
    settings.shifts = b.shifts.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
    settings.horizon = b.horizon;
    settings.broadenings = b.broadenings.clone();
    settings.fourier_laplace_tolerance = b.fourier_laplace_tolerance;
    settings.stone_tolerance = b.stone_tolerance;
    let reversed = TimeReversed(&sd);
    let clock: Option<&dyn Evolver> = match b.clock {
        ClockChoice::Exact => None,
        ClockChoice::TimeReversed => Some(&reversed),
    };
    let report = equivalence_report(&h, clock, &settings).context("equivalence report")?;

    let mut out = Outputs::default();
    let mut table = CsvTable::new(["check", "probe", "parameter", "error", "tolerance", "passed"]);
    for summary in [&report.ergodic, &report.fourier_laplace, &report.stone] {
        for e in &summary.entries {
            table.push(vec![
                Cell::from(summary.name.as_str()),
                Cell::from(e.probe),
                Cell::from(e.parameter.as_str()),
                Cell::Float(e.error),
                Cell::Float(e.tolerance),
                Cell::from(if e.passed { "true" } else { "false" }),
            ]);
        }
        let (value, tolerance) = summary.worst().map_or((0.0, 1.0), |w| (w.error, w.tolerance));
        out.checks.push(Check {
            name: format!("{} worst entry", summary.name),
            value,
            tolerance,
            passed: summary.passed,
        });
    }
    out.table("equivalence.csv", table);
    out.report("equivalence_report.json", &report);
    Ok(out)
}
