//! Resolvent `R(z) = (H - z)⁻¹`, Stone's formula for the spectral density,
//! and the Fourier–Laplace integral tying the resolvent to the clock.
//!
//! Inner products here are Euclidean on amplitude vectors. For grid states,
//! multiply by the cell volume to get `L²` quantities.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::linalg::{self, DenseHermitian, LinearOperator};
use crate::nbody::{densify, HamiltonianOperator};
use crate::spectral::{self, eigen_projector, ergodic_projector, Evolver, SpectralData};

/// Relative residual demanded from every resolvent solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// LU on the densified operator.
    DirectDense,
    /// Division by the symbol for free grid operators, GMRES otherwise.
    ShiftedGrid,
}

/// Solves `(H - z) φ = ψ`.
pub fn resolvent_apply(
    h: &HamiltonianOperator,
    z: Complex64,
    psi: &[Complex64],
    solver: Solver,
) -> Result<Vec<Complex64>> {
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: psi.len() });
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::SingularShift { z });
    }
    let phi = match solver {
        Solver::DirectDense => {
            let dense;
            let m = match h {
                HamiltonianOperator::Dense(m) => m,
                HamiltonianOperator::Grid(_) => {
                    dense = densify(h)?;
                    &dense
                }
            };
            if z.im == 0.0 {
                let (values, _) = m.eigen()?;
                if values.iter().any(|l| (l - z.re).abs() <= 1e-12) {
                    return Err(Error::SingularShift { z });
                }
            }
            m.solve_shifted(z, psi)?
        }
        Solver::ShiftedGrid => {
            let gh =
                h.as_grid().ok_or_else(|| Error::InvalidConfig("shifted grid solver needs a grid operator".into()))?;
            if z.im == 0.0 {
                return Err(Error::RealShift);
            }
            if gh.is_free() {
                gh.kinetic().apply_function(psi, |s| (Complex64::new(s, 0.0) - z).inv())
            } else {
                gmres_solve(gh, z, psi)?
            }
        }
    };
    let residual = shifted_residual(h, z, &phi, psi);
    if !(residual < RESIDUAL_TOLERANCE) {
        return Err(Error::SingularShift { z });
    }
    Ok(phi)
}

fn gmres_solve(op: &dyn LinearOperator, z: Complex64, psi: &[Complex64]) -> Result<Vec<Complex64>> {
    let (phi, _) = linalg::gmres_shifted(op, z, psi, 1e-11, 80, 20_000)?;
    Ok(phi)
}

/// `‖(H - z)φ - ψ‖ / ‖ψ‖`.
pub fn shifted_residual(h: &dyn LinearOperator, z: Complex64, phi: &[Complex64], psi: &[Complex64]) -> f64 {
    let hphi = h.apply(phi);
    let r: Vec<Complex64> = hphi.iter().zip(phi).zip(psi).map(|((a, p), b)| a - z * p - b).collect();
    let scale = linalg::norm(psi);
    if scale == 0.0 {
        linalg::norm(&r)
    } else {
        linalg::norm(&r) / scale
    }
}

/// `⟨ψ, (1/2πi)(R(λ+iε) - R(λ-iε)) ψ⟩` from two resolvent solves.
pub fn stone_density(
    h: &HamiltonianOperator,
    lambda: f64,
    epsilon: f64,
    psi: &[Complex64],
    solver: Solver,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveBroadening(epsilon));
    }
    let plus = resolvent_apply(h, Complex64::new(lambda, epsilon), psi, solver)?;
    let minus = resolvent_apply(h, Complex64::new(lambda, -epsilon), psi, solver)?;
    let diff: Vec<Complex64> = plus.iter().zip(&minus).map(|(a, b)| a - b).collect();
    let value = linalg::dot(psi, &diff) / Complex64::new(0.0, 2.0 * PI);
    Ok(value.re)
}

/// Stone densities on an energy grid.
#[derive(Debug, Clone, Serialize)]
pub struct DensityScan {
    pub lambdas: Vec<f64>,
    pub epsilon: f64,
    pub values: Vec<f64>,
    /// Trapezoid integral of `values` over `lambdas`.
    pub integral: f64,
    /// `‖ψ‖²`, the total mass of the spectral measure.
    pub norm_sqr: f64,
    /// Set when the integral falls more than 10% short of `‖ψ‖²`.
    pub warning: Option<String>,
}

impl DensityScan {
    /// `1 - integral / ‖ψ‖²`.
    pub fn deficit(&self) -> f64 {
        1.0 - self.integral / self.norm_sqr
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

pub fn density_scan(
    h: &HamiltonianOperator,
    lambdas: &[f64],
    epsilon: f64,
    psi: &[Complex64],
    solver: Solver,
) -> Result<DensityScan> {
    if !(epsilon > 0.0) {
        return Err(Error::NonPositiveBroadening(epsilon));
    }
    if lambdas.len() < 2 || lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("energy grid must be increasing with at least two points".into()));
    }
    let step = lambdas.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    // relative slack so that grids built as `a + i·ε/2` pass
    if step > 0.5 * epsilon * (1.0 + 1e-9) {
        return Err(Error::StepTooCoarse { step, limit: 0.5 * epsilon });
    }
    let values = lambdas.iter().map(|&l| stone_density(h, l, epsilon, psi, solver)).collect::<Result<Vec<f64>>>()?;
    let integral = trapezoid(lambdas, &values);
    let norm_sqr = linalg::norm_sqr(psi);
    let deficit = 1.0 - integral / norm_sqr;
    let warning = (deficit > 0.1).then(|| {
        format!(
            "scan integral {integral:.6} misses {:.1}% of ‖ψ‖² = {norm_sqr:.6}; widen the energy window",
            100.0 * deficit
        )
    });
    Ok(DensityScan { lambdas: lambdas.to_vec(), epsilon, values, integral, norm_sqr, warning })
}

/// Mean gap between consecutive eigenvalues.
pub fn mean_level_spacing(sd: &SpectralData) -> f64 {
    let l = sd.eigenvalues();
    if l.len() < 2 {
        return 0.0;
    }
    (l[l.len() - 1] - l[0]) / (l.len() - 1) as f64
}

/// Default broadening for boundary values: four mean level spacings.
pub fn default_broadening(sd: &SpectralData) -> f64 {
    4.0 * mean_level_spacing(sd)
}

/// Boundary value of the density by Richardson extrapolation over
/// `ε ∈ {4ε₀, 2ε₀, ε₀}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryValue {
    pub lambda: f64,
    pub epsilon: f64,
    /// Densities at `ε₀`, `2ε₀`, `4ε₀`.
    pub samples: [f64; 3],
    /// `(8f(ε₀) - 6f(2ε₀) + f(4ε₀)) / 3`, exact for `f` quadratic in `ε`.
    pub extrapolated: f64,
}

pub fn boundary_density(
    h: &HamiltonianOperator,
    lambda: f64,
    epsilon: f64,
    psi: &[Complex64],
    solver: Solver,
) -> Result<BoundaryValue> {
    let f1 = stone_density(h, lambda, epsilon, psi, solver)?;
    let f2 = stone_density(h, lambda, 2.0 * epsilon, psi, solver)?;
    let f4 = stone_density(h, lambda, 4.0 * epsilon, psi, solver)?;
    Ok(BoundaryValue { lambda, epsilon, samples: [f1, f2, f4], extrapolated: (8.0 * f1 - 6.0 * f2 + f4) / 3.0 })
}

/// Half-line of the Fourier–Laplace integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `t ∈ [0, ∞)`, for `Im z > 0`.
    Upper,
    /// `t ∈ (-∞, 0]`, for `Im z < 0`.
    Lower,
}

impl Branch {
    pub fn for_shift(z: Complex64) -> Result<Self> {
        if z.im > 0.0 {
            Ok(Branch::Upper)
        } else if z.im < 0.0 {
            Ok(Branch::Lower)
        } else {
            Err(Error::RealShift)
        }
    }
}

/// Largest tail factor `e^{-|Im z| T}` accepted by [`fourier_laplace_resolvent`].
pub const TAIL_LIMIT: f64 = 1e-6;
/// Bound on `dt · (|z| + max|λ|)`.
pub const PHASE_STEP_LIMIT: f64 = 0.5;

/// Shortest truncation time meeting [`TAIL_LIMIT`].
pub fn minimal_horizon(z: Complex64) -> f64 {
    -TAIL_LIMIT.ln() / z.im.abs()
}

/// Largest step meeting [`PHASE_STEP_LIMIT`].
pub fn maximal_step(z: Complex64, spectral_bound: f64) -> f64 {
    PHASE_STEP_LIMIT / (z.norm() + spectral_bound)
}

/// `R(z)ψ = i ∫₀^{±∞} e^{itz} e^{-itH} ψ dt`, truncated at `±T` and summed by
/// the trapezoid rule.
///
/// The sign of the prefactor is `+i` on both half-lines; the half-line is the
/// one on which `e^{itz}` decays. If `branch` is given it must match `Im z`.
/// The quadrature error relative to the exact integral is about
/// `(dt·|z - λ|)²/12` per spectral component, plus the tail `e^{-|Im z| T}`.
pub fn fourier_laplace_resolvent(
    evolver: &dyn Evolver,
    z: Complex64,
    psi: &[Complex64],
    t_max: f64,
    dt: f64,
    branch: Option<Branch>,
) -> Result<Vec<Complex64>> {
    let actual = Branch::for_shift(z)?;
    let tail = (-z.im.abs() * t_max).exp();
    if !(tail < TAIL_LIMIT) {
        return Err(Error::TruncationTooShort { t_max, tail, limit: TAIL_LIMIT });
    }
    let limit = maximal_step(z, evolver.spectral_bound());
    if !(dt > 0.0) || dt * (z.norm() + evolver.spectral_bound()) >= PHASE_STEP_LIMIT {
        return Err(Error::StepTooCoarse { step: dt, limit });
    }
    if let Some(b) = branch {
        if b != actual {
            return Err(Error::BranchMismatch(format!(
                "Im z = {} selects the {:?} half-line, {:?} requested",
                z.im, actual, b
            )));
        }
    }
    fourier_laplace_truncated(evolver, z, psi, t_max, dt)
}

/// [`fourier_laplace_resolvent`] without the truncation and step checks, for
/// studying how the error depends on `T` and `dt`.
pub fn fourier_laplace_truncated(
    evolver: &dyn Evolver,
    z: Complex64,
    psi: &[Complex64],
    t_max: f64,
    dt: f64,
) -> Result<Vec<Complex64>> {
    let branch = Branch::for_shift(z)?;
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidTime(t_max));
    }
    if !(dt > 0.0) {
        return Err(Error::StepTooCoarse { step: dt, limit: f64::NAN });
    }
    if psi.len() != evolver.dim() {
        return Err(Error::DimensionMismatch { expected: evolver.dim(), got: psi.len() });
    }
    let steps = (t_max / dt).ceil().max(1.0) as usize;
    let sign = match branch {
        Branch::Upper => 1.0,
        Branch::Lower => -1.0,
    };
    let h = sign * t_max / steps as f64;
    let i = Complex64::new(0.0, 1.0);
    let mut acc = vec![Complex64::new(0.0, 0.0); psi.len()];
    let mut state = psi.to_vec();
    for m in 0..=steps {
        let t = m as f64 * h;
        let weight = if m == 0 || m == steps { 0.5 } else { 1.0 };
        let factor = i * h * weight * (i * z * t).exp();
        for (a, s) in acc.iter_mut().zip(&state) {
            *a += factor * s;
        }
        if m < steps {
            state = evolver.evolve(&state, h);
        }
    }
    Ok(acc)
}

/// Settings for [`equivalence_report`].
#[derive(Debug, Clone)]
pub struct EquivalenceSettings {
    pub probes: Vec<Vec<Complex64>>,
    pub shifts: Vec<Complex64>,
    /// Energies at which eigenprojections are estimated.
    pub energies: Vec<f64>,
    /// Averaging horizon of the ergodic estimate.
    pub horizon: f64,
    /// Broadenings for the Stone check.
    pub broadenings: Vec<f64>,
    pub fourier_laplace_tolerance: f64,
    pub stone_tolerance: f64,
}

impl EquivalenceSettings {
    pub fn new(probes: Vec<Vec<Complex64>>, energies: Vec<f64>) -> Self {
        Self {
            probes,
            shifts: vec![Complex64::new(0.5, 0.5), Complex64::new(0.5, -0.5)],
            energies,
            horizon: 200.0,
            broadenings: vec![0.1, 0.05],
            fourier_laplace_tolerance: 1e-3,
            stone_tolerance: 1e-8,
        }
    }
}

/// One comparison inside an equivalence report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub probe: usize,
    /// The energy, shift or broadening the entry refers to.
    pub parameter: String,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub passed: bool,
    pub entries: Vec<CheckEntry>,
    /// Fitted convergence rate, when the check has one.
    pub rate: Option<f64>,
    pub rate_description: String,
}

impl CheckSummary {
    fn new(name: &str, entries: Vec<CheckEntry>, rate: Option<f64>, rate_description: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: entries.iter().all(|e| e.passed),
            entries,
            rate,
            rate_description: rate_description.to_string(),
        }
    }

    /// Entry with the largest error-to-tolerance ratio.
    pub fn worst(&self) -> Option<&CheckEntry> {
        self.entries.iter().max_by(|a, b| (a.error / a.tolerance).total_cmp(&(b.error / b.tolerance)))
    }
}

/// Agreement of the time-averaged, Fourier–Laplace and Stone routes to the
/// spectral data with the eigendecomposition.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub dimension: usize,
    pub ergodic: CheckSummary,
    pub fourier_laplace: CheckSummary,
    pub stone: CheckSummary,
    pub passed: bool,
}

impl EquivalenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Names of the failing checks.
    pub fn failures(&self) -> Vec<&str> {
        [&self.ergodic, &self.fourier_laplace, &self.stone]
            .into_iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

fn relative(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Runs all three comparisons. The clock is `evolver` when given, the exact
/// eigen-expansion otherwise; the oracles always come from diagonalizing `h`.
pub fn equivalence_report(
    h: &HamiltonianOperator,
    evolver: Option<&dyn Evolver>,
    settings: &EquivalenceSettings,
) -> Result<EquivalenceReport> {
    let dense: DenseHermitian = densify(h)?;
    let sd = spectral::diagonalize(&dense)?;
    let clock: &dyn Evolver = evolver.unwrap_or(&sd);
    for p in &settings.probes {
        if p.len() != sd.dim() {
            return Err(Error::DimensionMismatch { expected: sd.dim(), got: p.len() });
        }
    }

    // (a) ergodic averages against eigenprojections
    let mut entries = Vec::new();
    let mut rate_samples: Vec<(f64, f64)> = Vec::new();
    for &lambda in &settings.energies {
        let projector = eigen_projector(&sd, lambda);
        let gap = sd
            .eigenvalues()
            .iter()
            .map(|l| (l - lambda).abs())
            .filter(|d| *d > spectral::CLUSTER_TOLERANCE)
            .fold(f64::INFINITY, f64::min);
        let horizons = [settings.horizon, 2.0 * settings.horizon, 4.0 * settings.horizon];
        for (hi, &t) in horizons.iter().enumerate() {
            let est = ergodic_projector(clock, lambda, t, &settings.probes, None)?;
            for (pi, (image, probe)) in est.images.iter().zip(&settings.probes).enumerate() {
                let exact = projector.apply(probe);
                let err = linalg::distance(image, &exact);
                let scale = linalg::norm(probe);
                if hi == 0 {
                    // continuous-time bound 2/(T·gap), widened for the trapezoid step
                    let tolerance = scale * 2.1 / (t * gap) + 1e-9;
                    entries.push(CheckEntry {
                        probe: pi,
                        parameter: format!("lambda={lambda}"),
                        error: err,
                        tolerance,
                        passed: err <= tolerance,
                    });
                }
                if err > 1e-14 {
                    rate_samples.push((t, err));
                }
            }
        }
    }
    let ergodic_rate = envelope_rate(&rate_samples);
    let ergodic = CheckSummary::new(
        "ergodic_projector",
        entries,
        ergodic_rate,
        "exponent p in error ~ T^p over T, 2T, 4T (largest error per horizon)",
    );

    // (b) Fourier–Laplace quadrature against direct solves
    let direct = HamiltonianOperator::Dense(dense.clone());
    let mut entries = Vec::new();
    let mut tail_rates = Vec::new();
    for &z in &settings.shifts {
        let bound = clock.spectral_bound().max(sd.spectral_radius());
        let dt = 0.1 * maximal_step(z, bound);
        let t_max = 1.5 * minimal_horizon(z);
        for (pi, probe) in settings.probes.iter().enumerate() {
            let exact = resolvent_apply(&direct, z, probe, Solver::DirectDense)?;
            let approx = fourier_laplace_truncated(clock, z, probe, t_max, dt)?;
            let err = relative(linalg::distance(&approx, &exact), linalg::norm(&exact));
            entries.push(CheckEntry {
                probe: pi,
                parameter: format!("z={}{:+}i", z.re, z.im),
                error: err,
                tolerance: settings.fourier_laplace_tolerance,
                passed: err <= settings.fourier_laplace_tolerance,
            });
        }
        if let Some(probe) = settings.probes.first() {
            let exact = resolvent_apply(&direct, z, probe, Solver::DirectDense)?;
            let scale = linalg::norm(&exact);
            let horizons: Vec<f64> = [0.2, 0.35, 0.5].iter().map(|f| f * minimal_horizon(z)).collect();
            let errs = horizons
                .iter()
                .map(|&t| {
                    fourier_laplace_truncated(clock, z, probe, t, dt)
                        .map(|v| relative(linalg::distance(&v, &exact), scale))
                })
                .collect::<Result<Vec<f64>>>()?;
            if errs.iter().all(|e| *e > 0.0) {
                let logs: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
                if let Ok(line) = fit::linear_fit(&horizons, &logs) {
                    tail_rates.push(-line.slope / z.im.abs());
                }
            }
        }
    }
    let tail_rate = (!tail_rates.is_empty()).then(|| tail_rates.iter().sum::<f64>() / tail_rates.len() as f64);
    let fourier_laplace = CheckSummary::new(
        "fourier_laplace",
        entries,
        tail_rate,
        "tail decay rate in units of |Im z| (1 for e^{-|Im z| T})",
    );

    // (c) Stone densities against Lorentzian-broadened eigenweights
    let mut entries = Vec::new();
    for (pi, probe) in settings.probes.iter().enumerate() {
        let weights = sd.weights(probe);
        for &eps in &settings.broadenings {
            let mut worst: f64 = 0.0;
            for &lambda in &settings.energies {
                let via_solve = stone_density(&direct, lambda, eps, probe, Solver::DirectDense)?;
                let oracle = spectral::broadened_from_weights(sd.eigenvalues(), &weights, lambda, eps);
                worst = worst.max(relative((via_solve - oracle).abs(), oracle.abs().max(1e-300)));
            }
            entries.push(CheckEntry {
                probe: pi,
                parameter: format!("epsilon={eps}"),
                error: worst,
                tolerance: settings.stone_tolerance,
                passed: worst <= settings.stone_tolerance,
            });
        }
    }
    let stone = CheckSummary::new("stone_formula", entries, None, "");

    let passed = ergodic.passed && fourier_laplace.passed && stone.passed;
    Ok(EquivalenceReport { dimension: sd.dim(), ergodic, fourier_laplace, stone, passed })
}

/// Power-law exponent of the per-horizon maximum error.
fn envelope_rate(samples: &[(f64, f64)]) -> Option<f64> {
    let mut horizons: Vec<f64> = samples.iter().map(|s| s.0).collect();
    horizons.sort_by(f64::total_cmp);
    horizons.dedup();
    if horizons.len() < 2 {
        return None;
    }
    let maxima: Vec<f64> =
        horizons.iter().map(|t| samples.iter().filter(|s| s.0 == *t).map(|s| s.1).fold(0.0, f64::max)).collect();
    fit::power_law_fit(&horizons, &maxima).ok().map(|f| f.exponent)
}
